#include "itcl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace itcl {

AccuracyMatrix AccuracyMatrix::empty(int T) {
    AccuracyMatrix m;
    m.T = T;
    m.rows.resize(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t)
        m.rows[static_cast<size_t>(t - 1)].assign(static_cast<size_t>(t), -1.0);
    return m;
}

double AccuracyMatrix::a(int t, int tau) const {
    if (t < 1 || t > T || tau < 1 || tau > t)
        throw IncompleteMatrix("a(" + std::to_string(t) + "," + std::to_string(tau) +
                               ") outside the lower triangle");
    return rows[static_cast<size_t>(t - 1)][static_cast<size_t>(tau - 1)];
}

void AccuracyMatrix::set(int t, int tau, double value) {
    if (t < 1 || t > T || tau < 1 || tau > t)
        throw IncompleteMatrix("set outside the lower triangle");
    rows[static_cast<size_t>(t - 1)][static_cast<size_t>(tau - 1)] = value;
}

bool AccuracyMatrix::row_complete(int t) const {
    for (double v : rows[static_cast<size_t>(t - 1)])
        if (v < 0.0) return false;
    return true;
}

bool AccuracyMatrix::complete() const {
    for (int t = 1; t <= T; ++t)
        if (!row_complete(t)) return false;
    return true;
}

std::string AccuracyMatrix::to_csv() const {
    std::ostringstream out;
    out << "t,tau,accuracy\n";
    char buf[64];
    for (int t = 1; t <= T; ++t)
        for (int tau = 1; tau <= t; ++tau) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", t, tau, a(t, tau));
            out << buf;
        }
    return out.str();
}

AccuracyMatrix AccuracyMatrix::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,tau,accuracy", 0) != 0)
        throw MissingMatrix("matrix csv must start with 't,tau,accuracy'");
    int maxt = 0;
    std::vector<std::tuple<int, int, double>> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int t = 0, tau = 0;
        double v = 0.0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf", &t, &tau, &v) != 3)
            throw MissingMatrix("bad matrix csv line: " + line);
        cells.emplace_back(t, tau, v);
        maxt = std::max(maxt, t);
    }
    AccuracyMatrix m = AccuracyMatrix::empty(maxt);
    for (const auto& [t, tau, v] : cells) m.set(t, tau, v);
    if (!m.complete()) throw IncompleteMatrix("matrix csv has holes");
    return m;
}

double average_accuracy(const AccuracyMatrix& m, int t) {
    if (t < 1 || t > m.T) throw IncompleteRow("row " + std::to_string(t));
    if (!m.row_complete(t)) throw IncompleteRow("row " + std::to_string(t) + " not populated");
    double s = 0.0;
    for (int tau = 1; tau <= t; ++tau) s += m.a(t, tau);
    return s / t;
}

double average_forgetting(const AccuracyMatrix& m, int t) {
    if (t < 1 || t > m.T) throw IncompleteMatrix("row " + std::to_string(t));
    if (t == 1) return 0.0;
    for (int r = 1; r <= t; ++r)
        if (!m.row_complete(r)) throw IncompleteMatrix("row " + std::to_string(r));
    double total = 0.0;
    for (int tau = 1; tau <= t - 1; ++tau) {
        double best = -1e300;
        for (int tp = tau; tp <= t - 1; ++tp) best = std::max(best, m.a(tp, tau));
        total += best - m.a(t, tau);
    }
    return total / (t - 1);
}

MetricsReport metrics_report(const AccuracyMatrix& m) {
    if (!m.complete()) throw IncompleteMatrix("report needs a fully populated matrix");
    MetricsReport r;
    r.T = m.T;
    r.final_average_accuracy = average_accuracy(m, m.T);
    r.final_average_forgetting = average_forgetting(m, m.T);
    for (int tau = 1; tau <= m.T; ++tau) r.final_task_accuracies.push_back(m.a(m.T, tau));
    for (int t = 1; t <= m.T; ++t) r.accuracy_trajectory.push_back(average_accuracy(m, t));
    return r;
}

std::string metrics_report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["num_tasks"] = r.T;
    j["average_accuracy"] = r.final_average_accuracy;
    j["average_forgetting"] = r.final_average_forgetting;
    j["task_accuracies"] = r.final_task_accuracies;
    j["accuracy_trajectory"] = r.accuracy_trajectory;
    return j.dump(2);
}

std::string metrics_report_text(const MetricsReport& r) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "tasks: %d  avg accuracy: %.4f  avg forgetting: %.4f\n",
                  r.T, r.final_average_accuracy, r.final_average_forgetting);
    out << buf;
    out << "per-task accuracy:";
    for (double v : r.final_task_accuracies) {
        std::snprintf(buf, sizeof buf, " %.4f", v);
        out << buf;
    }
    out << "\ntrajectory:      ";
    for (double v : r.accuracy_trajectory) {
        std::snprintf(buf, sizeof buf, " %.4f", v);
        out << buf;
    }
    out << "\n";
    return out.str();
}

} // namespace itcl
