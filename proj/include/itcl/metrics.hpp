#pragma once

#include <string>
#include <vector>

#include "itcl/errors.hpp"

namespace itcl {

// Lower-triangular accuracy matrix: a(t, tau) is the accuracy on the test set
// of task tau with the model obtained after training on task t (1 <= tau <= t).
struct AccuracyMatrix {
    int T = 0;
    std::vector<std::vector<double>> rows; // rows[t-1] has t entries

    static AccuracyMatrix empty(int T);
    double a(int t, int tau) const;
    void set(int t, int tau, double value);
    bool row_complete(int t) const;
    bool complete() const;

    std::string to_csv() const; // header "t,tau,accuracy"
    static AccuracyMatrix from_csv(const std::string& text);
};

// mean of row t
double average_accuracy(const AccuracyMatrix& m, int t);

// mean over tau < t of max_{tau' in {tau..t-1}} (a(tau',tau) - a(t,tau));
// the max runs over the defined lower-triangular entries. t = 1 returns 0.
double average_forgetting(const AccuracyMatrix& m, int t);

struct MetricsReport {
    int T = 0;
    double final_average_accuracy = 0.0;
    double final_average_forgetting = 0.0;
    std::vector<double> final_task_accuracies; // a(T, tau)
    std::vector<double> accuracy_trajectory;   // avg accuracy after each session
};

MetricsReport metrics_report(const AccuracyMatrix& m);
std::string metrics_report_json(const MetricsReport& r);
std::string metrics_report_text(const MetricsReport& r);

} // namespace itcl
