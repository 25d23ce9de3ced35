#include "itcl/task_stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "itcl/rng.hpp"

namespace itcl {

using nlohmann::json;

void LabeledDataset::validate() const {
    if (samples.empty()) throw EmptyDataset("dataset '" + source_id + "' has no samples");
    const std::vector<int>& shape = samples.front().image.shape;
    for (const Sample& s : samples) {
        if (s.label < 0 || s.label >= num_classes())
            throw LabelSpaceMismatch("label " + std::to_string(s.label) + " outside [0," +
                                     std::to_string(num_classes()) + ")");
        if (s.image.shape != shape)
            throw ShapeMismatch("sample images must share one shape");
    }
}

const SessionData& TaskStream::session_data(int j) const {
    if (j < 1 || j > num_sessions())
        throw OutOfOrderSession("session " + std::to_string(j) + " of " +
                                std::to_string(num_sessions()));
    return (*data)[static_cast<size_t>(j - 1)];
}

namespace {

// Deterministic 80/20 split of one class's sample indices.
void split_indices(std::vector<int>& idx, uint64_t seed, std::vector<int>& train,
                   std::vector<int>& test) {
    auto rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    size_t n_test = idx.size() / 5;
    if (n_test == 0 && idx.size() >= 2) n_test = 1;
    for (size_t i = 0; i < idx.size(); ++i)
        (i < idx.size() - n_test ? train : test).push_back(idx[i]);
}

uint64_t id_checksum(const std::vector<Sample>& samples) {
    std::vector<int> ids;
    ids.reserve(samples.size());
    for (const Sample& s : samples) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int id : ids) {
        h ^= static_cast<uint64_t>(id);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

TaskStream build_class_incremental_stream(const LabeledDataset& dataset, int num_tasks,
                                          uint64_t shuffle_seed) {
    dataset.validate();
    if (num_tasks < 1) throw NonDivisibleSplit("num_tasks must be >= 1");
    const int k = dataset.num_classes();
    if (k % num_tasks != 0)
        throw NonDivisibleSplit(std::to_string(k) + " classes do not divide into " +
                                std::to_string(num_tasks) + " tasks");
    const int per_task = k / num_tasks;

    std::vector<int> perm(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) perm[static_cast<size_t>(i)] = i;
    auto rng = make_rng(derive_seed(shuffle_seed, "class-partition"));
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<int> class_to_task(static_cast<size_t>(k));
    TaskStream s;
    s.mode = StreamMode::class_incremental;
    s.total_classes = k;
    s.build_seed = shuffle_seed;
    s.image_shape = dataset.samples.front().image.shape;
    auto data = std::make_shared<std::vector<SessionData>>(static_cast<size_t>(num_tasks));
    for (int t = 0; t < num_tasks; ++t) {
        SessionSpec spec;
        spec.session_index = t + 1;
        spec.data_ref = "session_" + std::to_string(t + 1);
        for (int i = 0; i < per_task; ++i) {
            const int c = perm[static_cast<size_t>(t * per_task + i)];
            spec.class_ids.push_back(c);
            class_to_task[static_cast<size_t>(c)] = t;
        }
        std::sort(spec.class_ids.begin(), spec.class_ids.end());
        s.sessions.push_back(std::move(spec));
    }

    // group sample indices per class, honoring explicit splits when present
    std::vector<std::vector<int>> unsplit(static_cast<size_t>(k));
    for (size_t i = 0; i < dataset.samples.size(); ++i) {
        const Sample& smp = dataset.samples[i];
        const int t = class_to_task[static_cast<size_t>(smp.label)];
        SessionData& sd = (*data)[static_cast<size_t>(t)];
        if (smp.split == Split::train)
            sd.train.push_back(smp);
        else if (smp.split == Split::test)
            sd.test.push_back(smp);
        else
            unsplit[static_cast<size_t>(smp.label)].push_back(static_cast<int>(i));
    }
    for (int c = 0; c < k; ++c) {
        if (unsplit[static_cast<size_t>(c)].empty()) continue;
        std::vector<int> tr, te;
        split_indices(unsplit[static_cast<size_t>(c)],
                      derive_seed(shuffle_seed, "train-test-split", static_cast<uint64_t>(c)),
                      tr, te);
        SessionData& sd = (*data)[static_cast<size_t>(class_to_task[static_cast<size_t>(c)])];
        for (int i : tr) sd.train.push_back(dataset.samples[static_cast<size_t>(i)]);
        for (int i : te) sd.test.push_back(dataset.samples[static_cast<size_t>(i)]);
    }
    // assign ids to samples that lack one
    int next_id = 0;
    for (const Sample& smp : dataset.samples) next_id = std::max(next_id, smp.id + 1);
    for (SessionData& sd : *data)
        for (auto* vec : {&sd.train, &sd.test})
            for (Sample& smp : *vec)
                if (smp.id < 0) smp.id = next_id++;
    s.data = std::move(data);
    return s;
}

TaskStream build_domain_incremental_stream(const std::vector<LabeledDataset>& domains) {
    if (domains.empty()) throw EmptyDataset("no domains given");
    for (const auto& d : domains) d.validate();
    const LabeledDataset& first = domains.front();
    for (const auto& d : domains) {
        if (d.num_classes() != first.num_classes() || d.class_names != first.class_names)
            throw LabelSpaceMismatch("domain '" + d.source_id +
                                     "' disagrees on the class list");
        std::vector<char> seen(static_cast<size_t>(d.num_classes()), 0);
        for (const Sample& s : d.samples) seen[static_cast<size_t>(s.label)] = 1;
        for (int c = 0; c < d.num_classes(); ++c)
            if (!seen[static_cast<size_t>(c)])
                throw LabelSpaceMismatch("domain '" + d.source_id + "' lacks class " +
                                         std::to_string(c));
    }

    TaskStream s;
    s.mode = StreamMode::domain_incremental;
    s.total_classes = first.num_classes();
    s.image_shape = first.samples.front().image.shape;
    auto data = std::make_shared<std::vector<SessionData>>(domains.size());
    std::vector<int> all_classes(static_cast<size_t>(s.total_classes));
    for (int c = 0; c < s.total_classes; ++c) all_classes[static_cast<size_t>(c)] = c;

    int next_id = 0;
    for (size_t d = 0; d < domains.size(); ++d) {
        SessionSpec spec;
        spec.session_index = static_cast<int>(d) + 1;
        spec.class_ids = all_classes;
        spec.data_ref = domains[d].source_id.empty() ? "domain_" + std::to_string(d + 1)
                                                     : domains[d].source_id;
        s.sessions.push_back(std::move(spec));

        std::vector<std::vector<int>> unsplit(static_cast<size_t>(s.total_classes));
        SessionData& sd = (*data)[d];
        for (size_t i = 0; i < domains[d].samples.size(); ++i) {
            const Sample& smp = domains[d].samples[i];
            if (smp.split == Split::train)
                sd.train.push_back(smp);
            else if (smp.split == Split::test)
                sd.test.push_back(smp);
            else
                unsplit[static_cast<size_t>(smp.label)].push_back(static_cast<int>(i));
        }
        for (int c = 0; c < s.total_classes; ++c) {
            if (unsplit[static_cast<size_t>(c)].empty()) continue;
            std::vector<int> tr, te;
            split_indices(unsplit[static_cast<size_t>(c)],
                          derive_seed(d, "train-test-split", static_cast<uint64_t>(c)), tr, te);
            for (int i : tr) sd.train.push_back(domains[d].samples[static_cast<size_t>(i)]);
            for (int i : te) sd.test.push_back(domains[d].samples[static_cast<size_t>(i)]);
        }
        for (auto* vec : {&sd.train, &sd.test})
            for (Sample& smp : *vec)
                if (smp.id < 0) smp.id = next_id++;
                else next_id = std::max(next_id, smp.id + 1);
    }
    s.data = std::move(data);
    return s;
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

namespace {

struct ClassPattern {
    double bu, bv, br, ba;      // blob center/radius/amplitude
    double b2u, b2v, b2r, b2a;  // second blob
    double freq, angle, phase, gamp;
    std::vector<double> blob_w, grat_w;
};

ClassPattern make_pattern(uint64_t seed, int channels) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ClassPattern p;
    p.bu = 0.15 + 0.7 * U(rng);
    p.bv = 0.15 + 0.7 * U(rng);
    p.br = 0.10 + 0.15 * U(rng);
    p.ba = 1.2 + 0.8 * U(rng);
    p.b2u = 0.15 + 0.7 * U(rng);
    p.b2v = 0.15 + 0.7 * U(rng);
    p.b2r = 0.08 + 0.12 * U(rng);
    p.b2a = 0.8 + 0.8 * U(rng);
    p.freq = (2.0 + 5.0 * U(rng)) * 3.14159265358979;
    p.angle = 3.14159265358979 * U(rng);
    p.phase = 2.0 * 3.14159265358979 * U(rng);
    p.gamp = 0.5 + 0.6 * U(rng);
    for (int c = 0; c < channels; ++c) {
        p.blob_w.push_back(2.0 * U(rng) - 1.0);
        p.grat_w.push_back(2.0 * U(rng) - 1.0);
    }
    return p;
}

// Deterministic appearance shift per source domain: channel rotation,
// contrast flip on odd styles, distinct low-frequency background.
Tensor render_pattern(const ClassPattern& p, int channels, int h, int w, int style) {
    Tensor img({channels, h, w});
    const double ca = std::cos(p.angle), sa = std::sin(p.angle);
    for (int c = 0; c < channels; ++c) {
        const int src = (c + style) % channels;
        const double flip = (style % 2 == 1) ? -1.0 : 1.0;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double u = h > 1 ? static_cast<double>(i) / (h - 1) : 0.5;
                const double v = w > 1 ? static_cast<double>(j) / (w - 1) : 0.5;
                const double d1 = (u - p.bu) * (u - p.bu) + (v - p.bv) * (v - p.bv);
                const double d2 = (u - p.b2u) * (u - p.b2u) + (v - p.b2v) * (v - p.b2v);
                double val = p.ba * std::exp(-d1 / (2 * p.br * p.br)) * p.blob_w[static_cast<size_t>(src)];
                val += p.b2a * std::exp(-d2 / (2 * p.b2r * p.b2r)) * p.blob_w[static_cast<size_t>((src + 1) % channels)];
                val += p.gamp * std::sin(p.freq * (u * ca + v * sa) + p.phase) *
                       p.grat_w[static_cast<size_t>(src)];
                val *= flip;
                if (style > 0)
                    val += 0.6 * std::sin((2.0 + style) * 3.14159265 * (u + v) + 0.7 * style);
                img.data[(static_cast<size_t>(c) * h + i) * w + j] = val;
            }
        }
    }
    return img;
}

} // namespace

LabeledDataset make_synthetic_dataset(int num_classes, int samples_per_class,
                                      const std::vector<int>& image_shape, uint64_t seed,
                                      int domain_style, int label_offset, double noise) {
    if (num_classes < 1 || samples_per_class < 1)
        throw EmptyDataset("synthetic dataset needs >=1 class and sample");
    if (image_shape.size() != 3) throw ShapeMismatch("image shape must be CxHxW");
    const int channels = image_shape[0], h = image_shape[1], w = image_shape[2];

    LabeledDataset ds;
    ds.source_id = "synthetic:s" + std::to_string(seed) + ":d" + std::to_string(domain_style);
    for (int c = 0; c < num_classes; ++c)
        ds.class_names.push_back("class_" + std::to_string(label_offset + c));

    int next_id = 0;
    for (int c = 0; c < num_classes; ++c) {
        const uint64_t pattern_seed =
            derive_seed(seed, "class-pattern", static_cast<uint64_t>(label_offset + c));
        const ClassPattern pat = make_pattern(pattern_seed, channels);
        const Tensor base = render_pattern(pat, channels, h, w, domain_style);
        auto rng = make_rng(derive_seed(seed, "class-samples",
                                        static_cast<uint64_t>(label_offset + c),
                                        static_cast<uint64_t>(domain_style)));
        std::normal_distribution<double> N(0.0, 1.0);
        for (int i = 0; i < samples_per_class; ++i) {
            Sample s;
            s.label = c;
            s.id = next_id++;
            s.image = base;
            for (double& v : s.image.data) v += noise * N(rng);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

TaskStream make_synthetic_stream(int num_tasks, int classes_per_task, int samples_per_class,
                                 const std::vector<int>& image_shape, uint64_t seed,
                                 double noise) {
    if (num_tasks < 1 || classes_per_task < 1 || samples_per_class < 1)
        throw EmptyDataset("synthetic stream counts must be >= 1");
    LabeledDataset ds =
        make_synthetic_dataset(num_tasks * classes_per_task, samples_per_class, image_shape,
                               derive_seed(seed, "synthetic-data"), 0, 0, noise);
    return build_class_incremental_stream(ds, num_tasks, derive_seed(seed, "partition"));
}

TaskStream make_synthetic_multisource_stream(int num_domains, int classes_per_task,
                                             int samples_per_class,
                                             const std::vector<int>& image_shape,
                                             uint64_t seed, double noise) {
    TaskStream s;
    s.mode = StreamMode::class_incremental;
    s.total_classes = num_domains * classes_per_task;
    s.build_seed = seed;
    s.image_shape = image_shape;
    auto data = std::make_shared<std::vector<SessionData>>(static_cast<size_t>(num_domains));
    int next_id = 0;
    for (int d = 0; d < num_domains; ++d) {
        LabeledDataset ds = make_synthetic_dataset(
            classes_per_task, samples_per_class, image_shape,
            derive_seed(seed, "multisource", static_cast<uint64_t>(d)), d,
            d * classes_per_task, noise);
        SessionSpec spec;
        spec.session_index = d + 1;
        spec.data_ref = "domain_" + std::to_string(d + 1);
        for (int c = 0; c < classes_per_task; ++c)
            spec.class_ids.push_back(d * classes_per_task + c);
        s.sessions.push_back(std::move(spec));

        SessionData& sd = (*data)[static_cast<size_t>(d)];
        std::vector<std::vector<int>> by_class(static_cast<size_t>(classes_per_task));
        for (size_t i = 0; i < ds.samples.size(); ++i)
            by_class[static_cast<size_t>(ds.samples[i].label)].push_back(static_cast<int>(i));
        for (int c = 0; c < classes_per_task; ++c) {
            std::vector<int> tr, te;
            split_indices(by_class[static_cast<size_t>(c)],
                          derive_seed(seed, "ms-split", static_cast<uint64_t>(d),
                                      static_cast<uint64_t>(c)),
                          tr, te);
            for (int i : tr) {
                Sample smp = ds.samples[static_cast<size_t>(i)];
                smp.label = d * classes_per_task + smp.label;
                smp.id = next_id++;
                sd.train.push_back(std::move(smp));
            }
            for (int i : te) {
                Sample smp = ds.samples[static_cast<size_t>(i)];
                smp.label = d * classes_per_task + smp.label;
                smp.id = next_id++;
                sd.test.push_back(std::move(smp));
            }
        }
    }
    s.data = std::move(data);
    return s;
}

TaskStream make_synthetic_domain_incremental_stream(int num_domains, int num_classes,
                                                    int samples_per_class,
                                                    const std::vector<int>& image_shape,
                                                    uint64_t seed, double noise) {
    std::vector<LabeledDataset> domains;
    for (int d = 0; d < num_domains; ++d)
        domains.push_back(make_synthetic_dataset(num_classes, samples_per_class, image_shape,
                                                 derive_seed(seed, "domain-data",
                                                             static_cast<uint64_t>(d)),
                                                 d, 0, noise));
    TaskStream s = build_domain_incremental_stream(domains);
    s.build_seed = seed;
    return s;
}

std::string stream_descriptor_json(const TaskStream& s) {
    json j;
    j["mode"] = s.mode == StreamMode::class_incremental ? "class_incremental"
                                                        : "domain_incremental";
    j["seed"] = s.build_seed;
    j["total_classes"] = s.total_classes;
    j["image_shape"] = s.image_shape;
    j["sessions"] = json::array();
    for (const SessionSpec& spec : s.sessions) {
        const SessionData& sd = s.session_data(spec.session_index);
        json js;
        js["index"] = spec.session_index;
        js["class_ids"] = spec.class_ids;
        js["data_ref"] = spec.data_ref;
        js["train_count"] = sd.train.size();
        js["test_count"] = sd.test.size();
        char buf[19];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(id_checksum(sd.train)));
        js["train_checksum"] = buf;
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(id_checksum(sd.test)));
        js["test_checksum"] = buf;
        j["sessions"].push_back(js);
    }
    return j.dump(2);
}

TaskStream merge_stream_for_joint(const TaskStream& s) {
    TaskStream out;
    out.mode = s.mode;
    out.total_classes = s.total_classes;
    out.build_seed = s.build_seed;
    out.image_shape = s.image_shape;
    SessionSpec spec;
    spec.session_index = 1;
    spec.data_ref = "joint";
    std::vector<char> seen(static_cast<size_t>(s.total_classes), 0);
    SessionData merged;
    for (int j = 1; j <= s.num_sessions(); ++j) {
        for (int c : s.sessions[static_cast<size_t>(j - 1)].class_ids)
            seen[static_cast<size_t>(c)] = 1;
        const SessionData& sd = s.session_data(j);
        merged.train.insert(merged.train.end(), sd.train.begin(), sd.train.end());
        merged.test.insert(merged.test.end(), sd.test.begin(), sd.test.end());
    }
    for (int c = 0; c < s.total_classes; ++c)
        if (seen[static_cast<size_t>(c)]) spec.class_ids.push_back(c);
    out.sessions.push_back(std::move(spec));
    out.data = std::make_shared<std::vector<SessionData>>(
        std::vector<SessionData>{std::move(merged)});
    return out;
}

} // namespace itcl
