#pragma once

#include <memory>
#include <string>
#include <vector>

#include "itcl/incremental_head.hpp" // StreamMode
#include "itcl/tensor.hpp"

namespace itcl {

enum class Split { unspecified, train, test };

struct Sample {
    Tensor image; // C x H x W, already in normalized space
    int label = -1;
    int id = -1; // unique within the owning dataset / stream
    Split split = Split::unspecified;
};

struct LabeledDataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;
    std::string source_id;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    void validate() const; // label range + uniform image shape
};

struct SessionSpec {
    int session_index = 0;         // 1-based
    std::vector<int> class_ids;    // sorted global ids active in this session
    std::string data_ref;
};

struct SessionData {
    std::vector<Sample> train, test;
};

// Ordered task sessions with pairwise-disjoint data. Immutable once built;
// safe to share across threads.
struct TaskStream {
    StreamMode mode = StreamMode::class_incremental;
    std::vector<SessionSpec> sessions;
    int total_classes = 0;
    uint64_t build_seed = 0;
    std::shared_ptr<const std::vector<SessionData>> data;
    std::vector<int> image_shape; // C,H,W

    int num_sessions() const { return static_cast<int>(sessions.size()); }
    const SessionData& session_data(int j) const; // 1-based
};

// Seeded random class permutation, chunked into num_tasks equal parts.
TaskStream build_class_incremental_stream(const LabeledDataset& dataset, int num_tasks,
                                          uint64_t shuffle_seed);

// One session per domain; all domains must share one label space.
TaskStream build_domain_incremental_stream(const std::vector<LabeledDataset>& domains);

// Deterministic desk-scale fixture: class-conditional structured patterns
// plus Gaussian noise, 80/20 train/test per class.
TaskStream make_synthetic_stream(int num_tasks, int classes_per_task, int samples_per_class,
                                 const std::vector<int>& image_shape, uint64_t seed,
                                 double noise = 0.3);

// Synthetic dataset buildingblock used by the stream makers and the tests.
// `domain_style` selects a deterministic appearance shift (0 = base domain).
LabeledDataset make_synthetic_dataset(int num_classes, int samples_per_class,
                                      const std::vector<int>& image_shape, uint64_t seed,
                                      int domain_style = 0, int label_offset = 0,
                                      double noise = 0.3);

// FIVEDS-style stream: disjoint class ranges, one source domain per session.
TaskStream make_synthetic_multisource_stream(int num_domains, int classes_per_task,
                                             int samples_per_class,
                                             const std::vector<int>& image_shape,
                                             uint64_t seed, double noise = 0.3);

// Domain-incremental synthetic stream: same classes, shifted appearance.
TaskStream make_synthetic_domain_incremental_stream(int num_domains, int num_classes,
                                                    int samples_per_class,
                                                    const std::vector<int>& image_shape,
                                                    uint64_t seed, double noise = 0.3);

// JSON stream descriptor: mode, seed, per-session class ids, sample-count
// checksums. Used to persist/verify the protocol of a run.
std::string stream_descriptor_json(const TaskStream& s);

// Collapse all sessions into one joint-learning session over every class.
TaskStream merge_stream_for_joint(const TaskStream& s);

} // namespace itcl
