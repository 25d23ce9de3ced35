#pragma once

#include <string>

#include "itcl/incremental_head.hpp"
#include "itcl/input_transforms.hpp"

namespace itcl {

enum class StrategyKind { none, bias_tuning, ft1, ft2, it_pad, it_add, it_pad_plus_bias };
enum class TransformMode { shared, per_task };

std::string to_string(StrategyKind k);
StrategyKind strategy_kind_from_string(const std::string& s);

enum class RegularizerKind { none, lwf, lwm, ewc, path_integral };
std::string to_string(RegularizerKind k);
RegularizerKind regularizer_kind_from_string(const std::string& s);

struct RegularizerConfig {
    RegularizerKind kind = RegularizerKind::none;
    double lambda = 1.0;          // penalty strength (default 5000 for ewc)
    double temperature = 2.0;     // LwF T
    double alpha = 0.5;           // EWC importance fusion
    double beta = 1.0, gamma = 1.0; // LwM weights
    double damping = 0.1;         // Path Integral ξ
    double lwf_weight = 1.0;      // distillation mixing weight in the session loss
    int fisher_max_samples = 256;
};

// Which parameters receive gradients. The head θ_ĉ is always trained; the
// kind adds backbone biases (bias_tuning), the last block (ft1), the last
// two blocks (ft2) or the transform parameters θ_g (it kinds).
struct TuningStrategy {
    StrategyKind kind = StrategyKind::none;
    TransformMode transform_mode = TransformMode::shared;
    TransformConfig transform;
    RegularizerConfig regularizer;

    bool uses_transform() const {
        return kind == StrategyKind::it_pad || kind == StrategyKind::it_add ||
               kind == StrategyKind::it_pad_plus_bias;
    }
    bool is_ft() const { return kind == StrategyKind::ft1 || kind == StrategyKind::ft2; }

    // Structural checks; throws ConfigInvalid / IncompatibleStrategy.
    void validate(StreamMode stream_mode) const;
};

} // namespace itcl
