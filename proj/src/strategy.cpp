#include "itcl/strategy.hpp"

#include "itcl/errors.hpp"

namespace itcl {

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::none: return "none";
        case StrategyKind::bias_tuning: return "bias_tuning";
        case StrategyKind::ft1: return "ft1";
        case StrategyKind::ft2: return "ft2";
        case StrategyKind::it_pad: return "it_pad";
        case StrategyKind::it_add: return "it_add";
        case StrategyKind::it_pad_plus_bias: return "it_pad_plus_bias";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(const std::string& s) {
    if (s == "none") return StrategyKind::none;
    if (s == "bias_tuning") return StrategyKind::bias_tuning;
    if (s == "ft1") return StrategyKind::ft1;
    if (s == "ft2") return StrategyKind::ft2;
    if (s == "it_pad") return StrategyKind::it_pad;
    if (s == "it_add") return StrategyKind::it_add;
    if (s == "it_pad_plus_bias") return StrategyKind::it_pad_plus_bias;
    throw ConfigInvalid("unknown strategy kind '" + s + "'");
}

std::string to_string(RegularizerKind k) {
    switch (k) {
        case RegularizerKind::none: return "none";
        case RegularizerKind::lwf: return "lwf";
        case RegularizerKind::lwm: return "lwm";
        case RegularizerKind::ewc: return "ewc";
        case RegularizerKind::path_integral: return "path_integral";
    }
    return "?";
}

RegularizerKind regularizer_kind_from_string(const std::string& s) {
    if (s == "none") return RegularizerKind::none;
    if (s == "lwf") return RegularizerKind::lwf;
    if (s == "lwm") return RegularizerKind::lwm;
    if (s == "ewc") return RegularizerKind::ewc;
    if (s == "path_integral") return RegularizerKind::path_integral;
    throw ConfigInvalid("unknown regularizer kind '" + s + "'");
}

void TuningStrategy::validate(StreamMode stream_mode) const {
    if (regularizer.kind != RegularizerKind::none && !is_ft())
        throw ConfigInvalid("regularizers attach only to ft1/ft2 strategies, not " +
                            to_string(kind));
    if ((regularizer.kind == RegularizerKind::lwf || regularizer.kind == RegularizerKind::lwm) &&
        stream_mode == StreamMode::domain_incremental)
        throw IncompatibleStrategy(to_string(regularizer.kind) +
                                   " does not fit the domain-incremental setting");
    if (transform_mode == TransformMode::per_task && !uses_transform())
        throw ConfigInvalid("per-task transforms require an it_* strategy");
    if (uses_transform()) {
        if (kind == StrategyKind::it_add && transform.kind != TransformKind::add)
            throw ConfigInvalid("it_add requires transform kind 'add'");
        if (kind != StrategyKind::it_add && transform.kind == TransformKind::add)
            throw ConfigInvalid(to_string(kind) + " requires a pad transform kind");
        if (transform.kind != TransformKind::add && transform.thickness < 1)
            throw ConfigInvalid("frame thickness must be >= 1");
    }
    if (regularizer.kind != RegularizerKind::none) {
        if (regularizer.lambda < 0 || regularizer.temperature <= 0 ||
            regularizer.alpha < 0 || regularizer.alpha > 1 || regularizer.damping < 0)
            throw ConfigInvalid("regularizer hyperparameters out of range");
    }
}

} // namespace itcl
