#include "itcl/io/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace itcl::io {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'I', 'T', 'C', 'L', 'C', 'K', 'P', 'T'};
}

void Checkpoint::put(const std::string& name, std::vector<int> shape,
                     std::vector<double> data) {
    if (Tensor::numel_of(shape) != static_cast<int64_t>(data.size()))
        throw ShapeMismatch("checkpoint entry '" + name + "' shape/data mismatch");
    entries[name] = {std::move(shape), std::move(data)};
}

const std::vector<double>& Checkpoint::get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw CheckpointMissing("entry '" + name + "'");
    return it->second.second;
}

const std::vector<int>& Checkpoint::shape(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw CheckpointMissing("entry '" + name + "'");
    return it->second.first;
}

void Checkpoint::save(const std::string& path) const {
    json header;
    header["meta"] = meta;
    json dir = json::object();
    uint64_t offset = 0;
    for (const auto& [name, entry] : entries) {
        dir[name] = {{"offset", offset}, {"shape", entry.first}};
        offset += entry.second.size();
    }
    header["tensors"] = dir;
    const std::string htxt = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(kMagic, 8);
    const uint64_t hlen = htxt.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
    for (const auto& [name, entry] : entries)
        f.write(reinterpret_cast<const char*>(entry.second.data()),
                static_cast<std::streamsize>(entry.second.size() * sizeof(double)));
    if (!f) throw IoError("short write to '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointMissing("'" + path + "' not readable");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("'" + path + "' is not a checkpoint file");
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string htxt(hlen, '\0');
    f.read(htxt.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw IoError("truncated checkpoint header in '" + path + "'");
    json header = json::parse(htxt);

    Checkpoint c;
    c.meta = header.value("meta", json::object());
    for (auto& [name, info] : header["tensors"].items()) {
        std::vector<int> shape = info["shape"].get<std::vector<int>>();
        std::vector<double> data(static_cast<size_t>(Tensor::numel_of(shape)));
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!f) throw IoError("truncated tensor '" + name + "' in '" + path + "'");
        c.entries[name] = {std::move(shape), std::move(data)};
    }
    return c;
}

// ---------------------------------------------------------------------------
// assembly / backbone state
// ---------------------------------------------------------------------------

namespace {

json backbone_meta(const Backbone& b) {
    return {{"variant", b.cfg.variant},
            {"input_side", b.cfg.input_side},
            {"in_channels", b.cfg.in_channels},
            {"bn_policy", b.cfg.bn_policy == nn::BnPolicy::running ? "running"
                                                                   : "frozen_pretrained"},
            {"last_block", b.cfg.last_block},
            {"last_two_blocks", b.cfg.last_two_blocks},
            {"pretrained_loaded", b.pretrained_loaded}};
}

BackboneConfig backbone_cfg_from_meta(const json& m) {
    BackboneConfig cfg;
    cfg.variant = m.at("variant").get<std::string>();
    cfg.input_side = m.at("input_side").get<int>();
    cfg.in_channels = m.at("in_channels").get<int>();
    cfg.bn_policy = m.at("bn_policy").get<std::string>() == "running"
                        ? nn::BnPolicy::running
                        : nn::BnPolicy::frozen_pretrained;
    cfg.last_block = m.at("last_block").get<std::vector<std::string>>();
    cfg.last_two_blocks = m.at("last_two_blocks").get<std::vector<std::string>>();
    return cfg;
}

void put_params_and_buffers(Checkpoint& c, nn::ParamRefs params, nn::BufferRefs buffers) {
    for (auto& [name, p] : params) c.put(name, p->value.shape, p->value.data);
    for (auto& [name, b] : buffers) c.put(name, b->shape, b->data);
}

void fill_params_and_buffers(const Checkpoint& c, nn::ParamRefs params, nn::BufferRefs buffers) {
    for (auto& [name, p] : params) {
        const auto& data = c.get(name);
        if (data.size() != p->value.data.size())
            throw ShapeMismatch("checkpoint entry '" + name + "' has wrong size");
        p->value.data = data;
    }
    for (auto& [name, b] : buffers) {
        const auto& data = c.get(name);
        if (data.size() != b->data.size())
            throw ShapeMismatch("checkpoint entry '" + name + "' has wrong size");
        b->data = data;
    }
}

} // namespace

void save_backbone(const std::string& path, Backbone& b) {
    Checkpoint c;
    c.meta = {{"kind", "backbone"}, {"backbone", backbone_meta(b)}};
    nn::ParamRefs params;
    nn::BufferRefs buffers;
    b.collect(params);
    b.collect_buffers(buffers);
    put_params_and_buffers(c, params, buffers);
    c.save(path);
}

Backbone load_backbone(const std::string& path) {
    const Checkpoint c = Checkpoint::load(path);
    Backbone b = Backbone::make(backbone_cfg_from_meta(c.meta.at("backbone")), 0);
    nn::ParamRefs params;
    nn::BufferRefs buffers;
    b.collect(params);
    b.collect_buffers(buffers);
    fill_params_and_buffers(c, params, buffers);
    b.pretrained_loaded = c.meta.at("backbone").value("pretrained_loaded", true);
    return b;
}

void save_assembly(const std::string& path, Assembly& a, const json& extra_meta) {
    Checkpoint c;
    json strat = {{"kind", to_string(a.strategy.kind)},
                  {"transform_mode",
                   a.strategy.transform_mode == TransformMode::shared ? "shared" : "per_task"},
                  {"regularizer", to_string(a.strategy.regularizer.kind)}};
    if (a.uses_transform()) {
        const TransformConfig& t = a.strategy.transform;
        strat["transform"] = {{"kind", to_string(t.kind)},
                              {"thickness", t.thickness},
                              {"side", t.side},
                              {"channels", t.channels},
                              {"insertion_point", t.insertion_point},
                              {"freeze_after_first_task", t.freeze_after_first_task},
                              {"interpolation",
                               t.interpolation == Interp::bilinear ? "bilinear" : "nearest"}};
    }
    json transforms = json::array();
    for (const auto& t : a.transforms) transforms.push_back(t.owner_task);

    json slices = json::array();
    for (const auto& s : a.head.slices) slices.push_back(s);

    c.meta = {{"kind", "assembly"},
              {"backbone", backbone_meta(a.backbone)},
              {"total_classes", a.head.total_classes},
              {"head_mode",
               a.head.mode == StreamMode::class_incremental ? "class_incremental"
                                                            : "domain_incremental"},
              {"slices", slices},
              {"strategy", strat},
              {"transform_owners", transforms},
              {"active_transform", a.active_transform},
              {"seed", a.seed},
              {"extra", extra_meta}};

    nn::ParamRefs params;
    for (auto& [name, p] : a.named_params()) params.emplace_back(name, p);
    put_params_and_buffers(c, params, a.named_buffers());
    c.save(path);
}

Assembly load_assembly(const std::string& path) {
    const Checkpoint c = Checkpoint::load(path);
    if (c.meta.value("kind", "") != "assembly")
        throw IoError("'" + path + "' is not an assembly checkpoint");

    Backbone bb = Backbone::make(backbone_cfg_from_meta(c.meta.at("backbone")), 0);
    bb.pretrained_loaded = c.meta.at("backbone").value("pretrained_loaded", false);

    TuningStrategy s;
    const json& strat = c.meta.at("strategy");
    s.kind = strategy_kind_from_string(strat.at("kind").get<std::string>());
    s.transform_mode = strat.at("transform_mode").get<std::string>() == "shared"
                           ? TransformMode::shared
                           : TransformMode::per_task;
    s.regularizer.kind = regularizer_kind_from_string(strat.at("regularizer").get<std::string>());
    if (strat.contains("transform")) {
        const json& t = strat.at("transform");
        s.transform.kind = transform_kind_from_string(t.at("kind").get<std::string>());
        s.transform.thickness = t.at("thickness").get<int>();
        s.transform.side = t.at("side").get<int>();
        s.transform.channels = t.at("channels").get<int>();
        s.transform.insertion_point = t.at("insertion_point").get<std::string>();
        s.transform.freeze_after_first_task = t.at("freeze_after_first_task").get<bool>();
        s.transform.interpolation = t.at("interpolation").get<std::string>() == "bilinear"
                                        ? Interp::bilinear
                                        : Interp::nearest;
    }

    Assembly a = Assembly::assemble(std::move(bb), c.meta.at("total_classes").get<int>(), s,
                                    c.meta.value("seed", static_cast<uint64_t>(0)));
    a.head.mode = c.meta.at("head_mode").get<std::string>() == "class_incremental"
                      ? StreamMode::class_incremental
                      : StreamMode::domain_incremental;
    for (const auto& slice : c.meta.at("slices"))
        a.head.register_session(a.head.sessions_registered() + 1, slice.get<std::vector<int>>());

    a.transforms.clear();
    for (const auto& owner : c.meta.at("transform_owners"))
        a.transforms.push_back(TransformParams::allocate(a.strategy.transform, owner.get<int>()));
    a.active_transform = c.meta.at("active_transform").get<int>();

    nn::ParamRefs params;
    for (auto& [name, p] : a.named_params()) params.emplace_back(name, p);
    fill_params_and_buffers(c, params, a.named_buffers());
    a.apply_trainable_flags();
    return a;
}

} // namespace itcl::io
