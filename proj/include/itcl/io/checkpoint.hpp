#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itcl/assembly.hpp"

namespace itcl::io {

// Single-archive checkpoint: a JSON header (meta + tensor directory) followed
// by raw little-endian doubles. Key names are stable across sessions so
// regularizer anchors can be matched after a reload.
struct Checkpoint {
    nlohmann::json meta;
    std::map<std::string, std::pair<std::vector<int>, std::vector<double>>> entries;

    void put(const std::string& name, std::vector<int> shape, std::vector<double> data);
    bool has(const std::string& name) const { return entries.count(name) > 0; }
    const std::vector<double>& get(const std::string& name) const;
    const std::vector<int>& shape(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// Full model state: named parameter groups, strategy descriptor, batch-norm
// buffers, head slice registry, transform bank.
void save_assembly(const std::string& path, Assembly& a,
                   const nlohmann::json& extra_meta = nlohmann::json::object());
Assembly load_assembly(const std::string& path);

// Backbone-only checkpoint (the pretraining artifact).
void save_backbone(const std::string& path, Backbone& b);
Backbone load_backbone(const std::string& path);

} // namespace itcl::io
