#include "xsim/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace xsim {

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["command"] = manifest.command;
    j["config"] = serialize_config(manifest.config);
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [label, p] : manifest.inputs) inputs[label] = p;
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& [label, p] : manifest.outputs) outputs[label] = p;
    j["inputs"] = inputs;
    j["outputs"] = outputs;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("file not found: " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace xsim
