#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "xsim/config.hpp"

namespace xsim {

inline constexpr const char* kVersion = "0.1.0";

// What a command ran with and what it produced; written next to the outputs.
// Reruns with identical inputs produce byte-identical manifests, so elapsed
// time deliberately stays out of it.
struct RunManifest {
    std::string command;
    ExperimentConfig config;
    std::vector<std::pair<std::string, std::string>> inputs;   // label -> path
    std::vector<std::pair<std::string, std::string>> outputs;  // label -> path
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace xsim
