#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "xsim/config.hpp"
#include "xsim/model.hpp"
#include "xsim/tensor.hpp"

// Checkpoint container (little-endian):
//   bytes 0..7   magic "XSIMCKP1"
//   bytes 8..15  uint64 header length N
//   N bytes      JSON header: format version, kind, embedded config text,
//                array directory [{name, shape}, ...]
//   payload      raw IEEE-754 doubles, arrays back to back in directory order

namespace xsim {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'X', 'S', 'I', 'M', 'C', 'K', 'P', '1'};
constexpr int kFormatVersion = 1;

void write_bytes(std::ofstream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("incompatible checkpoint: write failed");
}

void read_bytes(std::ifstream& in, void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
        throw std::runtime_error("incompatible checkpoint: truncated file");
    }
}

void write_container(const std::filesystem::path& path, const json& header,
                     const std::vector<const Tensor*>& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("file not found: " + path.string());
    const std::string head = header.dump();
    const uint64_t head_len = head.size();
    write_bytes(out, kMagic, sizeof(kMagic));
    write_bytes(out, &head_len, sizeof(head_len));
    write_bytes(out, head.data(), head.size());
    for (const Tensor* t : payload) {
        write_bytes(out, t->data.data(), t->numel() * sizeof(double));
    }
}

struct Container {
    json header;
    std::vector<std::pair<std::string, Tensor>> arrays;
};

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("file not found: " + path.string());

    char magic[8];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("incompatible checkpoint: bad magic");
    }
    uint64_t head_len = 0;
    read_bytes(in, &head_len, sizeof(head_len));
    if (head_len == 0 || head_len > (1u << 26)) {
        throw std::runtime_error("incompatible checkpoint: bad header length");
    }
    std::string head(head_len, '\0');
    read_bytes(in, head.data(), head.size());

    Container c;
    try {
        c.header = json::parse(head);
    } catch (const json::parse_error&) {
        throw std::runtime_error("incompatible checkpoint: bad header");
    }
    if (!c.header.contains("format") || c.header["format"].get<int>() != kFormatVersion) {
        throw std::runtime_error("incompatible checkpoint: unsupported format version");
    }

    for (const auto& entry : c.header.at("arrays")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        Tensor t = Tensor::zeros(shape);
        read_bytes(in, t.data.data(), t.numel() * sizeof(double));
        c.arrays.emplace_back(name, std::move(t));
    }
    return c;
}

json array_directory(const std::vector<ParamTensor*>& params) {
    json dir = json::array();
    for (const ParamTensor* p : params) {
        dir.push_back({{"name", p->name}, {"shape", p->value.shape}});
    }
    return dir;
}

}  // namespace

void save_model(const SiameseNetwork& model, const std::filesystem::path& path) {
    // Parameter collection only walks pointers; the model is not modified.
    auto& m = const_cast<SiameseNetwork&>(model);
    std::vector<ParamTensor*> all = m.params();
    std::vector<ParamTensor*> st = m.state();
    all.insert(all.end(), st.begin(), st.end());

    json header;
    header["format"] = kFormatVersion;
    header["kind"] = "model";
    header["config"] = serialize_config(model.config());
    header["arrays"] = array_directory(all);

    std::vector<const Tensor*> payload;
    payload.reserve(all.size());
    for (const ParamTensor* p : all) payload.push_back(&p->value);
    write_container(path, header, payload);
}

SiameseNetwork load_model(const std::filesystem::path& path) {
    Container c = read_container(path);
    if (!c.header.contains("kind") || c.header["kind"].get<std::string>() != "model") {
        throw std::runtime_error("incompatible checkpoint: not a model file");
    }

    ExperimentConfig cfg = parse_config(c.header.at("config").get<std::string>());
    // Skip pretrained initialization: every parameter is about to be replaced.
    cfg.backbone_weights.clear();
    SiameseNetwork model = SiameseNetwork::build(cfg);

    std::vector<ParamTensor*> all = model.params();
    std::vector<ParamTensor*> st = model.state();
    all.insert(all.end(), st.begin(), st.end());
    if (all.size() != c.arrays.size()) {
        throw std::runtime_error("incompatible checkpoint: parameter count mismatch");
    }
    for (ParamTensor* p : all) {
        const Tensor* found = nullptr;
        for (const auto& [name, value] : c.arrays) {
            if (name == p->name) {
                found = &value;
                break;
            }
        }
        if (!found) {
            throw std::runtime_error("incompatible checkpoint: no parameter " + p->name);
        }
        if (found->shape != p->value.shape) {
            throw std::runtime_error("incompatible checkpoint: shape mismatch for " + p->name);
        }
        p->value = *found;
    }
    return model;
}

SiameseNetwork load_model(const std::filesystem::path& path, const ExperimentConfig& expected) {
    SiameseNetwork model = load_model(path);
    const ExperimentConfig& got = model.config();
    if (got.backbone_id != expected.backbone_id || got.embedding_dim != expected.embedding_dim ||
        got.image_height != expected.image_height || got.image_width != expected.image_width ||
        got.target_layer != expected.target_layer) {
        throw std::runtime_error("incompatible checkpoint: architecture mismatch");
    }
    return model;
}

void save_named_arrays(const std::vector<std::pair<std::string, Tensor>>& arrays,
                       const std::filesystem::path& path) {
    json header;
    header["format"] = kFormatVersion;
    header["kind"] = "arrays";
    json dir = json::array();
    std::vector<const Tensor*> payload;
    for (const auto& [name, value] : arrays) {
        dir.push_back({{"name", name}, {"shape", value.shape}});
        payload.push_back(&value);
    }
    header["arrays"] = dir;
    write_container(path, header, payload);
}

std::vector<std::pair<std::string, Tensor>> load_named_arrays(const std::filesystem::path& path) {
    Container c = read_container(path);
    if (!c.header.contains("kind") || c.header["kind"].get<std::string>() != "arrays") {
        throw std::runtime_error("incompatible checkpoint: not an array file");
    }
    return std::move(c.arrays);
}

}  // namespace xsim
