#include "ablab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace ablab {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void put_le(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

json config_to_json(const DenoiserConfig& c) {
    return {{"data_dim", c.data_dim},     {"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},
            {"attn_dim", c.attn_dim},     {"hidden_dim", c.hidden_dim}, {"head_hidden", c.head_hidden},
            {"time_freqs", c.time_freqs}, {"horizon", c.horizon}};
}

DenoiserConfig config_from_json(const json& j) {
    DenoiserConfig c;
    c.data_dim = j.at("data_dim").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.attn_dim = j.at("attn_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.head_hidden = j.at("head_hidden").get<std::size_t>();
    c.time_freqs = j.at("time_freqs").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    return c;
}

}  // namespace

void save_checkpoint(const Denoiser& model, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw CheckpointError(CheckpointError::Kind::Io, "cannot create " + dir.string() + ": " + ec.message());

    json tensors = json::array();
    std::string blob;
    for (const auto& [name, t] : model.params().values()) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}});
        for (double v : t.data()) put_le(blob, v);
    }
    json trainable = json::array();
    for (const auto& n : model.params().trainable()) trainable.push_back(n);
    json manifest = {{"format", kCheckpointFormat},
                     {"version", kCheckpointVersion},
                     {"dtype", "float64-le"},
                     {"model", config_to_json(model.config())},
                     {"tensors", tensors},
                     {"trainable", trainable},
                     {"blob_bytes", blob.size()}};

    std::ofstream m(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    std::ofstream b(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!m || !b) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint in " + dir.string());
    m << manifest.dump(2) << "\n";
    b.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!m || !b) throw CheckpointError(CheckpointError::Kind::Io, "write failed in " + dir.string());
}

Denoiser load_checkpoint(const fs::path& dir) {
    using Kind = CheckpointError::Kind;
    std::ifstream m(dir / "manifest.json", std::ios::binary);
    if (!m) throw CheckpointError(Kind::Io, "cannot open " + (dir / "manifest.json").string());
    json manifest;
    try {
        m >> manifest;
    } catch (const json::exception& e) {
        throw CheckpointError(Kind::Malformed, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (manifest.value("format", "") != kCheckpointFormat)
        throw CheckpointError(Kind::Malformed, "not an ablab checkpoint (format tag missing)");
    const int version = manifest.value("version", -1);
    if (version != kCheckpointVersion)
        throw CheckpointError(Kind::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                                         " is not supported (expected " +
                                                         std::to_string(kCheckpointVersion) + ")");

    std::ifstream b(dir / "params.bin", std::ios::binary);
    if (!b) throw CheckpointError(Kind::Io, "cannot open " + (dir / "params.bin").string());
    const std::string blob((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());

    DenoiserConfig cfg;
    ParamSet params;
    std::size_t declared = 0;
    try {
        cfg = config_from_json(manifest.at("model"));
        declared = manifest.at("blob_bytes").get<std::size_t>();
        if (blob.size() < declared)
            throw CheckpointError(Kind::Truncated, "parameter blob holds " + std::to_string(blob.size()) +
                                                       " bytes, manifest declares " + std::to_string(declared));
        if (blob.size() > declared)
            throw CheckpointError(Kind::ShapeMismatch, "parameter blob is larger than the manifest declares");
        std::size_t expected_offset = 0;
        for (const auto& entry : manifest.at("tensors")) {
            const auto name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::size_t>();
            if (offset != expected_offset)
                throw CheckpointError(Kind::ShapeMismatch, "tensor '" + name + "' offset disagrees with preceding shapes");
            const std::size_t bytes = shape_numel(shape) * 8;
            if (offset + bytes > declared)
                throw CheckpointError(Kind::ShapeMismatch, "tensor '" + name + "' shape " + shape_str(shape) +
                                                               " runs past the declared blob size");
            std::vector<double> data(shape_numel(shape));
            for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_le(blob.data() + offset + 8 * i);
            params.add(name, Tensor(shape, std::move(data)), false);
            expected_offset = offset + bytes;
        }
        if (expected_offset != declared)
            throw CheckpointError(Kind::ShapeMismatch, "tensor shapes cover " + std::to_string(expected_offset) +
                                                           " bytes but the blob declares " + std::to_string(declared));
        std::set<std::string> trainable;
        for (const auto& n : manifest.at("trainable")) trainable.insert(n.get<std::string>());
        params.set_trainable(trainable);
    } catch (const json::exception& e) {
        throw CheckpointError(Kind::Malformed, std::string("manifest field error: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(Kind::ShapeMismatch, e.what());
    }
    try {
        return Denoiser(cfg, std::move(params));
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(Kind::ShapeMismatch, e.what());
    }
}

}  // namespace ablab
