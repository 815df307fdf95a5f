#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "ablab/denoiser.hpp"

namespace ablab {

inline constexpr const char* kCheckpointFormat = "ablab-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { Io, Malformed, VersionMismatch, Truncated, ShapeMismatch };
    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// A checkpoint is a directory holding manifest.json (format tag, version,
// model sizes, and per-tensor name/shape/byte offset) and params.bin, the
// tensors as little-endian float64 in manifest order.
void save_checkpoint(const Denoiser& model, const std::filesystem::path& dir);
Denoiser load_checkpoint(const std::filesystem::path& dir);

}  // namespace ablab
