#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ablab/config.hpp"
#include "ablab/report.hpp"

namespace ablab {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
    std::string config_hash;
    std::string pretrain_hash;
    std::string tool_version = kToolVersion;
    bool baseline_from_cache = false;
    std::vector<std::string> artifacts;  // relative to the output directory
    std::string started;
    std::string finished;
    std::vector<std::pair<std::string, double>> stage_seconds;

    nlohmann::json to_json() const;
};

// A pipeline stage failed. Logs gathered so far are on disk.
struct StageError : std::runtime_error {
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error("stage '" + stage_name + "' failed: " + what), stage(std::move(stage_name)) {}
    std::string stage;
};

struct MethodRun {
    Method method = Method::ModelBased;
    Denoiser ablated;
    TrainingLog log;
    EvalReport report;
};

struct PipelineResult {
    RunManifest manifest;
    Denoiser baseline;
    std::vector<MethodRun> runs;
    std::optional<MethodComparison> comparison;
};

using ProgressFn = std::function<void(const std::string&)>;

// Stage sub-seeds derived from the master seed.
std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& stage);

// The baseline for `cfg`: loaded from the cache when present, otherwise
// pretrained and stored there.
Denoiser obtain_baseline(const ExperimentConfig& cfg, bool* from_cache = nullptr, const ProgressFn& progress = {});

// Scores, leakage, far-concept deltas and (for trademark targets) glyph and
// object detail for one baseline/ablated pair.
EvalReport evaluate(const ExperimentConfig& cfg, const Denoiser& baseline, const Denoiser& ablated,
                    const NoiseSchedule& sched);

// pretrain → ablate → evaluate → report, writing every artifact under
// cfg.output_dir.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const ProgressFn& progress = {});

}  // namespace ablab
