#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ablab/ablation.hpp"
#include "ablab/eval.hpp"
#include "ablab/pretrain.hpp"

namespace ablab {

struct ScheduleConfig {
    std::size_t steps = 100;
    double beta_min = 1e-3;
    double beta_max = 0.2;
};

struct EvalConfig {
    std::size_t samples = 500;
    std::vector<Prompt> surrounding;
    std::vector<Prompt> far;
    std::vector<Prompt> synonyms;
    // Object-part alternatives for trademark scoring.
    std::vector<Prompt> object_alternatives;
};

struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t seed = 0;
    // Seeds pretraining instead of `seed` when set, so several master seeds
    // can share one baseline.
    std::optional<std::uint64_t> pretrain_seed;
    std::filesystem::path vocabulary_path;
    Vocabulary vocab;
    std::string vocabulary_digest;  // hash of the vocabulary file text
    std::filesystem::path output_dir = "runs/default";
    std::filesystem::path cache_dir;  // empty: <output_dir>/cache
    ScheduleConfig schedule;
    DenoiserConfig model;
    PretrainConfig pretrain;
    AblationConfig ablation;  // seed is filled in per run
    // Methods to run; two entries trigger the method comparison.
    std::vector<Method> methods{Method::ModelBased};
    EvalConfig eval;

    // Canonical JSON of every resolved setting (vocabulary contents included).
    std::string canonical() const;
    std::string hash() const;
    // Hash over the settings pretraining depends on.
    std::string pretrain_hash() const;
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(std::vector<std::string> errs);
    std::vector<std::string> errors;
};

// Parses and validates; every problem is reported, each prefixed with its
// config path (e.g. "ablation.target").
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& yaml_text, const std::filesystem::path& base_dir);

// Candidate set shared by probes and evaluation: target, anchor,
// surrounding and far prompts.
std::vector<LabeledConcept> labeled_concepts(const ExperimentConfig& cfg);

// 64-bit FNV-1a in hex.
std::string hash_hex(const std::string& text);

}  // namespace ablab
