#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ablab/eval.hpp"
#include "json.hpp"

namespace ablab {

// Everything one pipeline run reports, keyed by ablation method name.
struct ReportBundle {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, EvalReport>> reports;
    std::vector<std::pair<std::string, TrainingLog>> logs;
    std::optional<MethodComparison> comparison;
};

nlohmann::json score_json(const AlignmentScore& s);
nlohmann::json report_json(const EvalReport& r);
nlohmann::json log_json(const TrainingLog& log);
nlohmann::json comparison_json(const MethodComparison& c);

// Shortest text that reads back to the same double.
std::string format_number(double v);

// Flat table: concept, model-tag, score-posterior, score-raw, stderr, n.
std::string scores_csv(const EvalReport& r);
// step, loss, probe (empty when not probed). Wall-clock time is left out so
// the file is reproducible.
std::string training_csv(const TrainingLog& log);

// Probe score against step, one line per method.
std::string probe_chart_svg(const std::vector<std::pair<std::string, TrainingLog>>& logs);
// Baseline and ablated posterior score per concept.
std::string score_bars_svg(const EvalReport& r, const std::string& title);

// Writes report.json, per-method CSV tables and SVG charts under `outdir`.
// Returns the written paths relative to `outdir`.
std::vector<std::string> emit_reports(const ReportBundle& bundle, const std::filesystem::path& outdir);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ablab
