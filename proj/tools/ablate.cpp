#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "ablab/checkpoint.hpp"
#include "ablab/gradcheck_suite.hpp"
#include "ablab/pipeline.hpp"

using namespace ablab;

namespace {

int fail(const std::string& stage, const std::string& what) {
    std::cerr << "ablate: stage '" << stage << "' failed: " << what << "\n";
    return 1;
}

void progress(const std::string& msg) { std::cerr << msg << "\n"; }

int cmd_run(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg;
    try {
        cfg = parse_config(config);
    } catch (const std::exception& e) {
        return fail("config", e.what());
    }
    if (!out.empty()) cfg.output_dir = out;
    if (seed) cfg.seed = *seed;
    try {
        const PipelineResult res = run_pipeline(cfg, progress);
        for (const auto& run : res.runs) {
            const auto [b, a] = run.report.pair_for(cfg.ablation.target);
            std::printf("%s-based: target alignment %.3f -> %.3f\n", method_name(run.method), b->score.posterior,
                        a->score.posterior);
        }
        if (res.comparison) std::printf("method comparison: %s\n", verdict_name(res.comparison->verdict));
        std::printf("artifacts in %s\n", cfg.output_dir.string().c_str());
    } catch (const StageError& e) {
        return fail(e.stage, e.what());
    }
    return 0;
}

int cmd_eval(const std::string& config, const std::string& baseline, const std::string& ablated, const std::string& out) {
    ExperimentConfig cfg;
    try {
        cfg = parse_config(config);
    } catch (const std::exception& e) {
        return fail("config", e.what());
    }
    Denoiser b, a;
    try {
        b = load_checkpoint(baseline);
        a = load_checkpoint(ablated);
    } catch (const std::exception& e) {
        return fail("load", e.what());
    }
    try {
        const NoiseSchedule sched = build_schedule(cfg.schedule.steps, cfg.schedule.beta_min, cfg.schedule.beta_max);
        ReportBundle bundle;
        bundle.config_hash = cfg.hash();
        bundle.seed = cfg.seed;
        bundle.reports.emplace_back("external", evaluate(cfg, b, a, sched));
        const std::filesystem::path dir = out.empty() ? cfg.output_dir / "eval" : std::filesystem::path(out);
        for (const auto& f : emit_reports(bundle, dir)) std::printf("%s\n", (dir / f).string().c_str());
    } catch (const std::exception& e) {
        return fail("eval", e.what());
    }
    return 0;
}

int cmd_gradcheck() {
    bool ok = true;
    auto rows = op_gradcheck_suite();
    auto losses = loss_gradcheck_suite();
    rows.insert(rows.end(), losses.begin(), losses.end());
    for (const auto& r : rows) {
        std::printf("%-4s %-36s max rel error %.3e (< %.0e, %zu entries)\n", r.pass() ? "ok" : "FAIL", r.name.c_str(),
                    r.max_rel_error, r.threshold, r.entries);
        ok = ok && r.pass();
    }
    return ok ? 0 : fail("gradcheck", "finite differences disagree with the analytic gradient");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concept ablation laboratory"};
    app.require_subcommand(1);

    std::string config, out, baseline, ablated;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "pretrain, ablate, evaluate and write reports");
    run->add_option("--config", config, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory (overrides the config)");
    run->add_option("--seed", seed, "master seed (overrides the config)");

    auto* ev = app.add_subcommand("eval", "evaluate an ablated checkpoint against a baseline");
    ev->add_option("--config", config, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
    ev->add_option("--baseline", baseline, "baseline checkpoint directory")->required();
    ev->add_option("--ablated", ablated, "ablated checkpoint directory")->required();
    ev->add_option("--out", out, "output directory");

    app.add_subcommand("gradcheck", "finite-difference checks of every op and both ablation losses");

    CLI11_PARSE(app, argc, argv);
    try {
        if (app.got_subcommand("run")) return cmd_run(config, out, seed);
        if (app.got_subcommand("eval")) return cmd_eval(config, baseline, ablated, out);
        return cmd_gradcheck();
    } catch (const std::exception& e) {
        return fail("unknown", e.what());
    }
}
