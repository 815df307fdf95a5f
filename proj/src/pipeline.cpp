#include "ablab/pipeline.hpp"

#include <chrono>
#include <ctime>

#include "ablab/checkpoint.hpp"

namespace ablab {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void say(const ProgressFn& progress, const std::string& msg) {
    if (progress) progress(msg);
}

fs::path cache_root(const ExperimentConfig& cfg) {
    return cfg.cache_dir.empty() ? cfg.output_dir / "cache" : cfg.cache_dir;
}

std::vector<std::string> checkpoint_files(const std::string& rel) {
    return {rel + "/manifest.json", rel + "/params.bin"};
}

}  // namespace

json RunManifest::to_json() const {
    json stages = json::object();
    for (const auto& [s, secs] : stage_seconds) stages[s] = secs;
    return {{"config_hash", config_hash},
            {"pretrain_hash", pretrain_hash},
            {"tool_version", tool_version},
            {"baseline_from_cache", baseline_from_cache},
            {"artifacts", artifacts},
            {"started", started},
            {"finished", finished},
            {"stage_seconds", stages}};
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& stage) {
    if (stage == "pretrain" && cfg.pretrain_seed) return derive_seed(*cfg.pretrain_seed, stage);
    return derive_seed(cfg.seed, stage);
}

Denoiser obtain_baseline(const ExperimentConfig& cfg, bool* from_cache, const ProgressFn& progress) {
    const fs::path dir = cache_root(cfg) / ("baseline-" + cfg.pretrain_hash());
    if (from_cache) *from_cache = false;
    if (fs::exists(dir / "manifest.json")) {
        try {
            Denoiser m = load_checkpoint(dir);
            if (m.config() == cfg.model) {
                if (from_cache) *from_cache = true;
                say(progress, "baseline loaded from " + dir.string());
                return m;
            }
            say(progress, "cached baseline has a different architecture, pretraining again");
        } catch (const CheckpointError& e) {
            say(progress, std::string("cached baseline unreadable (") + e.what() + "), pretraining again");
        }
    }
    say(progress, "pretraining baseline on " + std::to_string(cfg.pretrain.concepts.size()) + " concepts, " +
                      std::to_string(cfg.pretrain.steps) + " steps");
    const NoiseSchedule sched = build_schedule(cfg.schedule.steps, cfg.schedule.beta_min, cfg.schedule.beta_max);
    Denoiser m = pretrain_baseline(cfg.pretrain, cfg.model, cfg.vocab, sched, stage_seed(cfg, "pretrain"));
    // Written under a temporary name first so an interrupted run never
    // leaves a half-written cache entry behind.
    const fs::path tmp = dir.string() + ".partial";
    fs::remove_all(tmp);
    save_checkpoint(m, tmp);
    fs::remove_all(dir);
    fs::rename(tmp, dir);
    return m;
}

EvalReport evaluate(const ExperimentConfig& cfg, const Denoiser& baseline, const Denoiser& ablated,
                    const NoiseSchedule& sched) {
    const auto concepts = labeled_concepts(cfg);
    std::vector<Prompt> prompts;
    for (const auto& c : concepts) prompts.push_back(c.prompt);
    const CandidateSet cands = CandidateSet::full(cfg.vocab, prompts);
    const std::uint64_t seed = stage_seed(cfg, "eval");
    const std::size_t n = cfg.eval.samples;

    EvalReport rep = eval_suite(baseline, ablated, cfg.vocab, concepts, cands, sched, n, seed);
    rep.config_hash = cfg.hash();
    rep.seed = cfg.seed;
    if (!cfg.eval.synonyms.empty()) {
        for (ModelTag tag : {ModelTag::Baseline, ModelTag::Ablated}) {
            auto leaks = leakage_probe(tag == ModelTag::Baseline ? baseline : ablated, tag, cfg.vocab, cfg.eval.synonyms,
                                       cfg.ablation.target, cands, sched, n, seed);
            rep.leakage.insert(rep.leakage.end(), leaks.begin(), leaks.end());
        }
    }
    if (!cfg.eval.far.empty()) {
        std::vector<Prompt> reserved{cfg.ablation.target, cfg.ablation.anchor};
        reserved.insert(reserved.end(), cfg.eval.surrounding.begin(), cfg.eval.surrounding.end());
        rep.far = far_concept_report(baseline, ablated, cfg.vocab, cfg.eval.far, reserved, cands, sched, n, seed);
    }
    bool trademarked = false;
    for (auto id : cfg.ablation.target.tokens)
        if (cfg.vocab.referent(id).kind == TokenKind::Trademark) trademarked = true;
    if (trademarked && !cfg.eval.object_alternatives.empty()) {
        const auto tc = trademark_candidates(cfg.vocab, cfg.ablation.target, cfg.eval.object_alternatives);
        rep.trademark.push_back(trademark_detail(baseline, ModelTag::Baseline, cfg.ablation.target, tc, sched, n, seed));
        rep.trademark.push_back(trademark_detail(ablated, ModelTag::Ablated, cfg.ablation.target, tc, sched, n, seed));
    }
    return rep;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const ProgressFn& progress) {
    const fs::path out = cfg.output_dir;
    PipelineResult res;
    RunManifest& man = res.manifest;
    man.started = utc_now();
    man.config_hash = cfg.hash();
    man.pretrain_hash = cfg.pretrain_hash();

    ReportBundle bundle;
    bundle.config_hash = man.config_hash;
    bundle.seed = cfg.seed;
    std::string stage = "setup";
    auto clock = std::chrono::steady_clock::now();
    const auto begin = [&](const std::string& s) {
        stage = s;
        clock = std::chrono::steady_clock::now();
        say(progress, "[" + s + "]");
    };
    const auto end = [&] {
        man.stage_seconds.emplace_back(
            stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count());
    };

    try {
        fs::create_directories(out);
        write_text(out / "config.resolved.json", cfg.canonical() + "\n");
        man.artifacts.push_back("config.resolved.json");

        begin("pretrain");
        res.baseline = obtain_baseline(cfg, &man.baseline_from_cache, progress);
        save_checkpoint(res.baseline, out / "checkpoints/baseline");
        for (auto& f : checkpoint_files("checkpoints/baseline")) man.artifacts.push_back(f);
        end();

        const NoiseSchedule sched = build_schedule(cfg.schedule.steps, cfg.schedule.beta_min, cfg.schedule.beta_max);
        std::vector<Prompt> prompts;
        for (const auto& c : labeled_concepts(cfg)) prompts.push_back(c.prompt);
        const CandidateSet cands = CandidateSet::full(cfg.vocab, prompts);

        for (Method m : cfg.methods) {
            const std::string name = method_name(m);
            begin("ablate-" + name);
            AblationConfig acfg = cfg.ablation;
            acfg.method = m;
            acfg.seed = stage_seed(cfg, "ablation");
            MethodRun run;
            run.method = m;
            try {
                AblationResult ar = run_ablation(acfg, res.baseline, cfg.vocab, sched, &cands);
                run.ablated = std::move(ar.model);
                run.log = std::move(ar.log);
            } catch (const AblationDiverged& e) {
                bundle.logs.emplace_back(name, e.partial);
                throw;
            }
            bundle.logs.emplace_back(name, run.log);
            save_checkpoint(run.ablated, out / ("checkpoints/ablated-" + name));
            for (auto& f : checkpoint_files("checkpoints/ablated-" + name)) man.artifacts.push_back(f);
            end();

            begin("eval-" + name);
            run.report = evaluate(cfg, res.baseline, run.ablated, sched);
            bundle.reports.emplace_back(name, run.report);
            end();
            res.runs.push_back(std::move(run));
        }

        if (res.runs.size() == 2) {
            begin("compare");
            const auto& noise = res.runs[0].method == Method::NoiseBased ? res.runs[0] : res.runs[1];
            const auto& model = res.runs[0].method == Method::ModelBased ? res.runs[0] : res.runs[1];
            res.comparison = compare_methods(noise.log, model.log);
            bundle.comparison = res.comparison;
            end();
        }

        begin("report");
        for (auto& f : emit_reports(bundle, out)) man.artifacts.push_back(f);
        end();
    } catch (const std::exception& e) {
        // Keep whatever training logs exist so the failure can be inspected.
        try {
            for (const auto& [name, log] : bundle.logs) write_text(out / ("logs/training-" + name + ".csv"), training_csv(log));
            write_text(out / "failure.json", json({{"stage", stage}, {"error", e.what()}}).dump(2) + "\n");
        } catch (const std::exception&) {
        }
        throw StageError(stage, e.what());
    }

    man.finished = utc_now();
    man.artifacts.push_back("manifest.json");
    write_text(out / "manifest.json", man.to_json().dump(2) + "\n");
    return res;
}

}  // namespace ablab
