#include "ablab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ablab {

using json = nlohmann::json;

ConfigError::ConfigError(std::vector<std::string> errs)
    : std::runtime_error([&] {
          std::string msg = "invalid config:";
          for (const auto& e : errs) msg += "\n  " + e;
          return msg;
      }()),
      errors(std::move(errs)) {}

std::string hash_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

// Walks a YAML tree, collecting every problem instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;
    const Vocabulary* vocab = nullptr;

    void error(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

    // Flags keys the schema does not know.
    void known_keys(const YAML::Node& node, const std::string& path, std::set<std::string> keys) {
        if (!node || !node.IsMap()) return;
        for (const auto& kv : node) {
            const auto k = kv.first.as<std::string>();
            if (!keys.count(k)) error(path.empty() ? k : path + "." + k, "unknown key");
        }
    }

    YAML::Node section(const YAML::Node& root, const std::string& key) {
        YAML::Node n = root[key];
        if (n && !n.IsMap()) {
            error(key, "expected a mapping");
            return YAML::Node();
        }
        return n;
    }

    template <class T>
    void read(const YAML::Node& node, const std::string& key, const std::string& path, T& out) {
        if (!node || !node[key]) return;
        try {
            out = node[key].as<T>();
        } catch (const YAML::Exception&) {
            error(path, "expected " + type_name<T>());
        }
    }

    void count(const YAML::Node& node, const std::string& key, const std::string& path, std::size_t& out) {
        if (!node || !node[key]) return;
        long long v = 0;
        try {
            v = node[key].as<long long>();
        } catch (const YAML::Exception&) {
            error(path, "expected an integer");
            return;
        }
        if (v <= 0)
            error(path, "must be positive, got " + std::to_string(v));
        else
            out = static_cast<std::size_t>(v);
    }

    void positive(const std::string& path, double v) {
        if (!(v > 0)) error(path, "must be positive");
    }

    std::optional<Prompt> prompt(const YAML::Node& n, const std::string& path) {
        std::vector<std::string> names;
        try {
            if (n.IsScalar()) {
                std::istringstream in(n.as<std::string>());
                for (std::string w; in >> w;) names.push_back(w);
            } else if (n.IsSequence()) {
                for (const auto& e : n) names.push_back(e.as<std::string>());
            } else {
                error(path, "expected a prompt (token names separated by spaces)");
                return std::nullopt;
            }
        } catch (const YAML::Exception&) {
            error(path, "expected a prompt (token names separated by spaces)");
            return std::nullopt;
        }
        if (names.empty()) {
            error(path, "prompt is empty");
            return std::nullopt;
        }
        if (!vocab) return std::nullopt;
        bool ok = true;
        for (const auto& w : names)
            if (!vocab->has(w)) {
                error(path, "unknown token \"" + w + "\"");
                ok = false;
            }
        if (!ok) return std::nullopt;
        Prompt p = make_prompt(*vocab, names);
        try {
            validate_prompt(*vocab, p);
        } catch (const std::exception& e) {
            error(path, e.what());
            return std::nullopt;
        }
        return p;
    }

    std::optional<Prompt> required_prompt(const YAML::Node& node, const std::string& key, const std::string& path) {
        if (!node || !node[key]) {
            error(path, "is required");
            return std::nullopt;
        }
        return prompt(node[key], path);
    }

    void prompt_list(const YAML::Node& node, const std::string& key, const std::string& path,
                     std::vector<Prompt>& out) {
        if (!node || !node[key]) return;
        const YAML::Node list = node[key];
        if (!list.IsSequence()) {
            error(path, "expected a list of prompts");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < list.size(); ++i)
            if (auto p = prompt(list[i], path + "[" + std::to_string(i) + "]")) out.push_back(*p);
    }

private:
    template <class T>
    static std::string type_name() {
        if constexpr (std::is_same_v<T, bool>) return "true or false";
        if constexpr (std::is_floating_point_v<T>) return "a number";
        if constexpr (std::is_integral_v<T>) return "an integer";
        return "a string";
    }
};

void append_unique(std::vector<Prompt>& v, const Prompt& p) {
    if (std::find(v.begin(), v.end(), p) == v.end()) v.push_back(p);
}

json prompt_json(const Vocabulary& vocab, const Prompt& p) { return prompt_text(vocab, p); }

json prompts_json(const Vocabulary& vocab, const std::vector<Prompt>& ps) {
    json a = json::array();
    for (const auto& p : ps) a.push_back(prompt_json(vocab, p));
    return a;
}

json pretrain_json(const ExperimentConfig& c) {
    const auto& p = c.pretrain;
    return {{"steps", p.steps},
            {"batch_size", p.batch_size},
            {"learning_rate", p.learning_rate},
            {"final_lr_fraction", p.final_lr_fraction},
            {"ema_decay", p.ema_decay},
            {"context_probability", p.context_probability},
            {"concepts", prompts_json(c.vocab, p.concepts)}};
}

json model_json(const DenoiserConfig& m) {
    return {{"data_dim", m.data_dim},       {"vocab_size", m.vocab_size}, {"embed_dim", m.embed_dim},
            {"attn_dim", m.attn_dim},       {"hidden_dim", m.hidden_dim}, {"head_hidden", m.head_hidden},
            {"time_freqs", m.time_freqs},   {"horizon", m.horizon}};
}

json schedule_json(const ScheduleConfig& s) {
    return {{"steps", s.steps}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}};
}

}  // namespace

std::string ExperimentConfig::canonical() const {
    const auto& a = ablation;
    json methods_j = json::array();
    for (auto m : methods) methods_j.push_back(method_name(m));
    json j = {
        {"schema_version", schema_version},
        {"seed", seed},
        {"vocabulary", vocabulary_digest},
        {"schedule", schedule_json(schedule)},
        {"model", model_json(model)},
        {"pretrain", pretrain_json(*this)},
        {"ablation",
         {{"variant", variant_name(a.variant)},
          {"methods", methods_j},
          {"target", prompt_json(vocab, a.target)},
          {"anchor", prompt_json(vocab, a.anchor)},
          {"scope", scope_name(a.scope)},
          {"augmentation",
           {{"enabled", a.augmentation.enabled},
            {"jitter", a.augmentation.jitter},
            {"rescale", {a.augmentation.rescale_lo, a.augmentation.rescale_hi}}}},
          {"steps", a.steps},
          {"batch_size", a.batch_size},
          {"learning_rate", a.optimizer.learning_rate},
          {"adam", {a.optimizer.beta1, a.optimizer.beta2, a.optimizer.epsilon}},
          {"anchor_source", a.anchor_source == AnchorSource::Model ? "model" : "ground_truth"},
          {"fixed_anchor_pool", a.fixed_anchor_pool},
          {"anchor_pool_size", a.anchor_pool_size},
          {"logo_token", a.logo_token ? json(vocab.token(*a.logo_token).name) : json(nullptr)}}},
        {"eval",
         {{"samples", eval.samples},
          {"probe_interval", a.probe_interval},
          {"probe_samples", a.probe_samples},
          {"surrounding", prompts_json(vocab, eval.surrounding)},
          {"far", prompts_json(vocab, eval.far)},
          {"synonyms", prompts_json(vocab, eval.synonyms)},
          {"object_alternatives", prompts_json(vocab, eval.object_alternatives)}}}};
    j["pretrain"]["seed"] = pretrain_seed ? json(*pretrain_seed) : json(nullptr);
    return j.dump(2);
}

std::string ExperimentConfig::hash() const { return hash_hex(canonical()); }

std::string ExperimentConfig::pretrain_hash() const {
    json j = {{"seed", pretrain_seed.value_or(seed)},
              {"vocabulary", vocabulary_digest},
              {"schedule", schedule_json(schedule)},
              {"model", model_json(model)},
              {"pretrain", pretrain_json(*this)}};
    return hash_hex(j.dump());
}

std::vector<LabeledConcept> labeled_concepts(const ExperimentConfig& cfg) {
    std::vector<LabeledConcept> out{{"target", cfg.ablation.target}, {"anchor", cfg.ablation.anchor}};
    for (const auto& p : cfg.eval.surrounding) out.push_back({"surrounding", p});
    for (const auto& p : cfg.eval.far) out.push_back({"far", p});
    return out;
}

ExperimentConfig parse_config_text(const std::string& yaml_text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError({std::string("(file): not valid YAML: ") + e.what()});
    }
    if (!root.IsMap()) throw ConfigError({"(file): expected a mapping at the top level"});

    Reader r;
    ExperimentConfig c;
    r.known_keys(root, "", {"schema_version", "seed", "vocabulary", "output", "cache", "schedule", "model", "pretrain",
                            "ablation", "eval"});

    if (!root["schema_version"])
        r.error("schema_version", "is required");
    else {
        r.read(root, "schema_version", "schema_version", c.schema_version);
        if (c.schema_version != 1) r.error("schema_version", "unsupported version " + std::to_string(c.schema_version));
    }

    if (!root["seed"])
        r.error("seed", "is required; every run must be seeded");
    else
        r.read(root, "seed", "seed", c.seed);

    std::string vocab_rel;
    if (!root["vocabulary"])
        r.error("vocabulary", "is required");
    else
        r.read(root, "vocabulary", "vocabulary", vocab_rel);
    if (!vocab_rel.empty()) {
        c.vocabulary_path = base_dir / vocab_rel;
        std::ifstream in(c.vocabulary_path, std::ios::binary);
        if (!in) {
            r.error("vocabulary", "cannot open " + c.vocabulary_path.string());
        } else {
            std::stringstream ss;
            ss << in.rdbuf();
            try {
                c.vocab = Vocabulary::parse(ss.str());
                c.vocabulary_digest = hash_hex(ss.str());
                r.vocab = &c.vocab;
            } catch (const std::exception& e) {
                r.error("vocabulary", e.what());
            }
        }
    }

    std::string out_dir, cache_dir;
    r.read(root, "output", "output", out_dir);
    r.read(root, "cache", "cache", cache_dir);
    if (!out_dir.empty()) c.output_dir = out_dir;
    if (!cache_dir.empty()) c.cache_dir = cache_dir;

    // schedule
    const YAML::Node sch = r.section(root, "schedule");
    r.known_keys(sch, "schedule", {"steps", "beta_min", "beta_max"});
    r.count(sch, "steps", "schedule.steps", c.schedule.steps);
    r.read(sch, "beta_min", "schedule.beta_min", c.schedule.beta_min);
    r.read(sch, "beta_max", "schedule.beta_max", c.schedule.beta_max);
    r.positive("schedule.beta_min", c.schedule.beta_min);
    if (!(c.schedule.beta_max >= c.schedule.beta_min && c.schedule.beta_max < 1.0))
        r.error("schedule.beta_max", "must lie in [beta_min, 1)");

    // model
    const YAML::Node mod = r.section(root, "model");
    r.known_keys(mod, "model", {"embed_dim", "attn_dim", "hidden_dim", "head_hidden", "time_freqs"});
    r.count(mod, "embed_dim", "model.embed_dim", c.model.embed_dim);
    r.count(mod, "attn_dim", "model.attn_dim", c.model.attn_dim);
    r.count(mod, "hidden_dim", "model.hidden_dim", c.model.hidden_dim);
    r.count(mod, "time_freqs", "model.time_freqs", c.model.time_freqs);
    if (mod && mod["head_hidden"]) {
        long long v = -1;
        try {
            v = mod["head_hidden"].as<long long>();
        } catch (const YAML::Exception&) {
        }
        if (v < 0)
            r.error("model.head_hidden", "expected a non-negative integer");
        else
            c.model.head_hidden = static_cast<std::size_t>(v);
    }
    c.model.horizon = c.schedule.steps;
    if (r.vocab) {
        c.model.vocab_size = c.vocab.size();
        c.model.data_dim = c.vocab.data_dim();
    }

    // ablation
    const YAML::Node abl = r.section(root, "ablation");
    if (!abl) r.error("ablation", "is required");
    r.known_keys(abl, "ablation", {"variant", "methods", "target", "anchor", "scope", "learning_rate", "steps",
                                   "batch_size", "augmentation", "anchor_source", "fixed_anchor_pool",
                                   "anchor_pool_size", "logo_token"});
    AblationConfig& a = c.ablation;
    bool trademark = false;
    if (abl && abl["variant"]) {
        std::string v;
        r.read(abl, "variant", "ablation.variant", v);
        try {
            a.variant = parse_variant(v);
        } catch (const std::exception& e) {
            r.error("ablation.variant", e.what());
        }
        if (a.variant == Variant::Trademark) {
            trademark = true;
            a.variant = Variant::Instance;
        }
    }
    if (abl && abl["methods"]) {
        const YAML::Node ms = abl["methods"];
        c.methods.clear();
        if (!ms.IsSequence() || ms.size() == 0 || ms.size() > 2) {
            r.error("ablation.methods", "expected a list naming one or both of model, noise");
        } else {
            for (std::size_t i = 0; i < ms.size(); ++i) {
                try {
                    const Method m = parse_method(ms[i].as<std::string>());
                    if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end())
                        r.error("ablation.methods", "lists a method twice");
                    c.methods.push_back(m);
                } catch (const std::exception& e) {
                    r.error("ablation.methods[" + std::to_string(i) + "]", e.what());
                }
            }
        }
    }
    if (auto p = r.required_prompt(abl, "target", "ablation.target")) a.target = *p;
    if (auto p = r.required_prompt(abl, "anchor", "ablation.anchor")) a.anchor = *p;
    if (abl && abl["scope"]) {
        std::string s;
        r.read(abl, "scope", "ablation.scope", s);
        try {
            a.scope = parse_scope(s);
        } catch (const std::exception& e) {
            r.error("ablation.scope", e.what());
        }
    }
    a.optimizer.learning_rate = default_learning_rate(a.scope);
    r.read(abl, "learning_rate", "ablation.learning_rate", a.optimizer.learning_rate);
    r.positive("ablation.learning_rate", a.optimizer.learning_rate);
    if (abl && abl["steps"]) {
        long long v = -1;
        try {
            v = abl["steps"].as<long long>();
        } catch (const YAML::Exception&) {
        }
        if (v < 0)
            r.error("ablation.steps", "expected a non-negative integer");
        else
            a.steps = static_cast<std::size_t>(v);
    }
    r.count(abl, "batch_size", "ablation.batch_size", a.batch_size);
    if (abl && abl["augmentation"]) {
        const YAML::Node aug = abl["augmentation"];
        r.known_keys(aug, "ablation.augmentation", {"enabled", "jitter", "rescale"});
        r.read(aug, "enabled", "ablation.augmentation.enabled", a.augmentation.enabled);
        r.read(aug, "jitter", "ablation.augmentation.jitter", a.augmentation.jitter);
        if (aug["rescale"]) {
            std::vector<double> rs;
            r.read(aug, "rescale", "ablation.augmentation.rescale", rs);
            if (rs.size() != 2)
                r.error("ablation.augmentation.rescale", "expected [low, high]");
            else {
                a.augmentation.rescale_lo = rs[0];
                a.augmentation.rescale_hi = rs[1];
            }
        }
        try {
            a.augmentation.validate();
        } catch (const std::exception& e) {
            r.error("ablation.augmentation", e.what());
        }
    }
    if (abl && abl["anchor_source"]) {
        std::string s;
        r.read(abl, "anchor_source", "ablation.anchor_source", s);
        if (s == "model")
            a.anchor_source = AnchorSource::Model;
        else if (s == "ground_truth")
            a.anchor_source = AnchorSource::GroundTruth;
        else
            r.error("ablation.anchor_source", "expected model or ground_truth, got '" + s + "'");
    }
    r.read(abl, "fixed_anchor_pool", "ablation.fixed_anchor_pool", a.fixed_anchor_pool);
    r.count(abl, "anchor_pool_size", "ablation.anchor_pool_size", a.anchor_pool_size);
    if (abl && abl["logo_token"]) {
        std::string s;
        r.read(abl, "logo_token", "ablation.logo_token", s);
        if (r.vocab) {
            if (!c.vocab.has(s))
                r.error("ablation.logo_token", "unknown token \"" + s + "\"");
            else
                a.logo_token = c.vocab.id(s);
        }
    }
    if (trademark && !(abl && abl["logo_token"])) r.error("ablation.logo_token", "is required for the trademark variant");

    // eval
    const YAML::Node ev = r.section(root, "eval");
    r.known_keys(ev, "eval", {"samples", "probe_interval", "probe_samples", "surrounding", "far", "synonyms",
                              "object_alternatives"});
    r.count(ev, "samples", "eval.samples", c.eval.samples);
    if (c.eval.samples < kMinScoreSamples)
        r.error("eval.samples", "must be at least " + std::to_string(kMinScoreSamples));
    if (ev && ev["probe_interval"]) {
        long long v = -1;
        try {
            v = ev["probe_interval"].as<long long>();
        } catch (const YAML::Exception&) {
        }
        if (v < 0)
            r.error("eval.probe_interval", "expected a non-negative integer");
        else
            a.probe_interval = static_cast<std::size_t>(v);
    }
    r.count(ev, "probe_samples", "eval.probe_samples", a.probe_samples);
    if (a.probe_samples < kMinScoreSamples)
        r.error("eval.probe_samples", "must be at least " + std::to_string(kMinScoreSamples));
    r.prompt_list(ev, "surrounding", "eval.surrounding", c.eval.surrounding);
    r.prompt_list(ev, "far", "eval.far", c.eval.far);
    r.prompt_list(ev, "synonyms", "eval.synonyms", c.eval.synonyms);
    r.prompt_list(ev, "object_alternatives", "eval.object_alternatives", c.eval.object_alternatives);
    if (c.methods.size() == 2 && a.probe_interval == 0)
        r.error("eval.probe_interval", "comparing methods needs probes");

    // pretrain
    const YAML::Node pre = r.section(root, "pretrain");
    r.known_keys(pre, "pretrain", {"steps", "batch_size", "learning_rate", "final_lr_fraction", "ema_decay",
                                   "context_probability", "concepts", "seed"});
    PretrainConfig& p = c.pretrain;
    r.count(pre, "steps", "pretrain.steps", p.steps);
    r.count(pre, "batch_size", "pretrain.batch_size", p.batch_size);
    r.read(pre, "learning_rate", "pretrain.learning_rate", p.learning_rate);
    r.positive("pretrain.learning_rate", p.learning_rate);
    r.read(pre, "final_lr_fraction", "pretrain.final_lr_fraction", p.final_lr_fraction);
    if (!(p.final_lr_fraction > 0 && p.final_lr_fraction <= 1))
        r.error("pretrain.final_lr_fraction", "must lie in (0, 1]");
    r.read(pre, "ema_decay", "pretrain.ema_decay", p.ema_decay);
    if (!(p.ema_decay >= 0 && p.ema_decay < 1)) r.error("pretrain.ema_decay", "must lie in [0, 1)");
    r.read(pre, "context_probability", "pretrain.context_probability", p.context_probability);
    if (!(p.context_probability >= 0 && p.context_probability <= 1))
        r.error("pretrain.context_probability", "must lie in [0, 1]");
    r.prompt_list(pre, "concepts", "pretrain.concepts", p.concepts);
    if (pre && pre["seed"]) {
        std::uint64_t s = 0;
        r.read(pre, "seed", "pretrain.seed", s);
        c.pretrain_seed = s;
    }

    if (!r.errors.empty()) throw ConfigError(r.errors);

    // Cross-field checks need every piece parsed.
    if (trademark) {
        try {
            a = make_trademark_config(a, c.vocab);
        } catch (const std::exception& e) {
            r.error("ablation.variant", e.what());
        }
    }
    try {
        a.validate(c.vocab);
    } catch (const std::exception& e) {
        r.error("ablation", e.what());
    }
    std::vector<Prompt> reserved{a.target, a.anchor};
    for (std::size_t i = 0; i < c.eval.surrounding.size(); ++i) {
        if (std::find(reserved.begin(), reserved.end(), c.eval.surrounding[i]) != reserved.end())
            r.error("eval.surrounding[" + std::to_string(i) + "]", "repeats the target, anchor or another surrounding concept");
        reserved.push_back(c.eval.surrounding[i]);
    }
    for (std::size_t i = 0; i < c.eval.far.size(); ++i) {
        if (std::find(reserved.begin(), reserved.end(), c.eval.far[i]) != reserved.end())
            r.error("eval.far[" + std::to_string(i) + "]", "repeats the target, anchor, a surrounding or another far concept");
        reserved.push_back(c.eval.far[i]);
    }
    for (std::size_t i = 0; i < c.eval.synonyms.size(); ++i)
        for (auto id : a.target.tokens)
            if (c.eval.synonyms[i].contains(id))
                r.error("eval.synonyms[" + std::to_string(i) + "]", "contains the target token \"" +
                                                                        c.vocab.token(id).name + "\"");
    if (trademark && c.eval.object_alternatives.empty())
        r.error("eval.object_alternatives", "is required for the trademark variant");

    if (!pre || !pre["concepts"]) {
        // Every concept of the vocabulary, then every prompt the run
        // generates from.
        for (const auto& t : c.vocab.tokens())
            if (t.kind != TokenKind::Generic || !t.members.empty()) append_unique(p.concepts, Prompt{{t.id}});
        for (const auto& lc : labeled_concepts(c)) append_unique(p.concepts, lc.prompt);
        for (const auto& s : c.eval.synonyms) append_unique(p.concepts, s);
    }
    if (!r.errors.empty()) throw ConfigError(r.errors);
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"(file): cannot open " + path.string()});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.parent_path());
}

}  // namespace ablab
