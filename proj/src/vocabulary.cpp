#include "ablab/vocabulary.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <yaml-cpp/yaml.h>

namespace ablab {

const char* kind_name(TokenKind k) {
    switch (k) {
        case TokenKind::Object: return "object";
        case TokenKind::Style: return "style";
        case TokenKind::Trademark: return "trademark";
        case TokenKind::Memorized: return "memorized";
        case TokenKind::Synonym: return "synonym";
        case TokenKind::Generic: return "generic";
    }
    return "?";
}

Vocabulary::Vocabulary(VocabularySettings settings, std::vector<ConceptToken> tokens)
    : settings_(std::move(settings)), tokens_(std::move(tokens)) {
    if (settings_.background_mean.empty()) settings_.background_mean.assign(settings_.object_dim, 0.0);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        tokens_[i].id = i;
        if (!by_name_.emplace(tokens_[i].name, i).second)
            throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i].name + "'");
    }
    validate();
}

const ConceptToken& Vocabulary::token(std::size_t id) const {
    if (id >= tokens_.size()) throw std::out_of_range("unknown token id " + std::to_string(id));
    return tokens_[id];
}

std::size_t Vocabulary::id(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("unknown token \"" + name + "\"");
    return it->second;
}

const ConceptToken& Vocabulary::referent(std::size_t id) const {
    const ConceptToken* t = &token(id);
    for (std::size_t hops = 0; t->kind == TokenKind::Synonym; ++hops) {
        if (hops > tokens_.size()) throw std::logic_error("synonym cycle at '" + t->name + "'");
        t = &token(t->synonym_of);
    }
    return *t;
}

std::optional<TokenKind> Vocabulary::slot(std::size_t id) const {
    const ConceptToken& t = referent(id);
    if (t.kind != TokenKind::Generic) return t.kind;
    if (t.members.empty()) return std::nullopt;
    return referent(t.members.front()).kind;
}

bool Vocabulary::is_filler(std::size_t id) const {
    const ConceptToken& t = referent(id);
    return t.kind == TokenKind::Generic && t.members.empty();
}

void Vocabulary::validate() const {
    const auto& s = settings_;
    if (s.object_dim == 0) throw std::invalid_argument("vocabulary: object_dim must be positive");
    if (!(s.trademark_noise > 0 && s.glyph_sigma > 0 && s.memorized_sigma > 0 && s.background_sigma > 0))
        throw std::invalid_argument("vocabulary: noise scales must be positive");
    if (s.background_mean.size() != s.object_dim)
        throw std::invalid_argument("vocabulary: background mean must have object_dim entries");
    for (const auto& t : tokens_) {
        const auto fail = [&](const std::string& why) {
            throw std::invalid_argument("vocabulary token '" + t.name + "': " + why);
        };
        switch (t.kind) {
            case TokenKind::Object:
                if (t.mean.size() != s.object_dim) fail("mean must have object_dim entries");
                if (!(t.sigma > 0)) fail("sigma must be positive");
                break;
            case TokenKind::Style: {
                if (t.matrix.size() != s.object_dim * s.object_dim) fail("matrix must be object_dim x object_dim");
                Eigen::MatrixXd a(s.object_dim, s.object_dim);
                for (std::size_t r = 0; r < s.object_dim; ++r)
                    for (std::size_t c = 0; c < s.object_dim; ++c) a(r, c) = t.matrix[r * s.object_dim + c];
                if (std::abs(a.fullPivLu().determinant()) <= 1e-6) fail("style map is not invertible");
                break;
            }
            case TokenKind::Trademark:
                if (s.trademark_dim == 0) fail("vocabulary has no trademark sub-vector");
                if (t.glyph.size() != s.trademark_dim) fail("glyph must have trademark_dim entries");
                break;
            case TokenKind::Memorized:
                if (t.point.size() != s.object_dim + s.trademark_dim) fail("point must have data_dim entries");
                break;
            case TokenKind::Synonym:
                if (t.synonym_of >= tokens_.size() || t.synonym_of == t.id) fail("synonym must name another token");
                if (tokens_[t.synonym_of].kind == TokenKind::Synonym) fail("synonym of a synonym is not allowed");
                break;
            case TokenKind::Generic: {
                std::optional<TokenKind> k;
                for (auto m : t.members) {
                    if (m >= tokens_.size()) fail("unknown member");
                    const auto& mt = referent(m);
                    if (mt.kind == TokenKind::Generic) fail("generic members must not be generic");
                    if (k && *k != mt.kind) fail("generic members must share one kind");
                    k = mt.kind;
                }
                break;
            }
        }
    }
}

namespace {

std::vector<double> read_vec(const YAML::Node& n, const std::string& where) {
    if (!n || !n.IsSequence()) throw std::invalid_argument(where + ": expected a list of numbers");
    std::vector<double> v;
    for (const auto& e : n) v.push_back(e.as<double>());
    return v;
}

TokenKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "object") return TokenKind::Object;
    if (s == "style") return TokenKind::Style;
    if (s == "trademark") return TokenKind::Trademark;
    if (s == "memorized") return TokenKind::Memorized;
    if (s == "synonym") return TokenKind::Synonym;
    if (s == "generic") return TokenKind::Generic;
    throw std::invalid_argument(where + ": unknown kind '" + s + "'");
}

}  // namespace

Vocabulary Vocabulary::parse(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw std::invalid_argument(std::string("vocabulary: not valid YAML: ") + e.what());
    }
    try {
        if (!root["schema_version"] || root["schema_version"].as<int>() != kSchemaVersion)
            throw std::invalid_argument("vocabulary: schema_version must be " + std::to_string(kSchemaVersion));
        VocabularySettings s;
        if (root["object_dim"]) s.object_dim = root["object_dim"].as<std::size_t>();
        if (root["trademark_dim"]) s.trademark_dim = root["trademark_dim"].as<std::size_t>();
        if (root["trademark_noise"]) s.trademark_noise = root["trademark_noise"].as<double>();
        if (root["glyph_sigma"]) s.glyph_sigma = root["glyph_sigma"].as<double>();
        if (root["memorized_sigma"]) s.memorized_sigma = root["memorized_sigma"].as<double>();
        if (auto bg = root["background"]) {
            if (bg["mean"]) s.background_mean = read_vec(bg["mean"], "background.mean");
            if (bg["sigma"]) s.background_sigma = bg["sigma"].as<double>();
        }
        const auto list = root["tokens"];
        if (!list || !list.IsSequence()) throw std::invalid_argument("vocabulary: 'tokens' list is required");

        std::map<std::string, std::size_t> ids;
        std::size_t i = 0;
        for (const auto& n : list) {
            if (!n["name"]) throw std::invalid_argument("vocabulary: tokens[" + std::to_string(i) + "] has no name");
            ids.emplace(n["name"].as<std::string>(), i++);
        }
        const auto lookup = [&](const std::string& name, const std::string& where) {
            auto it = ids.find(name);
            if (it == ids.end()) throw std::invalid_argument(where + ": unknown token \"" + name + "\"");
            return it->second;
        };

        std::vector<ConceptToken> tokens;
        for (const auto& n : list) {
            ConceptToken t;
            t.name = n["name"].as<std::string>();
            const std::string where = "vocabulary token '" + t.name + "'";
            if (!n["kind"]) throw std::invalid_argument(where + ": kind is required");
            t.kind = parse_kind(n["kind"].as<std::string>(), where);
            switch (t.kind) {
                case TokenKind::Object:
                    t.mean = read_vec(n["mean"], where + ".mean");
                    t.sigma = n["sigma"] ? n["sigma"].as<double>() : 1.0;
                    break;
                case TokenKind::Style:
                    if (!n["matrix"] || !n["matrix"].IsSequence())
                        throw std::invalid_argument(where + ": matrix is required");
                    for (const auto& row : n["matrix"]) {
                        auto r = read_vec(row, where + ".matrix");
                        t.matrix.insert(t.matrix.end(), r.begin(), r.end());
                    }
                    break;
                case TokenKind::Trademark: t.glyph = read_vec(n["glyph"], where + ".glyph"); break;
                case TokenKind::Memorized: t.point = read_vec(n["point"], where + ".point"); break;
                case TokenKind::Synonym:
                    if (!n["of"]) throw std::invalid_argument(where + ": 'of' is required");
                    t.synonym_of = lookup(n["of"].as<std::string>(), where);
                    break;
                case TokenKind::Generic:
                    if (n["members"])
                        for (const auto& m : n["members"]) t.members.push_back(lookup(m.as<std::string>(), where));
                    break;
            }
            tokens.push_back(std::move(t));
        }
        return Vocabulary(std::move(s), std::move(tokens));
    } catch (const YAML::Exception& e) {
        throw std::invalid_argument(std::string("vocabulary: ") + e.what());
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open vocabulary file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool Prompt::contains(std::size_t id) const {
    for (auto t : tokens)
        if (t == id) return true;
    return false;
}

Prompt make_prompt(const Vocabulary& vocab, const std::vector<std::string>& names) {
    Prompt p;
    for (const auto& n : names) p.tokens.push_back(vocab.id(n));
    validate_prompt(vocab, p);
    return p;
}

std::string prompt_text(const Vocabulary& vocab, const Prompt& p) {
    std::string s;
    for (auto t : p.tokens) {
        if (!s.empty()) s += ' ';
        s += vocab.token(t).name;
    }
    return s;
}

void validate_prompt(const Vocabulary& vocab, const Prompt& p) {
    if (p.tokens.empty()) throw std::invalid_argument("prompt must contain at least one token");
    std::map<TokenKind, std::size_t> used;
    for (auto id : p.tokens) {
        if (id >= vocab.size()) throw std::out_of_range("prompt uses unknown token id " + std::to_string(id));
        if (auto k = vocab.slot(id)) {
            if (used.count(*k))
                throw std::invalid_argument("prompt \"" + prompt_text(vocab, p) + "\" names more than one " +
                                            kind_name(*k) + " token");
            used[*k] = id;
        }
    }
}

}  // namespace ablab
