#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ablab {

enum class TokenKind { Object, Style, Trademark, Memorized, Synonym, Generic };

const char* kind_name(TokenKind k);

// A vocabulary entry and its generative payload. Only the fields belonging
// to `kind` are populated.
struct ConceptToken {
    std::string name;
    std::size_t id = 0;
    TokenKind kind = TokenKind::Generic;
    std::vector<double> mean;    // object, length object_dim
    double sigma = 1.0;          // object
    std::vector<double> matrix;  // style, object_dim × object_dim row-major
    std::vector<double> glyph;   // trademark, length trademark_dim
    std::vector<double> point;   // memorized, length object_dim + trademark_dim
    std::size_t synonym_of = 0;  // synonym
    std::vector<std::size_t> members;  // generic; empty means a context filler
};

struct VocabularySettings {
    std::size_t object_dim = 4;
    std::size_t trademark_dim = 2;
    // Spread of the trademark sub-vector when no trademark is named.
    double trademark_noise = 0.5;
    double glyph_sigma = 0.05;
    double memorized_sigma = 1e-3;
    // Object part of prompts without an object token.
    std::vector<double> background_mean;
    double background_sigma = 1.0;
};

class Vocabulary {
public:
    static constexpr int kSchemaVersion = 1;

    Vocabulary() = default;
    Vocabulary(VocabularySettings settings, std::vector<ConceptToken> tokens);

    static Vocabulary load(const std::filesystem::path& path);
    static Vocabulary parse(const std::string& yaml_text);

    const VocabularySettings& settings() const { return settings_; }
    std::size_t size() const { return tokens_.size(); }
    std::size_t data_dim() const { return settings_.object_dim + settings_.trademark_dim; }

    const ConceptToken& token(std::size_t id) const;
    const std::vector<ConceptToken>& tokens() const { return tokens_; }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }
    std::size_t id(const std::string& name) const;

    // Follows synonym links to the token carrying the payload.
    const ConceptToken& referent(std::size_t id) const;
    // Composition slot a token occupies: its referent's kind, or for generic
    // tokens the kind of their members. Fillers occupy no slot.
    std::optional<TokenKind> slot(std::size_t id) const;
    bool is_filler(std::size_t id) const;
    bool is_synonym(std::size_t id) const { return token(id).kind == TokenKind::Synonym; }

private:
    void validate() const;

    VocabularySettings settings_;
    std::vector<ConceptToken> tokens_;
    std::map<std::string, std::size_t> by_name_;
};

// Ordered, non-empty token sequence used as conditioning.
struct Prompt {
    std::vector<std::size_t> tokens;

    bool contains(std::size_t id) const;
    bool operator==(const Prompt&) const = default;
    auto operator<=>(const Prompt&) const = default;
};

// Resolves space-separated token names ("corgi photo").
Prompt make_prompt(const Vocabulary& vocab, const std::vector<std::string>& names);
std::string prompt_text(const Vocabulary& vocab, const Prompt& p);

// Non-empty, known ids, and at most one token per composition slot.
void validate_prompt(const Vocabulary& vocab, const Prompt& p);

}  // namespace ablab
