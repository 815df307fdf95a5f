#pragma once

#include <filesystem>
#include <string>

#include "ablab/vocabulary.hpp"

namespace ablab::testing {

inline std::filesystem::path source_dir() { return ABLAB_SOURCE_DIR; }

inline const Vocabulary& default_vocab() {
    static const Vocabulary v = Vocabulary::load(source_dir() / "recipes/vocab.yaml");
    return v;
}

inline Prompt P(const Vocabulary& v, const std::string& text) {
    std::vector<std::string> names;
    std::string cur;
    for (char c : text) {
        if (c == ' ') {
            if (!cur.empty()) names.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) names.push_back(cur);
    return make_prompt(v, names);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("ablab-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace ablab::testing
