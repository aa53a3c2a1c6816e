#pragma once

#include <memory>
#include <string>

#include "hull/tiling.hpp"

namespace hull::testing {

inline std::shared_ptr<const SubstitutionRule> fixture(const std::string& name) {
    return std::make_shared<const SubstitutionRule>(load_rule(std::string(HULL_FIXTURES) + "/" + name + ".json"));
}

/// Letters of the level-k period-doubling word grown from a.
inline std::string pd_word(int k) {
    std::string w = "a";
    for (int i = 0; i < k; ++i) {
        std::string next;
        for (char c : w) next += c == 'a' ? "ab" : "aa";
        w = std::move(next);
    }
    return w;
}

} // namespace hull::testing
