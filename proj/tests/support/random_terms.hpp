#pragma once

// Random lambda terms. Variables are drawn from `scope`, so an empty scope
// yields closed terms.

#include <ebg/lambda.hpp>

#include <random>
#include <string>
#include <vector>

namespace support {

namespace lc = ebg::lambda;

inline lc::Term random_term(std::mt19937& rng, int budget, std::vector<std::string>& scope) {
    int pick = static_cast<int>(rng() % 4);
    if (budget <= 1 || pick == 0) {
        if (!scope.empty() && rng() % 2) return lc::Term::var(scope[rng() % scope.size()]);
        return lc::Term::int_lit(static_cast<ebg::Int>(rng() % 7) - 3);
    }
    if (pick == 1 || pick == 2) {
        std::string name = std::string(1, static_cast<char>('a' + rng() % 5));
        scope.push_back(name);
        auto body = random_term(rng, budget - 1, scope);
        scope.pop_back();
        return lc::Term::lam(name, body);
    }
    int left = 1 + static_cast<int>(rng() % static_cast<unsigned>(budget - 1));
    auto f = random_term(rng, left, scope);
    return lc::Term::app(f, random_term(rng, budget - left, scope));
}

inline lc::Term random_closed_term(std::mt19937& rng, int budget) {
    std::vector<std::string> scope;
    return random_term(rng, budget, scope);
}

} // namespace support
