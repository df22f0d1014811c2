#pragma once

#include "corestable/gen.hpp"
#include "corestable/model.hpp"

namespace fixtures {

// C = {a,b,c,d,e}; three voters approve {a,b,c}, two approve {d,e}.
inline corestable::Instance example1() {
    return corestable::Instance({"a", "b", "c", "d", "e"},
                                {{"v1", {0, 1, 2}}, {"v2", {0, 1, 2}}, {"v3", {0, 1, 2}}, {"v4", {3, 4}}, {"v5", {3, 4}}});
}

inline corestable::Instance impartial(std::size_t n, std::size_t m, double q, std::uint64_t seed) {
    corestable::GenSpec s;
    s.model = corestable::GenModel::impartial;
    s.num_voters = n;
    s.num_candidates = m;
    s.approval_probability = q;
    s.seed = seed;
    return corestable::generate(s);
}

inline corestable::Instance euclidean(std::size_t n, std::size_t m, double r, std::uint64_t seed) {
    corestable::GenSpec s;
    s.model = corestable::GenModel::euclidean1d;
    s.num_voters = n;
    s.num_candidates = m;
    s.radius = r;
    s.seed = seed;
    return corestable::generate(s);
}

}  // namespace fixtures
