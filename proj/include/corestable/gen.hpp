#pragma once

#include <cstdint>
#include <vector>

#include "corestable/model.hpp"

namespace corestable {

enum class GenModel { impartial, party_list, euclidean1d };

struct GenSpec {
    GenModel model = GenModel::impartial;
    std::size_t num_voters = 0;
    std::size_t num_candidates = 0;
    /// impartial: each (voter, candidate) pair approved independently with this probability.
    double approval_probability = 0.5;
    /// party_list: party sizes; voters of party j approve exactly party j's candidates.
    std::vector<std::size_t> voter_parties;
    std::vector<std::size_t> candidate_parties;
    /// euclidean1d: approval radius on the unit interval.
    double radius = 0.1;
    std::uint64_t seed = 42;
};

/// Throws InvalidArgument when the spec's fields are inconsistent.
void validate(const GenSpec& spec);

/// Deterministic in `spec.seed`.
Instance generate(const GenSpec& spec);

}  // namespace corestable
