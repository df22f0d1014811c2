#include "corestable/gen.hpp"

#include <cmath>
#include <numeric>

#include "corestable/error.hpp"
#include "corestable/rng.hpp"

namespace corestable {

void validate(const GenSpec& spec) {
    switch (spec.model) {
        case GenModel::impartial:
            if (spec.num_voters == 0 || spec.num_candidates == 0) {
                throw InvalidArgument("n and m must be positive");
            }
            if (!(spec.approval_probability > 0.0 && spec.approval_probability < 1.0)) {
                throw InvalidArgument("approval probability must lie in (0, 1)");
            }
            break;
        case GenModel::party_list: {
            if (spec.voter_parties.empty() ||
                spec.voter_parties.size() != spec.candidate_parties.size()) {
                throw InvalidArgument("voter and candidate party lists must have equal length");
            }
            const auto n = std::accumulate(spec.voter_parties.begin(), spec.voter_parties.end(),
                                           std::size_t{0});
            const auto m = std::accumulate(spec.candidate_parties.begin(),
                                           spec.candidate_parties.end(), std::size_t{0});
            if (n != spec.num_voters || m != spec.num_candidates) {
                throw InvalidArgument("party sizes must sum to n and m");
            }
            if (n == 0 || m == 0) throw InvalidArgument("n and m must be positive");
            break;
        }
        case GenModel::euclidean1d:
            if (spec.num_voters == 0 || spec.num_candidates == 0) {
                throw InvalidArgument("n and m must be positive");
            }
            if (!(spec.radius > 0.0)) throw InvalidArgument("radius must be positive");
            break;
    }
}

Instance generate(const GenSpec& spec) {
    validate(spec);
    CounterRng rng(spec.seed);
    const auto n = spec.num_voters;
    const auto m = spec.num_candidates;
    std::vector<CandidateSet> approvals(n);

    switch (spec.model) {
        case GenModel::impartial:
            for (std::size_t v = 0; v < n; ++v) {
                for (std::size_t c = 0; c < m; ++c) {
                    if (rng.bernoulli(spec.approval_probability)) {
                        approvals[v].push_back(static_cast<CandidateIndex>(c));
                    }
                }
            }
            break;
        case GenModel::party_list: {
            std::size_t v = 0;
            std::size_t first_candidate = 0;
            for (std::size_t p = 0; p < spec.voter_parties.size(); ++p) {
                CandidateSet party;
                for (std::size_t j = 0; j < spec.candidate_parties[p]; ++j) {
                    party.push_back(static_cast<CandidateIndex>(first_candidate + j));
                }
                first_candidate += spec.candidate_parties[p];
                for (std::size_t j = 0; j < spec.voter_parties[p]; ++j) approvals[v++] = party;
            }
            break;
        }
        case GenModel::euclidean1d: {
            std::vector<double> voter_pos(n);
            std::vector<double> cand_pos(m);
            for (auto& p : voter_pos) p = rng.uniform();
            for (auto& p : cand_pos) p = rng.uniform();
            for (std::size_t v = 0; v < n; ++v) {
                for (std::size_t c = 0; c < m; ++c) {
                    if (std::abs(voter_pos[v] - cand_pos[c]) <= spec.radius) {
                        approvals[v].push_back(static_cast<CandidateIndex>(c));
                    }
                }
            }
            break;
        }
    }
    return Instance::from_approvals(m, std::move(approvals));
}

}  // namespace corestable
