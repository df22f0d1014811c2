#pragma once

#include <cstdint>
#include <span>

#include "corestable/model.hpp"
#include "corestable/rng.hpp"

namespace corestable::audit {

enum class Mode { exact, heuristic };

/// Worst deviation found: ratio = coverage(T)·K / (|T|·n), maximized over the
/// examined deviating committees T.
struct AuditResult {
    double ratio = 0.0;
    CandidateSet worst_t;
    std::size_t coverage = 0;
    Mode mode = Mode::exact;
    std::uint64_t examined = 0;
};

/// Number of voters strictly preferring T to S (`s` and `t` sorted).
std::size_t coverage(const Instance& inst, std::span<const CandidateIndex> s,
                     std::span<const CandidateIndex> t);

/// Enumerates every nonempty T with |T| ≤ size_cap. With size_cap ≥ min(m, K)
/// the answer decides λ-stability exactly for every λ ≥ 1. Requires m ≤ 64 and
/// (m ≤ 24 or size_cap ≤ 6); throws GuardExceeded otherwise.
AuditResult stability_ratio_exact(const Instance& inst, std::span<const CandidateIndex> s,
                                  std::size_t k_target, std::size_t size_cap);

/// Greedy construction plus single-swap local search over `budget` restarts,
/// for |T| = 1..⌈K/2⌉. The ratio is a lower bound on the exact one.
AuditResult stability_ratio_heuristic(const Instance& inst, std::span<const CandidateIndex> s,
                                      std::size_t k_target, std::size_t budget, CounterRng& rng);

struct StabilityQuery {
    Mode mode = Mode::exact;
    std::size_t size_cap = 0;  ///< exact mode; 0 means min(m, K)
    std::size_t budget = 8;    ///< heuristic restarts
    std::uint64_t seed = 42;   ///< heuristic restarts
};

/// True iff no examined T has coverage(T) ≥ λ|T|n/K. In heuristic mode the
/// answer is one-sided: false only on a found violation.
bool is_lambda_stable(const Instance& inst, std::span<const CandidateIndex> s, std::size_t k_target,
                      double lambda, const StabilityQuery& query = {});

/// The deciding size cap min(m, K).
std::size_t default_size_cap(const Instance& inst, std::size_t k_target);

}  // namespace corestable::audit
