#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "corestable/allocation.hpp"
#include "corestable/error.hpp"
#include "corestable/model.hpp"
#include "corestable/rng.hpp"

namespace corestable::sel {

/// Constants of the randomized selection algorithm.
struct ParamSet {
    double alpha = 2.154564;
    double eta = 0.358696;
    double epsilon = 1e-10;
    double rho = 0.00703;
    double gamma = 0.30328;
    double lambda_inner = 3.606655;
    double lambda_final = 3.651;
    std::size_t base_threshold = 28;
    std::size_t max_resamples = 1000;

    /// t₀ = e^{−α} / (e^α − 2α), the fixed point of f.
    double t0() const;
    /// f(t) = e^{−α} − (e^α − 1 − 2α)t.
    double f(double t) const;
    /// β(t) = (λη − 1)(1 − t/t₀), clamped to [0, λη − 1].
    double beta(double t) const;
    /// λ_inner·(1 + 2ρ): the bound the parameters actually certify.
    double certified_bound() const { return lambda_inner * (1.0 + 2.0 * rho); }
    /// γ solving γ = t₀(e^α − 1 − 2α)/(λη − 1) for the current α, η, λ.
    double balanced_gamma() const;

    /// Throws InvalidArgument unless α ≥ 2, η ∈ (0,1), ε ≥ 0, ρ ≥ 0, γ ≥ 0, λη > 1.
    void validate() const;
};

struct ParameterCheck {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool ok = false;
};

struct ParameterReport {
    double t0 = 0.0;
    double lambda1_at_0 = 0.0, lambda1_at_t0 = 0.0;
    double lambda2_at_0 = 0.0, lambda2_at_t0 = 0.0;
    std::vector<ParameterCheck> checks;
    bool ok = false;
};

/// λ₁(t) = 1/η + λ(f(t) − β(t)γ)/(1 − (α+γ)η).
double lambda1(const ParamSet& p, double t);
/// λ₂(t) = (1 + β(t))/η + λt/(1 − (α+γ)η).
double lambda2(const ParamSet& p, double t);

/// Evaluates λ₁, λ₂ at t ∈ {0, t₀} against λ_inner (tolerance 1e-4) and the
/// identities f(t₀) = t₀, β(t₀) = 0 (tolerance 1e-10).
ParameterReport verify_parameters(const ParamSet& p);

/// V_ℓ = {v : |R ∩ A_v| ≤ ⌊u_v(x)⌋ − ℓ}, ℓ = 1, 2, with δ_ℓ = |V_ℓ|/n.
struct VoterSplit {
    std::vector<VoterIndex> v1, v2;
    double delta1 = 0.0;
    double delta2 = 0.0;
};

VoterSplit classify_voters(const Instance& inst, const FractionalAllocation& x,
                           std::span<const CandidateIndex> r);

/// δ₁ + (e^α − 1 − 2α)δ₂ ≤ (1 + ε)e^{−α}.
bool accept_sample(const VoterSplit& split, const ParamSet& p);

enum class LevelCase { greedy_full, greedy_exhausted, base };

const char* to_string(LevelCase c);

struct GreedyOutcome {
    std::vector<CandidateIndex> chosen;  ///< in selection order
    std::vector<std::vector<VoterIndex>> removed;  ///< parallel to `chosen`
    LevelCase outcome = LevelCase::greedy_exhausted;
};

/// Repeatedly adds the candidate outside `excluded` approved by the most
/// voters of the current pool (lowest index on ties) provided that count is
/// ≥ max(β·n/k, 1); removes those voters. Stops after gamma_cap picks or when
/// nothing qualifies.
GreedyOutcome greedy_phase(const Instance& inst, std::span<const VoterIndex> pool,
                           std::span<const CandidateIndex> excluded, double beta,
                           std::size_t gamma_cap, long k);

/// Maximizes Σ_v H(|S ∩ A_v|) over s-subsets, lexicographically first on ties.
/// Requires m ≤ 30.
CandidateSet pav_exact(const Instance& inst, std::size_t s);

/// Integer PAV score scaled by lcm(1..s) so ties compare exactly.
std::uint64_t pav_score_scaled(const Instance& inst, std::span<const CandidateIndex> committee,
                               std::size_t s);

struct BaseCaseResult {
    CandidateSet stable;   ///< the exactly stable core of size min(K, 8)
    CandidateSet padded;   ///< `stable` plus lowest-index fill up to K
    bool verified = false; ///< exact audit ran and confirmed ratio < 1
    bool escalated = false;///< the PAV optimum failed and enumeration was used
};

/// Exactly stable committee of size s = min(K, 8) (PAV optimum, verified;
/// otherwise the best-PAV committee that verifies), padded to K.
BaseCaseResult base_case(const Instance& inst, std::size_t k_target);

struct LevelRecord {
    std::size_t depth = 0;
    std::size_t num_voters = 0;
    std::size_t num_candidates = 0;
    std::size_t target = 0;
    LevelCase outcome = LevelCase::base;
    // Sampling levels only.
    long k = 0;
    long kappa = 0;
    double alpha = 0.0;        ///< α used at this level (lowered when the budget is tight)
    std::size_t gamma_cap = 0;
    std::vector<CandidateIndex> candidates;  ///< original indices of this level's candidates
    std::vector<double> x;                   ///< equilibrium over `candidates`
    std::size_t resamples = 0;
    CandidateSet r;
    double delta1 = 0.0, delta2 = 0.0, t = 0.0, beta = 0.0;
    std::vector<CandidateIndex> r_prime;
    std::vector<std::vector<VoterIndex>> removed;  ///< original voter indices per R′ member
    std::size_t next_target = 0;
    // Base levels only.
    CandidateSet chosen;
    bool verified = false;
};

struct SelectionResult {
    Committee committee;
    std::size_t reduced_target = 0;  ///< K′ = ⌈K/(1+2ρ)⌉
    std::vector<LevelRecord> levels;
    std::vector<CandidateIndex> padding;
    std::uint64_t seed = 0;
    double certified_bound = 0.0;
    double stated_bound = 0.0;
};

/// Every sample in the resampling budget failed the acceptance test.
class ResampleExhausted : public Error {
public:
    ResampleExhausted(const std::string& what, double delta1, double delta2)
        : Error(what), delta1_(delta1), delta2_(delta2) {}
    double delta1() const noexcept { return delta1_; }
    double delta2() const noexcept { return delta2_; }

private:
    double delta1_, delta2_;
};

/// One invocation of the recursive algorithm; returns original candidate
/// indices (at most k_target of them) and appends level records.
CandidateSet select_recursive(const Instance& inst, std::size_t k_target, const ParamSet& params,
                              CounterRng& rng, std::vector<LevelRecord>& levels);

/// Full pipeline: recursion on K′ then padding to exactly K.
SelectionResult select_committee(const Instance& inst, std::size_t k, const ParamSet& params,
                                 std::uint64_t seed);

}  // namespace corestable::sel
