#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace corestable::tail {

/// P[Y ≤ t] for Y a sum of independent Bernoulli(p_i); 0 for t < 0.
double genbin_lower_tail(std::span<const double> p, long t);

/// Full probability mass function of the Poisson-binomial sum, length n + 1.
std::vector<double> genbin_pmf(std::span<const double> p);

/// P[Pois(rate) ≤ t].
double poisson_lower_tail(double rate, long t);

/// Poisson probability mass e^{-rate} rate^j / j!.
double poisson_pmf(double rate, long j);

/// Binomial probability mass P[Bin(trials, q) = j], computed in log space.
double binomial_pmf(long trials, double q, long j);

/// Right-hand side of the lower-tail bound for P[Y ≤ ⌊μ⌋ − ell], ell ∈ {1, 2}.
double tail_bound_rhs(long mu_floor, double alpha, int ell);

struct MainTailReport {
    long mu_floor = 0;
    double lhs[2] = {0.0, 0.0};  ///< exact tails at ⌊μ⌋−1 and ⌊μ⌋−2
    double rhs[2] = {0.0, 0.0};
    bool ok = false;
};

/// Checks both lower-tail bounds for one query. Requires Σp ≥ αμ and α ≥ 2.
MainTailReport verify_main_tail(std::span<const double> p, double mu, double alpha);

struct PoissonClaimReport {
    double alpha = 0.0;
    long mu_max = 0;
    bool ok = true;
    long argmax[2] = {2, 2};        ///< maximizing μ of f_1 and f_2
    double min_margin[2] = {0, 0};  ///< min over μ > 2 of f_ell(2) − f_ell(μ); 0 when vacuous
    std::vector<double> f[2];       ///< f_ell(μ) for μ = 2..mu_max
};

/// Sweeps f_ell(μ) = P[Pois(αμ) ≤ μ − ell] over μ = 2..mu_max and checks f_ell(μ) ≤ f_ell(2).
PoissonClaimReport check_claim_pois(double alpha, long mu_max);

struct DominationWitness {
    long shift = 0;           ///< a
    long trials = 0;          ///< m
    bool ok = false;
    bool full_range = false;  ///< P[Y ≤ t] ≤ P[Z ≤ t] for every t, not only t ≤ max_t
    long max_t = 0;           ///< largest t compared
};

/// Searches a ∈ [⌊s⌋, 0] (descending) then m ∈ [1, search_limit] for a shifted
/// binomial Z = a + Bin(m, (s − a)/m) with P[Y ≤ t] ≤ P[Z ≤ t]. Z has mean s,
/// so dominance at every t means Y and Z share a law; such a witness is tried
/// first, then one over the lower tail t ≤ s − 1.
DominationWitness check_domination(std::span<const double> p, long search_limit);

/// Claim-level check that Bin(trials, αμ/trials) puts no more mass at ell than
/// Pois(αμ) does, for ell ∈ {μ−1, μ−2} ∩ [0, ∞). Returns the worst margin
/// (Poisson mass minus binomial mass); negative means violated.
double binomial_vs_poisson_margin(long trials, double alpha, long mu);

}  // namespace corestable::tail
