#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "corestable/allocation.hpp"
#include "corestable/model.hpp"
#include "corestable/rng.hpp"

namespace corestable::sr {

/// Target inclusion probabilities with integral total mass kappa.
struct MarginalVector {
    std::vector<double> values;
    long kappa = 0;
};

/// Maximum-entropy weights for the fractional coordinates of a MarginalVector.
/// Coordinates are partitioned into forced-in (marginal 1), forced-out
/// (marginal 0) and fractional ones; weights live in log space.
struct WeightVector {
    std::size_t dimension = 0;
    std::vector<std::size_t> fractional;
    std::vector<double> log_weights;  ///< parallel to `fractional`
    std::vector<std::size_t> forced_in;
    std::vector<std::size_t> forced_out;

    std::vector<double> weights() const;
    /// Number of fractional coordinates the sampler must still pick.
    long fractional_kappa(long kappa) const { return kappa - static_cast<long>(forced_in.size()); }
};

/// Table of log e_r(w_1..w_j) for j = 0..len and r = 0..kappa (prefix sums of
/// the sequence it was built from). Entries of empty index ranges are -inf.
class EspTable {
public:
    EspTable(std::span<const double> log_weights, std::size_t kappa);

    std::size_t length() const noexcept { return length_; }
    std::size_t kappa() const noexcept { return kappa_; }

    double log_value(std::size_t prefix, std::size_t r) const {
        return r > kappa_ ? -std::numeric_limits<double>::infinity()
                          : table_[prefix * (kappa_ + 1) + r];
    }
    double value(std::size_t prefix, std::size_t r) const;
    /// e_kappa over the whole sequence.
    double total() const { return value(length_, kappa_); }

private:
    std::size_t length_;
    std::size_t kappa_;
    std::vector<double> table_;
};

/// Prefix table over plain positive weights. Throws if kappa exceeds their count.
EspTable esp_table(std::span<const double> weights, std::size_t kappa);

/// Inclusion probabilities of the fixed-size distribution μ(S) ∝ Π_{i∈S} w_i, |S| = kappa.
std::vector<double> inclusion_probabilities(std::span<const double> log_weights, std::size_t kappa);

struct FitReport {
    std::size_t iterations = 0;
    double residual = 0.0;  ///< ℓ∞ distance of fitted marginals to the targets
};

/// Fits weights so that the conditional fixed-size distribution over the
/// fractional coordinates reproduces the target marginals. Throws
/// NonConvergence when max_iter is exhausted.
WeightVector fit_max_entropy(const MarginalVector& xp, double tol = 1e-9,
                             std::size_t max_iter = 100000, FitReport* report = nullptr);

/// Draws one subset of size `kappa` (forced-in coordinates included).
class FixedSizeSampler {
public:
    FixedSizeSampler(WeightVector weights, long kappa);

    CandidateSet sample(CounterRng& rng) const;

    const WeightVector& weights() const noexcept { return weights_; }
    long kappa() const noexcept { return kappa_; }

private:
    WeightVector weights_;
    long kappa_;
    std::size_t fractional_kappa_;
    EspTable suffix_;  ///< built over the reversed fractional weights
};

/// Convenience for one draw; builds a FixedSizeSampler each call.
CandidateSet sample_fixed_size(const WeightVector& w, long kappa, CounterRng& rng);

/// Exact μ over all kappa-subsets of plain weights; requires weights.size() ≤ 20.
std::map<CandidateSet, double> exact_subset_distribution(std::span<const double> weights,
                                                         std::size_t kappa);

/// Exact distribution of the full sample (forced coordinates included).
std::map<CandidateSet, double> exact_subset_distribution(const WeightVector& w, long kappa);

/// Builds sampling marginals from a fractional allocation: kappa = min(m, ⌈αk⌉),
/// base b_i = min(αx_i, 1), surplus kappa − Σb spread in proportion to slack 1 − b_i.
MarginalVector scale_and_round_marginals(const FractionalAllocation& x, double alpha, std::size_t m);

}  // namespace corestable::sr
