#pragma once

#include <span>
#include <string>
#include <vector>

#include "corestable/allocation.hpp"
#include "corestable/error.hpp"
#include "corestable/model.hpp"

namespace corestable::eq {

struct MnwOptions {
    double tol = 1e-8;           ///< stop when ‖x − Π(x + ∇F)‖∞ ≤ tol
    std::size_t max_iter = 100000;
    double regularizer = 1e-9;   ///< weight of −‖x‖² selecting the symmetric optimum
};

struct MnwStats {
    std::size_t iterations = 0;
    double residual = 0.0;
    std::vector<double> objective_trace;  ///< objective after every accepted step
};

/// Maximizes Σ_{v: A_v ≠ ∅} log u_v(x) over {0 ≤ x ≤ 1, Σx = k} by projected
/// gradient ascent. Candidates nobody approves stay at 0 unless they are needed
/// to reach mass k; then they are funded lowest index first.
FractionalAllocation solve_capped_mnw(const Instance& inst, long k, const MnwOptions& opts = {},
                                      MnwStats* stats = nullptr);

/// Weighted variant: Σ_v w_v log u_v(x), one weight per voter (ignored for
/// voters with empty approval sets). `warm` seeds the iteration when given.
FractionalAllocation solve_weighted_capped_mnw(const Instance& inst, long k,
                                               std::span<const double> weights,
                                               const MnwOptions& opts = {},
                                               MnwStats* stats = nullptr,
                                               const FractionalAllocation* warm = nullptr);

/// Personalized prices p[v][i] with common budget k/n.
struct PriceSystem {
    std::vector<std::vector<double>> p;
    double budget = 0.0;
    /// Per-voter price threshold τ_v (0 for voters whose approved items are all funded).
    std::vector<double> thresholds;
};

/// Dual multipliers of the minimum-violation price LP; a positive
/// `min_violation` proves no prices fit x within that margin.
struct InfeasibilityCertificate {
    double min_violation = 0.0;
    std::vector<std::string> rows;
    std::vector<double> multipliers;
};

struct PriceFit {
    bool feasible = false;
    PriceSystem prices;
    InfeasibilityCertificate certificate;
};

/// Solves the linear price system for a fixed allocation: minimizes the largest
/// violation of budget balance and unit price sums subject to exact voter
/// optimality; feasible iff that violation is ≤ tol.
PriceFit fit_prices(const Instance& inst, const FractionalAllocation& x, double tol = 1e-6);

struct Check {
    Check() = default;
    explicit Check(std::string n) : name(std::move(n)) {}
    std::string name;
    double worst = 0.0;
    std::vector<double> residuals;
    bool pass = true;
};

struct EquilibriumReport {
    double tol = 0.0;
    Check nonnegativity{"nonnegativity"};
    Check budget{"budget"};
    Check price_sum{"price_sum"};
    Check voter_optimality{"voter_optimality"};
    Check producer_optimality{"producer_optimality"};
    Check allocation{"allocation"};
    bool pass = false;
};

/// Checks every equilibrium condition for (x, p); failures are report entries.
EquilibriumReport validate_lindahl(const Instance& inst, const FractionalAllocation& x,
                                   const PriceSystem& p, double tol = 1e-6);

struct SpotCheck {
    std::size_t coverage = 0;
    double threshold = 0.0;
    bool ok = false;
};

/// Counts voters with |A_v ∩ T| > u_v(x) (with 1e-9 slack) against |T|·n/k.
SpotCheck fractional_stability_spotcheck(const Instance& inst, const FractionalAllocation& x,
                                         std::span<const CandidateIndex> t);

struct LindahlOptions {
    MnwOptions mnw;
    double certify_tol = 1e-6;
    std::size_t max_rounds = 5000;
    double damping = 0.5;
    double weight_tol = 1e-10;
};

struct Equilibrium {
    FractionalAllocation x;
    PriceSystem prices;
    EquilibriumReport report;
    std::size_t rounds = 0;
    std::vector<double> weights;  ///< final per-voter welfare weights
    bool prices_from_lp = false;  ///< constructed prices failed validation; fit_prices supplied them
};

/// Raised when the computed allocation cannot be certified.
class EquilibriumFailure : public Error {
public:
    EquilibriumFailure(const std::string& what, FractionalAllocation x,
                       InfeasibilityCertificate cert)
        : Error(what), x_(std::move(x)), certificate_(std::move(cert)) {}
    const FractionalAllocation& allocation() const noexcept { return x_; }
    const InfeasibilityCertificate& certificate() const noexcept { return certificate_; }

private:
    FractionalAllocation x_;
    InfeasibilityCertificate certificate_;
};

/// Equilibrium with funding caps. Reweights the capped Nash-welfare program
/// until every voter's spending equals k/n when funded-at-cap items are paid
/// in proportion to the voters' price thresholds, then certifies with
/// fit_prices + validate_lindahl. Throws EquilibriumFailure when certification
/// fails and NonConvergence when the reweighting does not settle.
Equilibrium compute_lindahl(const Instance& inst, long k, const LindahlOptions& opts = {});

}  // namespace corestable::eq
