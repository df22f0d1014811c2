#include "corestable/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "corestable/lp.hpp"

namespace corestable::eq {

namespace {

constexpr double kBoundSnap = 1e-9;

bool all_empty(const Instance& inst) {
    for (const auto& v : inst.voters())
        if (!v.approvals.empty()) return false;
    return true;
}

void check_k(const Instance& inst, long k) {
    if (k <= 0) throw InvalidArgument("k must be positive");
    if (static_cast<std::size_t>(k) > inst.num_candidates())
        throw InvalidArgument("k exceeds the number of candidates");
    if (all_empty(inst)) throw InvalidArgument("all approval sets are empty");
}

std::vector<char> approved_mask(const Instance& inst) {
    std::vector<char> mask(inst.num_candidates(), 0);
    for (const auto& v : inst.voters())
        for (auto c : v.approvals) mask[c] = 1;
    return mask;
}

// Everything approved is funded in full; the remaining mass goes to
// unapproved candidates, lowest index first.
FractionalAllocation fill_all_approved(const std::vector<char>& mask, long k) {
    FractionalAllocation out{std::vector<double>(mask.size(), 0.0), k};
    long left = k;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.x[i] = 1.0, --left;
    for (std::size_t i = 0; i < mask.size() && left > 0; ++i)
        if (!mask[i]) out.x[i] = 1.0, --left;
    return out;
}

// Euclidean projection onto {0 ≤ x ≤ 1, Σx = k}: x_i = clamp(y_i − θ, 0, 1).
void project_capped_simplex(std::span<const double> y, double k, std::span<double> out) {
    auto mass = [&](double theta) {
        double s = 0.0;
        for (double v : y) s += std::clamp(v - theta, 0.0, 1.0);
        return s;
    };
    double lo = *std::min_element(y.begin(), y.end()) - 1.0;
    double hi = *std::max_element(y.begin(), y.end());
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (mass(mid) > k ? lo : hi) = mid;
    }
    double theta = 0.5 * (lo + hi);
    // Exact θ from the free set identified by the bracket.
    double free_sum = 0.0, ones = 0.0;
    std::size_t free = 0;
    for (double v : y) {
        if (v - theta >= 1.0) ones += 1.0;
        else if (v - theta > 0.0) free_sum += v, ++free;
    }
    if (free > 0) {
        const double exact = (free_sum + ones - k) / static_cast<double>(free);
        if (std::abs(exact - theta) <= 1e-9 * (1.0 + std::abs(theta))) theta = exact;
    }
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::clamp(y[i] - theta, 0.0, 1.0);
}

struct Program {
    // Reduced problem over approved candidates and nonempty voters.
    std::vector<std::vector<std::size_t>> approvals;  // local indices
    std::vector<double> weight;
    std::size_t dim = 0;
    double k = 0.0;
    double reg = 0.0;

    bool utilities(std::span<const double> x, std::vector<double>& u) const {
        u.assign(approvals.size(), 0.0);
        for (std::size_t v = 0; v < approvals.size(); ++v) {
            for (auto i : approvals[v]) u[v] += x[i];
            if (!(u[v] > 0.0)) return false;
        }
        return true;
    }

    double objective(std::span<const double> x, std::vector<double>& u) const {
        if (!utilities(x, u)) return -std::numeric_limits<double>::infinity();
        double f = 0.0;
        for (std::size_t v = 0; v < u.size(); ++v) f += weight[v] * std::log(u[v]);
        double sq = 0.0;
        for (double xi : x) sq += xi * xi;
        return f - reg * sq;
    }

    void gradient(std::span<const double> x, const std::vector<double>& u, std::vector<double>& g) const {
        g.assign(dim, 0.0);
        for (std::size_t v = 0; v < approvals.size(); ++v) {
            const double r = weight[v] / u[v];
            for (auto i : approvals[v]) g[i] += r;
        }
        for (std::size_t i = 0; i < dim; ++i) g[i] -= 2.0 * reg * x[i];
    }

    double kkt_residual(std::span<const double> x, const std::vector<double>& g,
                        std::vector<double>& scratch) const {
        scratch.resize(dim);
        std::vector<double> y(dim);
        for (std::size_t i = 0; i < dim; ++i) y[i] = x[i] + g[i];
        project_capped_simplex(y, k, scratch);
        double r = 0.0;
        for (std::size_t i = 0; i < dim; ++i) r = std::max(r, std::abs(scratch[i] - x[i]));
        return r;
    }
};

// Active-set Newton finish: Newton steps on the free coordinates with Σx
// fixed, pinning coordinates that reach a bound and releasing pinned ones
// whose multiplier has the wrong sign. Succeeds when the KKT residual ≤ tol.
bool polish(const Program& prog, std::vector<double>& x, double tol) {
    const std::size_t dim = prog.dim;
    std::vector<double> z(x), u, g, trial, scratch;
    std::vector<std::size_t> free;
    std::vector<char> fixed(dim);
    for (std::size_t i = 0; i < dim; ++i) fixed[i] = z[i] <= 0.0 || z[i] >= 1.0;
    for (std::size_t round = 0; round < 2 * dim + 10; ++round) {
        for (int it = 0; it < 60; ++it) {
            if (!prog.utilities(z, u)) return false;
            prog.gradient(z, u, g);
            free.clear();
            for (std::size_t i = 0; i < dim; ++i)
                if (!fixed[i]) free.push_back(i);
            if (free.size() < 2) break;
            std::vector<std::size_t> pos(dim, dim);
            for (std::size_t j = 0; j < free.size(); ++j) pos[free[j]] = j;
            const auto nf = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(nf, nf) * (2.0 * prog.reg);
            std::vector<Eigen::Index> idx;
            for (std::size_t v = 0; v < prog.approvals.size(); ++v) {
                idx.clear();
                for (auto i : prog.approvals[v])
                    if (pos[i] < dim) idx.push_back(static_cast<Eigen::Index>(pos[i]));
                const double c = prog.weight[v] / (u[v] * u[v]);
                for (auto a : idx)
                    for (auto b : idx) hess(a, b) += c;
            }
            Eigen::VectorXd grad(nf);
            for (Eigen::Index j = 0; j < nf; ++j) grad(j) = g[free[j]];
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
            if (ldlt.info() != Eigen::Success) return false;
            const Eigen::VectorXd hg = ldlt.solve(grad);
            const Eigen::VectorXd h1 = ldlt.solve(Eigen::VectorXd::Ones(nf));
            const Eigen::VectorXd d = hg - h1 * (hg.sum() / h1.sum());
            if (!d.allFinite()) return false;

            double t = 1.0;
            std::size_t block = dim;
            for (Eigen::Index j = 0; j < nf; ++j) {
                const double zi = z[free[j]];
                const double lim = d(j) > 0.0 ? (1.0 - zi) / d(j) : d(j) < 0.0 ? -zi / d(j) : 1.0;
                if (lim < t) t = lim, block = free[j];
            }
            trial = z;
            for (;;) {
                for (Eigen::Index j = 0; j < nf; ++j) trial[free[j]] = std::clamp(z[free[j]] + t * d(j), 0.0, 1.0);
                if (prog.utilities(trial, u)) break;
                t *= 0.5;
                block = dim;
                if (t < 1e-20) return false;
            }
            if (block < dim) {
                trial[block] = trial[block] < 0.5 ? 0.0 : 1.0;
                fixed[block] = 1;
            }
            z.swap(trial);
            if (block == dim && d.lpNorm<Eigen::Infinity>() * t < 1e-14) break;
        }
        if (!prog.utilities(z, u)) return false;
        prog.gradient(z, u, g);
        double mu = 0.0, count = 0.0;
        for (std::size_t i = 0; i < dim; ++i)
            if (!fixed[i]) mu += g[i], count += 1.0;
        if (count > 0.0) {
            mu /= count;
        } else {
            // All pinned: any μ between the pinned-at-0 and pinned-at-1 gradients.
            double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < dim; ++i) {
                if (z[i] <= 0.0) lo = std::max(lo, g[i]);
                else hi = std::min(hi, g[i]);
            }
            if (!std::isfinite(lo)) mu = hi;
            else if (!std::isfinite(hi)) mu = lo;
            else mu = 0.5 * (lo + hi);
        }
        std::size_t worst = dim;
        double violation = 1e-13 * (1.0 + std::abs(mu));
        for (std::size_t i = 0; i < dim; ++i) {
            if (!fixed[i]) continue;
            const double v = z[i] <= 0.0 ? g[i] - mu : mu - g[i];
            if (v > violation) violation = v, worst = i;
        }
        if (worst == dim) {
            if (prog.kkt_residual(z, g, scratch) > tol) return false;
            x.swap(z);
            return true;
        }
        fixed[worst] = 0;
    }
    return false;
}

std::vector<double> ascend(const Program& prog, std::vector<double> x, const MnwOptions& opts,
                           MnwStats* stats) {
    std::vector<double> u, g, g_new, x_new(prog.dim), y(prog.dim), scratch;
    double f = prog.objective(x, u);
    prog.gradient(x, u, g);
    double residual = prog.kkt_residual(x, g, scratch);
    double step = 1.0 / std::max(1.0, *std::max_element(g.begin(), g.end()));
    std::size_t it = 0, last_polish = 0;
    bool polished = false;
    if (stats) stats->objective_trace.push_back(f);
    auto finish = [&]() {
        if (!polish(prog, x, opts.tol)) return false;
        f = prog.objective(x, u);
        prog.gradient(x, u, g);
        residual = prog.kkt_residual(x, g, scratch);
        if (stats) stats->objective_trace.push_back(f);
        return true;
    };
    while (residual > opts.tol) {
        if (residual < 1e-4 && (!polished || it - last_polish >= 20)) {
            polished = true;
            last_polish = it;
            if (finish()) break;
        }
        if (it >= opts.max_iter)
            throw NonConvergence("capped Nash-welfare solver did not converge", residual);
        ++it;
        double gd = 0.0, f_new = 0.0;
        bool moved = false;
        for (int tries = 0; tries <= 100; ++tries, step *= 0.5) {
            for (std::size_t i = 0; i < prog.dim; ++i) y[i] = x[i] + step * g[i];
            project_capped_simplex(y, prog.k, x_new);
            gd = 0.0;
            for (std::size_t i = 0; i < prog.dim; ++i) gd += g[i] * (x_new[i] - x[i]);
            f_new = prog.objective(x_new, u);
            if (f_new >= f + 1e-4 * gd) {
                moved = true;
                break;
            }
        }
        if (!moved) {
            // Progress is below the objective's precision.
            if (finish()) break;
            throw NonConvergence("capped Nash-welfare line search stalled", residual);
        }
        prog.gradient(x_new, u, g_new);
        double sxx = 0.0, sxg = 0.0;
        for (std::size_t i = 0; i < prog.dim; ++i) {
            const double dx = x_new[i] - x[i];
            sxx += dx * dx;
            sxg += dx * (g_new[i] - g[i]);
        }
        step = sxg < 0.0 ? std::clamp(sxx / -sxg, 1e-14, 1e14) : std::min(step * 4.0, 1e14);
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        if (stats) stats->objective_trace.push_back(f);
        residual = prog.kkt_residual(x, g, scratch);
    }
    if (stats) stats->iterations = it, stats->residual = residual;
    return x;
}

}  // namespace

FractionalAllocation solve_weighted_capped_mnw(const Instance& inst, long k,
                                               std::span<const double> weights,
                                               const MnwOptions& opts, MnwStats* stats,
                                               const FractionalAllocation* warm) {
    check_k(inst, k);
    if (weights.size() != inst.num_voters()) throw InvalidArgument("one weight per voter required");
    const auto mask = approved_mask(inst);
    const auto approved = static_cast<long>(std::count(mask.begin(), mask.end(), 1));
    if (stats) *stats = MnwStats{};
    if (approved <= k) return fill_all_approved(mask, k);

    std::vector<std::size_t> local(inst.num_candidates(), 0), global;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) local[i] = global.size(), global.push_back(i);

    Program prog;
    prog.dim = global.size();
    prog.k = static_cast<double>(k);
    double wsum = 0.0;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
        const auto& a = inst.approvals(v);
        if (a.empty()) continue;
        if (!(weights[v] > 0.0)) throw InvalidArgument("voter weights must be positive");
        std::vector<std::size_t> loc;
        for (auto c : a) loc.push_back(local[c]);
        prog.approvals.push_back(std::move(loc));
        prog.weight.push_back(weights[v]);
        wsum += weights[v];
    }
    // Mean weight 1 keeps the KKT tolerance meaningful whatever the scale.
    const double mean = wsum / static_cast<double>(prog.weight.size());
    for (double& w : prog.weight) w /= mean;
    prog.reg = opts.regularizer;

    std::vector<double> x0(prog.dim, prog.k / static_cast<double>(prog.dim));
    if (warm && warm->x.size() == inst.num_candidates()) {
        // Blend toward uniform so every voter keeps positive utility.
        for (std::size_t j = 0; j < prog.dim; ++j) x0[j] = 0.999 * warm->x[global[j]] + 0.001 * x0[j];
    }
    auto xs = ascend(prog, std::move(x0), opts, stats);

    FractionalAllocation out{std::vector<double>(inst.num_candidates(), 0.0), k};
    for (std::size_t j = 0; j < prog.dim; ++j) out.x[global[j]] = xs[j];
    return out;
}

FractionalAllocation solve_capped_mnw(const Instance& inst, long k, const MnwOptions& opts,
                                      MnwStats* stats) {
    std::vector<double> ones(inst.num_voters(), 1.0);
    return solve_weighted_capped_mnw(inst, k, ones, opts, stats);
}

PriceFit fit_prices(const Instance& inst, const FractionalAllocation& x, double tol) {
    const std::size_t n = inst.num_voters(), m = inst.num_candidates();
    if (x.x.size() != m) throw InvalidArgument("allocation dimension does not match the instance");
    if (n == 0) throw InvalidArgument("instance has no voters");
    const double budget = static_cast<double>(x.k) / static_cast<double>(n);

    enum class Kind { zero, fractional, capped };
    std::vector<Kind> kind(m);
    for (std::size_t i = 0; i < m; ++i)
        kind[i] = x.x[i] <= kBoundSnap ? Kind::zero : x.x[i] >= 1.0 - kBoundSnap ? Kind::capped : Kind::fractional;

    lp::Problem prob;
    const std::size_t z = prob.add_var(1.0);
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> tau(n, none);
    // var[v][i]: column carrying p_vi, or `none` when p_vi = τ_v or 0.
    std::vector<std::vector<std::size_t>> var(n, std::vector<std::size_t>(m, none));
    std::vector<char> saturated(n, 0);
    for (VoterIndex v = 0; v < n; ++v) {
        const auto& a = inst.approvals(v);
        saturated[v] = std::all_of(a.begin(), a.end(), [&](auto c) { return kind[c] == Kind::capped; });
        if (saturated[v]) {
            for (std::size_t i = 0; i < m; ++i)
                if (kind[i] != Kind::zero) var[v][i] = prob.add_var();
        } else {
            tau[v] = prob.add_var();
            for (auto c : a)
                if (kind[c] == Kind::capped) var[v][c] = prob.add_var();
        }
    }

    std::vector<std::string> labels;
    auto add = [&](lp::Row r, std::string label) {
        prob.add_row(std::move(r));
        labels.push_back(std::move(label));
    };
    auto price_terms = [&](VoterIndex v, std::size_t i, double coef, lp::Row& row) {
        if (var[v][i] != none) row.terms.push_back({var[v][i], coef});
        else if (tau[v] != none && std::binary_search(inst.approvals(v).begin(), inst.approvals(v).end(),
                                                      static_cast<CandidateIndex>(i)))
            row.terms.push_back({tau[v], coef});
    };

    for (VoterIndex v = 0; v < n; ++v) {
        lp::Row spend;
        for (std::size_t i = 0; i < m; ++i)
            if (kind[i] != Kind::zero) price_terms(v, i, x.x[i], spend);
        lp::Row lo = spend, hi = spend;
        hi.terms.push_back({z, -1.0});
        hi.sense = lp::Sense::less_equal;
        hi.rhs = budget;
        lo.terms.push_back({z, 1.0});
        lo.sense = lp::Sense::greater_equal;
        lo.rhs = budget;
        add(std::move(hi), "budget_upper[" + std::to_string(v) + "]");
        add(std::move(lo), "budget_lower[" + std::to_string(v) + "]");
        if (!saturated[v]) {
            for (auto c : inst.approvals(v)) {
                if (kind[c] != Kind::capped) continue;
                add(lp::Row{{{var[v][c], 1.0}, {tau[v], -1.0}}, lp::Sense::less_equal, 0.0},
                    "cap_threshold[" + std::to_string(v) + "," + std::to_string(c) + "]");
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        lp::Row sum;
        for (VoterIndex v = 0; v < n; ++v) price_terms(v, i, 1.0, sum);
        lp::Row hi = sum;
        hi.terms.push_back({z, -1.0});
        hi.sense = lp::Sense::less_equal;
        hi.rhs = 1.0;
        add(std::move(hi), "price_sum_upper[" + std::to_string(i) + "]");
        if (kind[i] != Kind::zero) {
            sum.terms.push_back({z, 1.0});
            sum.sense = lp::Sense::greater_equal;
            sum.rhs = 1.0;
            add(std::move(sum), "price_sum_lower[" + std::to_string(i) + "]");
        }
    }

    const auto sol = lp::solve(prob);
    PriceFit fit;
    fit.prices.budget = budget;
    fit.prices.p.assign(n, std::vector<double>(m, 0.0));
    fit.prices.thresholds.assign(n, 0.0);
    if (sol.status != lp::Status::optimal) {
        fit.certificate.min_violation = std::numeric_limits<double>::infinity();
        return fit;
    }
    for (VoterIndex v = 0; v < n; ++v) {
        if (tau[v] != none) fit.prices.thresholds[v] = sol.values[tau[v]];
        for (std::size_t i = 0; i < m; ++i) {
            lp::Row probe;
            price_terms(v, i, 1.0, probe);
            if (!probe.terms.empty()) fit.prices.p[v][i] = std::max(0.0, sol.values[probe.terms[0].first]);
        }
    }
    fit.certificate.min_violation = sol.objective;
    fit.feasible = sol.objective <= tol;
    if (!fit.feasible) {
        for (std::size_t r = 0; r < labels.size(); ++r) {
            if (std::abs(sol.duals[r]) <= 1e-12) continue;
            fit.certificate.rows.push_back(labels[r]);
            fit.certificate.multipliers.push_back(sol.duals[r]);
        }
    }
    return fit;
}

EquilibriumReport validate_lindahl(const Instance& inst, const FractionalAllocation& x,
                                   const PriceSystem& p, double tol) {
    const std::size_t n = inst.num_voters(), m = inst.num_candidates();
    if (x.x.size() != m || p.p.size() != n) throw InvalidArgument("dimension mismatch");
    for (const auto& row : p.p)
        if (row.size() != m) throw InvalidArgument("dimension mismatch");
    EquilibriumReport rep;
    rep.tol = tol;
    const double budget = n ? static_cast<double>(x.k) / static_cast<double>(n) : 0.0;

    double mass = 0.0, box = 0.0;
    for (double xi : x.x) {
        mass += xi;
        box = std::max({box, -xi, xi - 1.0});
    }
    rep.allocation.residuals = {box, std::abs(mass - static_cast<double>(x.k))};

    for (VoterIndex v = 0; v < n; ++v) {
        double neg = 0.0, spend = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            neg = std::max(neg, -p.p[v][i]);
            spend += p.p[v][i] * x.x[i];
        }
        rep.nonnegativity.residuals.push_back(neg);
        rep.budget.residuals.push_back(std::abs(spend - budget));

        // Greedy fractional knapsack over approved items by ascending price.
        std::vector<CandidateIndex> items(inst.approvals(v).begin(), inst.approvals(v).end());
        std::stable_sort(items.begin(), items.end(),
                         [&](auto a, auto b) { return p.p[v][a] < p.p[v][b]; });
        double left = budget, best = 0.0;
        for (auto c : items) {
            const double price = std::max(0.0, p.p[v][c]);
            if (price <= 0.0) {
                best += 1.0;
                continue;
            }
            if (left <= 0.0) break;
            const double take = std::min(1.0, left / price);
            best += take;
            left -= take * price;
        }
        rep.voter_optimality.residuals.push_back(std::max(0.0, best - fractional_utility(inst, v, x.x)));
    }
    for (std::size_t i = 0; i < m; ++i) {
        double sum = 0.0;
        for (VoterIndex v = 0; v < n; ++v) sum += p.p[v][i];
        const bool funded = x.x[i] > tol;
        rep.price_sum.residuals.push_back(funded ? std::abs(sum - 1.0) : std::max(0.0, sum - 1.0));
        rep.producer_optimality.residuals.push_back(std::max({0.0, sum - 1.0, funded ? 1.0 - sum : 0.0}));
    }

    bool all = true;
    for (Check* c : {&rep.allocation, &rep.nonnegativity, &rep.budget, &rep.price_sum,
                     &rep.voter_optimality, &rep.producer_optimality}) {
        c->worst = c->residuals.empty() ? 0.0 : *std::max_element(c->residuals.begin(), c->residuals.end());
        c->pass = c->worst <= tol;
        all = all && c->pass;
    }
    rep.pass = all;
    return rep;
}

SpotCheck fractional_stability_spotcheck(const Instance& inst, const FractionalAllocation& x,
                                         std::span<const CandidateIndex> t) {
    if (t.empty()) throw InvalidArgument("deviation set must be nonempty");
    if (x.k <= 0) throw InvalidArgument("allocation mass must be positive");
    std::vector<CandidateIndex> sorted(t.begin(), t.end());
    std::sort(sorted.begin(), sorted.end());
    SpotCheck out;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
        const double gain = static_cast<double>(utility(inst, v, sorted));
        if (gain > fractional_utility(inst, v, x.x) + 1e-9) ++out.coverage;
    }
    out.threshold = static_cast<double>(t.size()) * static_cast<double>(inst.num_voters()) /
                    static_cast<double>(x.k);
    out.ok = static_cast<double>(out.coverage) < out.threshold;
    return out;
}

namespace {

// Common spending level B with n_free·B + Σ_sat min(B, e_v) = total.
double water_level(std::size_t n_free, std::vector<double> sat, double total) {
    std::sort(sat.begin(), sat.end());
    double below = 0.0;
    for (std::size_t j = 0; j <= sat.size(); ++j) {
        const double count = static_cast<double>(n_free + sat.size() - j);
        const double level = (total - below) / count;
        if (j == sat.size() || level <= sat[j]) return level;
        below += sat[j];
    }
    return total / static_cast<double>(n_free);
}

}  // namespace

namespace {

// Thresholds and spending implied by a weighted optimum (see compute_lindahl).
struct Split {
    double lambda = 1.0;
    double level = 0.0;
    std::vector<double> tau, g, spend, discount;
    std::vector<char> saturated;
};

Split split_spending(const Instance& inst, const FractionalAllocation& x,
                     const std::vector<double>& weights, const std::vector<char>& mask) {
    const std::size_t n = inst.num_voters(), m = inst.num_candidates();
    auto capped = [&](std::size_t c) { return x.x[c] >= 1.0 - kBoundSnap; };
    Split s;
    s.tau.assign(n, 0.0);
    s.g.assign(m, 0.0);
    s.spend.assign(n, 0.0);
    s.discount.assign(n, 0.0);
    s.saturated.assign(n, 0);
    for (VoterIndex v = 0; v < n; ++v)
        if (!inst.approvals(v).empty()) s.tau[v] = weights[v] / fractional_utility(inst, v, x.x);
    for (VoterIndex v = 0; v < n; ++v)
        for (auto c : inst.approvals(v)) s.g[c] += s.tau[v];
    double interior = 0.0, sum = 0.0, capped_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        if (!mask[i]) continue;
        if (capped(i)) capped_min = std::min(capped_min, s.g[i]);
        else if (x.x[i] > kBoundSnap) sum += s.g[i], interior += 1.0;
    }
    s.lambda = interior > 0.0 ? sum / interior : capped_min;
    for (auto& t : s.tau) t /= s.lambda;
    for (auto& gi : s.g) gi /= s.lambda;

    std::size_t n_free = 0;
    std::vector<double> sat_spend;
    for (VoterIndex v = 0; v < n; ++v) {
        const auto& a = inst.approvals(v);
        if (a.empty()) continue;
        for (auto c : a)
            if (capped(c)) s.discount[v] += s.tau[v] * std::max(0.0, 1.0 - 1.0 / s.g[c]);
        s.spend[v] = weights[v] / s.lambda - s.discount[v];
        s.saturated[v] = std::all_of(a.begin(), a.end(), capped);
        if (s.saturated[v]) sat_spend.push_back(s.spend[v]);
        else ++n_free;
    }
    s.level = n_free ? water_level(n_free, sat_spend, static_cast<double>(x.k)) : 0.0;
    return s;
}

// Prices read off the reweighting: thresholds scaled to the real budget k/n,
// capped items shared in proportion to τ, and the leftover money of fully
// satisfied voters and voters approving nothing spread uniformly over funded
// items.
PriceSystem constructed_prices(const Instance& inst, const FractionalAllocation& x, const Split& s,
                               bool all_funded) {
    const std::size_t n = inst.num_voters(), m = inst.num_candidates();
    PriceSystem ps;
    ps.budget = static_cast<double>(x.k) / static_cast<double>(n);
    ps.p.assign(n, std::vector<double>(m, 0.0));
    ps.thresholds.assign(n, 0.0);
    const double scale = all_funded ? 0.0 : std::min(1.0, ps.budget / s.level);
    std::vector<double> surplus(n, ps.budget);
    for (VoterIndex v = 0; v < n && !all_funded; ++v) {
        const auto& a = inst.approvals(v);
        if (a.empty()) continue;
        for (auto c : a) {
            if (x.x[c] >= 1.0 - kBoundSnap) ps.p[v][c] = scale * s.tau[v] / s.g[c];
            else ps.p[v][c] = scale * s.tau[v];
        }
        if (!s.saturated[v]) ps.thresholds[v] = scale * s.tau[v];
        surplus[v] = s.saturated[v] ? std::max(0.0, ps.budget - scale * s.spend[v]) : 0.0;
    }
    const double pool = std::accumulate(surplus.begin(), surplus.end(), 0.0);
    if (pool <= 0.0) return ps;
    for (VoterIndex v = 0; v < n; ++v) {
        const double share = (1.0 - scale) * surplus[v] / pool;
        for (std::size_t i = 0; i < m; ++i)
            if (x.x[i] > kBoundSnap) ps.p[v][i] += share;
    }
    return ps;
}

}  // namespace

Equilibrium compute_lindahl(const Instance& inst, long k, const LindahlOptions& opts) {
    check_k(inst, k);
    const std::size_t n = inst.num_voters();
    std::size_t nonempty = 0;
    for (const auto& v : inst.voters()) nonempty += !v.approvals.empty();
    const double b = static_cast<double>(k) / static_cast<double>(nonempty);

    Equilibrium eq;
    eq.weights.assign(n, b);
    eq.x = solve_weighted_capped_mnw(inst, k, eq.weights, opts.mnw);

    // Weighted capped Nash welfare with multiplier λ gives thresholds
    // τ_v = w_v / (λ u_v); paying capped items in proportion to τ, voter v
    // spends w_v/λ − D_v. Iterate w ← target + D until every voter whose
    // approved items are not all capped spends the common level B; voters
    // with everything capped may spend less.
    bool settled = true;
    const auto mask = approved_mask(inst);
    const bool all_funded = std::count(mask.begin(), mask.end(), 1) <= k;
    Split split;
    if (!all_funded) {
        std::vector<double> next(n);
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_round = 0;
        for (;;) {
            split = split_spending(inst, eq.x, eq.weights, mask);
            double change = 0.0;
            for (VoterIndex v = 0; v < n; ++v) {
                if (inst.approvals(v).empty()) {
                    next[v] = eq.weights[v] / split.lambda;
                    continue;
                }
                const double target = split.saturated[v] ? std::min(split.level, split.spend[v]) : split.level;
                next[v] = target + split.discount[v];
                change = std::max(change, std::abs(next[v] - eq.weights[v] / split.lambda) / split.level);
            }
            if (change <= opts.weight_tol) break;
            // Stalled at the inner solver's precision: let the certifier decide.
            if (change < 0.9 * best) best = change, best_round = eq.rounds;
            if (eq.rounds - best_round > 25 && best < 1e-7) break;
            if (eq.rounds >= opts.max_rounds) {
                settled = false;
                break;
            }
            ++eq.rounds;
            for (VoterIndex v = 0; v < n; ++v)
                eq.weights[v] = (1.0 - opts.damping) * eq.weights[v] / split.lambda + opts.damping * next[v];
            eq.x = solve_weighted_capped_mnw(inst, k, eq.weights, opts.mnw, nullptr, &eq.x);
        }
    }

    eq.prices = constructed_prices(inst, eq.x, split, all_funded);
    eq.report = validate_lindahl(inst, eq.x, eq.prices, opts.certify_tol);
    if (eq.report.pass) return eq;

    auto fit = fit_prices(inst, eq.x, opts.certify_tol);
    if (!fit.feasible)
        throw EquilibriumFailure(std::string(settled ? "no equal-budget prices support the computed allocation"
                                                     : "equilibrium reweighting did not settle") +
                                     " (" + std::to_string(eq.rounds) + " reweighting rounds)",
                                 eq.x, std::move(fit.certificate));
    eq.prices = std::move(fit.prices);
    eq.prices_from_lp = true;
    eq.report = validate_lindahl(inst, eq.x, eq.prices, opts.certify_tol);
    if (!eq.report.pass)
        throw EquilibriumFailure("computed prices fail equilibrium validation", eq.x, fit.certificate);
    return eq;
}

}  // namespace corestable::eq
