#include "corestable/tailbounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "corestable/error.hpp"

namespace corestable::tail {

std::vector<double> genbin_pmf(std::span<const double> p) {
    std::vector<double> pmf(p.size() + 1, 0.0);
    pmf[0] = 1.0;
    std::size_t len = 1;
    for (const double q : p) {
        for (std::size_t j = len; j > 0; --j) pmf[j] = pmf[j] * (1.0 - q) + pmf[j - 1] * q;
        pmf[0] *= 1.0 - q;
        ++len;
    }
    return pmf;
}

double genbin_lower_tail(std::span<const double> p, long t) {
    if (t < 0) return 0.0;
    if (static_cast<std::size_t>(t) >= p.size()) return 1.0;
    // Truncated DP: only masses at 0..t are needed.
    const auto width = static_cast<std::size_t>(t) + 1;
    std::vector<double> mass(width, 0.0);
    mass[0] = 1.0;
    for (const double q : p) {
        for (std::size_t j = width - 1; j > 0; --j) mass[j] = mass[j] * (1.0 - q) + mass[j - 1] * q;
        mass[0] *= 1.0 - q;
    }
    double sum = 0.0;
    for (const double v : mass) sum += v;
    return std::min(sum, 1.0);
}

double poisson_pmf(double rate, long j) {
    if (j < 0) return 0.0;
    if (rate == 0.0) return j == 0 ? 1.0 : 0.0;
    return std::exp(-rate + static_cast<double>(j) * std::log(rate) -
                    std::lgamma(static_cast<double>(j) + 1.0));
}

double poisson_lower_tail(double rate, long t) {
    if (rate < 0.0) throw InvalidArgument("Poisson rate must be non-negative");
    if (t < 0) return 0.0;
    if (rate == 0.0) return 1.0;
    // Terms rate^j/j! in log space, summed largest-first relative to the max term.
    std::vector<double> logs(static_cast<std::size_t>(t) + 1);
    double log_term = 0.0;
    for (long j = 0; j <= t; ++j) {
        if (j > 0) log_term += std::log(rate) - std::log(static_cast<double>(j));
        logs[static_cast<std::size_t>(j)] = log_term;
    }
    const double peak = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (auto it = logs.rbegin(); it != logs.rend(); ++it) sum += std::exp(*it - peak);
    return std::min(1.0, std::exp(peak - rate) * sum);
}

double binomial_pmf(long trials, double q, long j) {
    if (j < 0 || j > trials) return 0.0;
    if (q <= 0.0) return j == 0 ? 1.0 : 0.0;
    if (q >= 1.0) return j == trials ? 1.0 : 0.0;
    const double n = static_cast<double>(trials);
    const double k = static_cast<double>(j);
    return std::exp(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1) +
                    k * std::log(q) + (n - k) * std::log1p(-q));
}

double tail_bound_rhs(long mu_floor, double alpha, int ell) {
    if (alpha < 2.0) throw InvalidArgument("alpha must be at least 2");
    if (mu_floor < 0) throw InvalidArgument("floor(mu) must be non-negative");
    if (ell == 1) {
        if (mu_floor == 0) return 0.0;
        if (mu_floor == 1) return std::exp(-alpha);
        return (1.0 + 2.0 * alpha) * std::exp(-2.0 * alpha);
    }
    if (ell == 2) return mu_floor <= 1 ? 0.0 : std::exp(-2.0 * alpha);
    throw InvalidArgument("ell must be 1 or 2");
}

MainTailReport verify_main_tail(std::span<const double> p, double mu, double alpha) {
    if (alpha < 2.0) throw InvalidArgument("alpha must be at least 2");
    if (mu < 0.0) throw InvalidArgument("mu must be non-negative");
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total < alpha * mu - 1e-12) throw InvalidArgument("precondition sum(p) >= alpha*mu violated");
    MainTailReport r;
    r.mu_floor = static_cast<long>(std::floor(mu));
    r.ok = true;
    for (int ell = 1; ell <= 2; ++ell) {
        r.lhs[ell - 1] = genbin_lower_tail(p, r.mu_floor - ell);
        r.rhs[ell - 1] = tail_bound_rhs(r.mu_floor, alpha, ell);
        if (r.lhs[ell - 1] > r.rhs[ell - 1]) r.ok = false;
    }
    return r;
}

PoissonClaimReport check_claim_pois(double alpha, long mu_max) {
    if (alpha < 2.0) throw InvalidArgument("alpha must be at least 2");
    if (mu_max < 2) throw InvalidArgument("mu_max must be at least 2");
    PoissonClaimReport r;
    r.alpha = alpha;
    r.mu_max = mu_max;
    for (int ell = 1; ell <= 2; ++ell) {
        auto& f = r.f[ell - 1];
        for (long mu = 2; mu <= mu_max; ++mu) {
            f.push_back(poisson_lower_tail(alpha * static_cast<double>(mu), mu - ell));
        }
        const auto best = std::max_element(f.begin(), f.end());
        r.argmax[ell - 1] = 2 + static_cast<long>(best - f.begin());
        double margin = f.size() > 1 ? f[0] - f[1] : 0.0;
        for (std::size_t j = 1; j < f.size(); ++j) {
            margin = std::min(margin, f[0] - f[j]);
            if (f[j] > f[0]) r.ok = false;
        }
        r.min_margin[ell - 1] = margin;
    }
    return r;
}

DominationWitness check_domination(std::span<const double> p, long search_limit) {
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    const auto y_pmf = genbin_pmf(p);
    std::vector<double> y_cdf(y_pmf.size());
    std::partial_sum(y_pmf.begin(), y_pmf.end(), y_cdf.begin());
    const auto y_tail = [&](long t) {
        if (t < 0) return 0.0;
        if (static_cast<std::size_t>(t) >= y_cdf.size()) return 1.0;
        return y_cdf[static_cast<std::size_t>(t)];
    };
    constexpr double kSlack = 1e-12;
    // Equal means make dominance at every t an identity in law, so the
    // lower-tail range t ≤ s − 1 is the second pass.
    const long lower_top = static_cast<long>(std::floor(s - 1.0 + 1e-12));
    for (const bool full : {true, false}) {
        for (long a = static_cast<long>(std::floor(s + 1e-12)); a >= 0; --a) {
            const double frac = s - static_cast<double>(a);
            for (long m = 1; m <= search_limit; ++m) {
                const double q = std::max(0.0, frac / static_cast<double>(m));
                if (q > 1.0) continue;
                const std::vector<double> trials(static_cast<std::size_t>(m), q);
                auto z_pmf = genbin_pmf(trials);
                const long top = full ? std::max<long>(static_cast<long>(p.size()), a + m) : lower_top;
                bool ok = true;
                double z_cdf = 0.0;
                for (long t = 0; t <= top && ok; ++t) {
                    const long j = t - a;
                    if (j >= 0 && j <= m) z_cdf += z_pmf[static_cast<std::size_t>(j)];
                    if (y_tail(t) > z_cdf + kSlack) ok = false;
                }
                if (ok) return {a, m, true, full, top};
            }
        }
    }
    return {0, 0, false, false, lower_top};
}

double binomial_vs_poisson_margin(long trials, double alpha, long mu) {
    const double mean = alpha * static_cast<double>(mu);
    if (static_cast<double>(trials) < mean) throw InvalidArgument("need trials >= alpha*mu");
    const double q = mean / static_cast<double>(trials);
    double worst = std::numeric_limits<double>::infinity();
    for (long ell = mu - 2; ell <= mu - 1; ++ell) {
        if (ell < 0) continue;
        worst = std::min(worst, poisson_pmf(mean, ell) - binomial_pmf(trials, q, ell));
    }
    return worst;
}

}  // namespace corestable::tail
