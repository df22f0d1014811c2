#include "corestable/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "corestable/error.hpp"

namespace corestable::sr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSnap = 1e-12;
constexpr std::size_t kOddsSwitch = 500;

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

std::vector<double> to_logs(std::span<const double> weights) {
    std::vector<double> logs(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0)) throw InvalidArgument("weights must be positive");
        logs[i] = std::log(weights[i]);
    }
    return logs;
}

// Inclusion marginals from prefix and suffix tables; also returns nothing for kappa 0.
std::vector<double> marginals_from_logs(std::span<const double> lw, std::size_t kappa) {
    const auto len = lw.size();
    std::vector<double> out(len, 0.0);
    if (kappa == 0) return out;
    if (kappa == len) {
        std::fill(out.begin(), out.end(), 1.0);
        return out;
    }
    const EspTable prefix(lw, kappa);
    std::vector<double> reversed(lw.rbegin(), lw.rend());
    const EspTable suffix(reversed, kappa);
    const double log_total = prefix.log_value(len, kappa);
    for (std::size_t i = 0; i < len; ++i) {
        // e_{kappa-1}(w without i) = Σ_r e_r(w_0..w_{i-1}) e_{kappa-1-r}(w_{i+1}..w_{len-1})
        double acc = kNegInf;
        const std::size_t tail_len = len - i - 1;
        for (std::size_t r = 0; r < kappa; ++r) {
            acc = log_add(acc, prefix.log_value(i, r) + suffix.log_value(tail_len, kappa - 1 - r));
        }
        out[i] = std::exp(lw[i] + acc - log_total);
    }
    return out;
}

}  // namespace

std::vector<double> WeightVector::weights() const {
    std::vector<double> w(log_weights.size());
    std::transform(log_weights.begin(), log_weights.end(), w.begin(),
                   [](double l) { return std::exp(l); });
    return w;
}

EspTable::EspTable(std::span<const double> log_weights, std::size_t kappa)
    : length_(log_weights.size()), kappa_(kappa),
      table_((log_weights.size() + 1) * (kappa + 1), kNegInf) {
    const auto width = kappa_ + 1;
    table_[0] = 0.0;
    for (std::size_t j = 1; j <= length_; ++j) {
        const double lw = log_weights[j - 1];
        const double* prev = &table_[(j - 1) * width];
        double* row = &table_[j * width];
        row[0] = 0.0;
        const auto top = std::min(j, kappa_);
        for (std::size_t r = 1; r <= top; ++r) row[r] = log_add(prev[r], lw + prev[r - 1]);
    }
}

double EspTable::value(std::size_t prefix, std::size_t r) const {
    return std::exp(log_value(prefix, r));
}

EspTable esp_table(std::span<const double> weights, std::size_t kappa) {
    if (kappa > weights.size()) {
        throw InvalidArgument("kappa " + std::to_string(kappa) + " exceeds the number of weights " +
                              std::to_string(weights.size()));
    }
    const auto logs = to_logs(weights);
    return EspTable(logs, kappa);
}

std::vector<double> inclusion_probabilities(std::span<const double> log_weights, std::size_t kappa) {
    if (kappa > log_weights.size()) throw InvalidArgument("kappa exceeds the number of weights");
    return marginals_from_logs(log_weights, kappa);
}

WeightVector fit_max_entropy(const MarginalVector& xp, double tol, std::size_t max_iter,
                             FitReport* report) {
    WeightVector w;
    w.dimension = xp.values.size();
    std::vector<double> target;
    double forced_mass = 0.0;
    for (std::size_t i = 0; i < xp.values.size(); ++i) {
        const double v = xp.values[i];
        if (!(v >= -kSnap && v <= 1.0 + kSnap)) {
            throw InvalidArgument("marginal " + std::to_string(i) + " outside [0, 1]");
        }
        if (v <= kSnap) {
            w.forced_out.push_back(i);
        } else if (v >= 1.0 - kSnap) {
            w.forced_in.push_back(i);
            forced_mass += 1.0;
        } else {
            w.fractional.push_back(i);
            target.push_back(v);
        }
    }
    const long kprime = w.fractional_kappa(xp.kappa);
    const double frac_mass = std::accumulate(target.begin(), target.end(), 0.0);
    if (kprime < 0 || static_cast<std::size_t>(kprime) > target.size() ||
        std::abs(frac_mass - static_cast<double>(kprime)) > 1e-6) {
        throw InvalidArgument("infeasible partition: " + std::to_string(w.forced_in.size()) +
                              " forced-in, fractional mass " + std::to_string(frac_mass) +
                              ", kappa " + std::to_string(xp.kappa));
    }
    const auto kp = static_cast<std::size_t>(kprime);
    w.log_weights.resize(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) {
        w.log_weights[j] = std::log(target[j]) - std::log1p(-target[j]);
    }
    FitReport local;
    for (std::size_t it = 0;; ++it) {
        const auto marg = marginals_from_logs(w.log_weights, kp);
        double residual = 0.0;
        for (std::size_t j = 0; j < target.size(); ++j) {
            residual = std::max(residual, std::abs(marg[j] - target[j]));
        }
        local = {it, residual};
        if (residual <= tol) break;
        if (it >= max_iter) {
            if (report) *report = local;
            throw NonConvergence("maximum-entropy fit did not converge", residual);
        }
        // Plain ratio update first; the odds-ratio form takes over when
        // marginals close to 1 make the plain one crawl.
        const bool odds = it >= kOddsSwitch;
        for (std::size_t j = 0; j < target.size(); ++j) {
            w.log_weights[j] += std::log(target[j]) - std::log(marg[j]);
            if (odds) w.log_weights[j] += std::log1p(-marg[j]) - std::log1p(-target[j]);
        }
        // Fix the gauge: μ is invariant under a common scaling of the weights.
        if (!w.log_weights.empty()) {
            const double shift = std::accumulate(w.log_weights.begin(), w.log_weights.end(), 0.0) /
                                 static_cast<double>(w.log_weights.size());
            for (auto& l : w.log_weights) l -= shift;
        }
    }
    if (report) *report = local;
    return w;
}

FixedSizeSampler::FixedSizeSampler(WeightVector weights, long kappa)
    : weights_(std::move(weights)), kappa_(kappa),
      fractional_kappa_(static_cast<std::size_t>(std::max(0L, weights_.fractional_kappa(kappa)))),
      suffix_(std::vector<double>(weights_.log_weights.rbegin(), weights_.log_weights.rend()),
              std::max(0L, weights_.fractional_kappa(kappa))) {
    if (weights_.fractional_kappa(kappa) < 0 ||
        fractional_kappa_ > weights_.fractional.size()) {
        throw InvalidArgument("kappa inconsistent with the forced/fractional partition");
    }
}

CandidateSet FixedSizeSampler::sample(CounterRng& rng) const {
    CandidateSet out;
    out.reserve(static_cast<std::size_t>(kappa_));
    for (const auto i : weights_.forced_in) out.push_back(static_cast<CandidateIndex>(i));
    const auto len = weights_.fractional.size();
    std::size_t need = fractional_kappa_;
    for (std::size_t j = 0; j < len && need > 0; ++j) {
        // suffix_ is a prefix table of the reversed weights: entry (len - j, r)
        // covers coordinates j..len-1.
        const std::size_t rest = len - j;
        double include;
        if (rest == need) {
            include = 1.0;
        } else {
            include = std::exp(weights_.log_weights[j] + suffix_.log_value(rest - 1, need - 1) -
                               suffix_.log_value(rest, need));
        }
        if (rng.uniform() < include) {
            out.push_back(static_cast<CandidateIndex>(weights_.fractional[j]));
            --need;
        }
    }
    return normalize_set(std::move(out));
}

CandidateSet sample_fixed_size(const WeightVector& w, long kappa, CounterRng& rng) {
    return FixedSizeSampler(w, kappa).sample(rng);
}

std::map<CandidateSet, double> exact_subset_distribution(std::span<const double> weights,
                                                         std::size_t kappa) {
    const auto m = weights.size();
    if (m > 20) throw GuardExceeded("exact subset distribution limited to 20 coordinates");
    if (kappa > m) throw InvalidArgument("kappa exceeds the number of weights");
    std::map<CandidateSet, double> dist;
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != kappa) continue;
        CandidateSet s;
        double prod = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (mask >> i & 1u) {
                s.push_back(static_cast<CandidateIndex>(i));
                prod *= weights[i];
            }
        }
        total += prod;
        dist.emplace(std::move(s), prod);
    }
    for (auto& [s, p] : dist) p /= total;
    return dist;
}

std::map<CandidateSet, double> exact_subset_distribution(const WeightVector& w, long kappa) {
    const auto kprime = w.fractional_kappa(kappa);
    if (kprime < 0) throw InvalidArgument("kappa smaller than the forced-in set");
    const auto inner = exact_subset_distribution(w.weights(), static_cast<std::size_t>(kprime));
    std::map<CandidateSet, double> dist;
    for (const auto& [s, p] : inner) {
        CandidateSet full;
        for (const auto i : w.forced_in) full.push_back(static_cast<CandidateIndex>(i));
        for (const auto j : s) full.push_back(static_cast<CandidateIndex>(w.fractional[j]));
        dist.emplace(normalize_set(std::move(full)), p);
    }
    return dist;
}

MarginalVector scale_and_round_marginals(const FractionalAllocation& x, double alpha, std::size_t m) {
    if (alpha < 2.0) throw InvalidArgument("alpha must be at least 2");
    if (x.x.size() != m) throw InvalidArgument("allocation dimension differs from m");
    MarginalVector out;
    const double scaled = alpha * static_cast<double>(x.k);
    out.kappa = std::min(static_cast<long>(m), static_cast<long>(std::ceil(scaled - 1e-9)));
    out.values.resize(m);
    double base_sum = 0.0;
    double slack_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        out.values[i] = std::min(alpha * std::max(0.0, x.x[i]), 1.0);
        base_sum += out.values[i];
        slack_sum += 1.0 - out.values[i];
    }
    const double surplus = static_cast<double>(out.kappa) - base_sum;
    if (surplus > 0.0 && slack_sum > 0.0) {
        const double share = std::min(1.0, surplus / slack_sum);
        for (auto& v : out.values) v += share * (1.0 - v);
    }
    for (auto& v : out.values) {
        if (v < kSnap) v = 0.0;
        if (v > 1.0 - kSnap) v = 1.0;
    }
    return out;
}

}  // namespace corestable::sr
