#include "corestable/selection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "corestable/audit.hpp"
#include "corestable/equilibrium.hpp"
#include "corestable/sampler.hpp"

namespace corestable::sel {

double ParamSet::t0() const { return std::exp(-alpha) / (std::exp(alpha) - 2.0 * alpha); }

double ParamSet::f(double t) const {
    return std::exp(-alpha) - (std::exp(alpha) - 1.0 - 2.0 * alpha) * t;
}

double ParamSet::beta(double t) const {
    const double top = lambda_inner * eta - 1.0;
    return std::clamp(top * (1.0 - t / t0()), 0.0, top);
}

double ParamSet::balanced_gamma() const {
    return t0() * (std::exp(alpha) - 1.0 - 2.0 * alpha) / (lambda_inner * eta - 1.0);
}

void ParamSet::validate() const {
    if (!(alpha >= 2.0)) throw InvalidArgument("alpha must be at least 2");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie in (0, 1)");
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be nonnegative");
    if (!(rho >= 0.0)) throw InvalidArgument("rho must be nonnegative");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be nonnegative");
    if (!(lambda_inner * eta > 1.0)) throw InvalidArgument("lambda_inner * eta must exceed 1");
    if (max_resamples == 0) throw InvalidArgument("max_resamples must be positive");
}

double lambda1(const ParamSet& p, double t) {
    return 1.0 / p.eta + p.lambda_inner * (p.f(t) - p.beta(t) * p.gamma) / (1.0 - (p.alpha + p.gamma) * p.eta);
}

double lambda2(const ParamSet& p, double t) {
    return (1.0 + p.beta(t)) / p.eta + p.lambda_inner * t / (1.0 - (p.alpha + p.gamma) * p.eta);
}

ParameterReport verify_parameters(const ParamSet& p) {
    p.validate();
    ParameterReport rep;
    rep.t0 = p.t0();
    rep.lambda1_at_0 = lambda1(p, 0.0);
    rep.lambda1_at_t0 = lambda1(p, rep.t0);
    rep.lambda2_at_0 = lambda2(p, 0.0);
    rep.lambda2_at_t0 = lambda2(p, rep.t0);
    auto within = [&](std::string name, double value, double target, double tol) {
        rep.checks.push_back({std::move(name), value, target, tol, std::abs(value - target) <= tol});
    };
    within("lambda1(0)", rep.lambda1_at_0, p.lambda_inner, 1e-4);
    within("lambda1(t0)", rep.lambda1_at_t0, p.lambda_inner, 1e-4);
    within("lambda2(0)", rep.lambda2_at_0, p.lambda_inner, 1e-4);
    within("lambda2(t0)", rep.lambda2_at_t0, p.lambda_inner, 1e-4);
    within("f(t0) - t0", p.f(rep.t0) - rep.t0, 0.0, 1e-10);
    within("beta(t0)", p.beta(rep.t0), 0.0, 1e-10);
    rep.ok = std::all_of(rep.checks.begin(), rep.checks.end(), [](const auto& c) { return c.ok; });
    return rep;
}

VoterSplit classify_voters(const Instance& inst, const FractionalAllocation& x,
                           std::span<const CandidateIndex> r) {
    if (x.x.size() != inst.num_candidates()) throw InvalidArgument("allocation dimension mismatch");
    CandidateSet sorted(r.begin(), r.end());
    std::sort(sorted.begin(), sorted.end());
    VoterSplit out;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
        double u = fractional_utility(inst, v, x.x);
        const double nearest = std::round(u);
        if (std::abs(u - nearest) <= 1e-9) u = nearest;
        const auto floor_u = static_cast<long>(std::floor(u));
        const auto hit = static_cast<long>(utility(inst, v, sorted));
        if (hit <= floor_u - 1) out.v1.push_back(v);
        if (hit <= floor_u - 2) out.v2.push_back(v);
    }
    const auto n = static_cast<double>(std::max<std::size_t>(inst.num_voters(), 1));
    out.delta1 = static_cast<double>(out.v1.size()) / n;
    out.delta2 = static_cast<double>(out.v2.size()) / n;
    return out;
}

bool accept_sample(const VoterSplit& split, const ParamSet& p) {
    const double lhs = split.delta1 + (std::exp(p.alpha) - 1.0 - 2.0 * p.alpha) * split.delta2;
    return lhs <= (1.0 + p.epsilon) * std::exp(-p.alpha);
}

const char* to_string(LevelCase c) {
    switch (c) {
        case LevelCase::greedy_full: return "greedy-full";
        case LevelCase::greedy_exhausted: return "greedy-exhausted";
        case LevelCase::base: return "base";
    }
    return "?";
}

GreedyOutcome greedy_phase(const Instance& inst, std::span<const VoterIndex> pool,
                           std::span<const CandidateIndex> excluded, double beta,
                           std::size_t gamma_cap, long k) {
    if (k <= 0) throw InvalidArgument("k must be positive");
    const std::size_t m = inst.num_candidates();
    const double threshold = std::max(beta * static_cast<double>(inst.num_voters()) / static_cast<double>(k), 1.0);
    std::vector<char> blocked(m, 0), active(inst.num_voters(), 0);
    for (auto c : excluded) blocked.at(c) = 1;
    for (auto v : pool) active.at(v) = 1;

    GreedyOutcome out;
    std::vector<std::size_t> count(m);
    while (out.chosen.size() < gamma_cap) {
        std::fill(count.begin(), count.end(), 0);
        for (VoterIndex v = 0; v < inst.num_voters(); ++v)
            if (active[v])
                for (auto c : inst.approvals(v)) ++count[c];
        std::size_t best = m;
        for (std::size_t c = 0; c < m; ++c) {
            if (blocked[c] || static_cast<double>(count[c]) < threshold) continue;
            if (best == m || count[c] > count[best]) best = c;
        }
        if (best == m) return out;
        std::vector<VoterIndex> gone;
        for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
            if (!active[v]) continue;
            const auto& a = inst.approvals(v);
            if (std::binary_search(a.begin(), a.end(), static_cast<CandidateIndex>(best))) {
                gone.push_back(v);
                active[v] = 0;
            }
        }
        blocked[best] = 1;
        out.chosen.push_back(static_cast<CandidateIndex>(best));
        out.removed.push_back(std::move(gone));
    }
    out.outcome = LevelCase::greedy_full;
    return out;
}

namespace {

std::uint64_t lcm_upto(std::size_t s) {
    std::uint64_t l = 1;
    for (std::uint64_t j = 2; j <= s; ++j) l = std::lcm(l, j);
    return l;
}

std::vector<std::uint64_t> approval_masks(const Instance& inst) {
    std::vector<std::uint64_t> masks(inst.num_voters(), 0);
    for (VoterIndex v = 0; v < inst.num_voters(); ++v)
        for (auto c : inst.approvals(v)) masks[v] |= std::uint64_t{1} << c;
    return masks;
}

// Scaled harmonic numbers L·H_j for j = 0..s.
std::vector<std::uint64_t> scaled_harmonics(std::size_t s) {
    const auto l = lcm_upto(std::max<std::size_t>(s, 1));
    std::vector<std::uint64_t> h(s + 1, 0);
    for (std::size_t j = 1; j <= s; ++j) h[j] = h[j - 1] + l / j;
    return h;
}

// Calls visit(mask) for each s-subset of [m] in lexicographic order of the
// sorted index lists; stops early when visit returns false.
template <class Visit>
void for_each_subset(std::size_t m, std::size_t s, Visit visit) {
    std::vector<std::size_t> idx(s);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        std::uint64_t mask = 0;
        for (auto i : idx) mask |= std::uint64_t{1} << i;
        if (!visit(mask)) return;
        std::size_t j = s;
        while (j > 0 && idx[j - 1] == m - s + (j - 1)) --j;
        if (j == 0) return;
        ++idx[j - 1];
        for (std::size_t q = j; q < s; ++q) idx[q] = idx[q - 1] + 1;
    }
}

CandidateSet mask_to_set(std::uint64_t mask) {
    CandidateSet out;
    while (mask) {
        out.push_back(static_cast<CandidateIndex>(std::countr_zero(mask)));
        mask &= mask - 1;
    }
    return out;
}

void check_pav_size(const Instance& inst, std::size_t s) {
    if (s > inst.num_candidates()) throw InvalidArgument("committee size exceeds the number of candidates");
    if (inst.num_candidates() > 30) throw GuardExceeded("exact PAV enumeration is limited to m <= 30");
}

bool exactly_stable(const Instance& inst, std::span<const CandidateIndex> s) {
    audit::StabilityQuery q;
    q.size_cap = audit::default_size_cap(inst, s.size());
    return audit::is_lambda_stable(inst, s, s.size(), 1.0, q);
}

bool audit_feasible(const Instance& inst, std::size_t s) {
    const auto cap = std::min(inst.num_candidates(), s);
    return inst.num_candidates() <= 24 || cap <= 6;
}

CandidateSet pad(CandidateSet s, std::size_t target, std::size_t m, std::vector<CandidateIndex>* added) {
    std::vector<char> used(m, 0);
    for (auto c : s) used[c] = 1;
    for (std::size_t c = 0; c < m && s.size() < target; ++c) {
        if (used[c]) continue;
        s.push_back(static_cast<CandidateIndex>(c));
        if (added) added->push_back(static_cast<CandidateIndex>(c));
    }
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace

std::uint64_t pav_score_scaled(const Instance& inst, std::span<const CandidateIndex> committee,
                               std::size_t s) {
    const auto h = scaled_harmonics(std::max(s, committee.size()));
    CandidateSet sorted(committee.begin(), committee.end());
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t score = 0;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v) score += h[utility(inst, v, sorted)];
    return score;
}

CandidateSet pav_exact(const Instance& inst, std::size_t s) {
    check_pav_size(inst, s);
    if (s == 0) return {};
    const auto masks = approval_masks(inst);
    const auto h = scaled_harmonics(s);
    std::uint64_t best_mask = 0, best = 0;
    bool any = false;
    for_each_subset(inst.num_candidates(), s, [&](std::uint64_t mask) {
        std::uint64_t score = 0;
        for (auto a : masks) score += h[std::popcount(a & mask)];
        if (!any || score > best) best = score, best_mask = mask, any = true;
        return true;
    });
    return mask_to_set(best_mask);
}

BaseCaseResult base_case(const Instance& inst, std::size_t k_target) {
    const std::size_t m = inst.num_candidates();
    if (k_target > m) throw InvalidArgument("K exceeds the number of candidates");
    BaseCaseResult out;
    const std::size_t s = std::min<std::size_t>(k_target, 8);
    if (s == m) {
        out.stable = pad({}, m, m, nullptr);
        out.verified = true;
    } else if (m > 30) {
        // Beyond exact PAV: sequential PAV, unverified.
        const auto masks = approval_masks(inst);
        std::vector<std::size_t> have(inst.num_voters(), 0);
        std::vector<char> used(m, 0);
        for (std::size_t step = 0; step < s; ++step) {
            std::size_t best = m;
            double gain_best = -1.0;
            for (std::size_t c = 0; c < m; ++c) {
                if (used[c]) continue;
                double gain = 0.0;
                for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
                    const auto& a = inst.approvals(v);
                    if (std::binary_search(a.begin(), a.end(), static_cast<CandidateIndex>(c)))
                        gain += 1.0 / static_cast<double>(have[v] + 1);
                }
                if (gain > gain_best) gain_best = gain, best = c;
            }
            used[best] = 1;
            for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
                const auto& a = inst.approvals(v);
                if (std::binary_search(a.begin(), a.end(), static_cast<CandidateIndex>(best))) ++have[v];
            }
            out.stable.push_back(static_cast<CandidateIndex>(best));
        }
        std::sort(out.stable.begin(), out.stable.end());
    } else {
        out.stable = pav_exact(inst, s);
        if (audit_feasible(inst, s)) {
            out.verified = exactly_stable(inst, out.stable);
            if (!out.verified) {
                // Walk committees by decreasing PAV score until one verifies.
                out.escalated = true;
                const auto masks = approval_masks(inst);
                const auto h = scaled_harmonics(s);
                std::vector<std::pair<std::uint64_t, std::uint64_t>> ranked;
                for_each_subset(m, s, [&](std::uint64_t mask) {
                    std::uint64_t score = 0;
                    for (auto a : masks) score += h[std::popcount(a & mask)];
                    ranked.emplace_back(score, mask);
                    return true;
                });
                std::stable_sort(ranked.begin(), ranked.end(),
                                 [](const auto& a, const auto& b) { return a.first > b.first; });
                for (const auto& [score, mask] : ranked) {
                    auto cand = mask_to_set(mask);
                    if (exactly_stable(inst, cand)) {
                        out.stable = std::move(cand);
                        out.verified = true;
                        break;
                    }
                }
                if (!out.verified) throw Error("no exactly stable committee of size " + std::to_string(s) + " found");
            }
        }
    }
    out.padded = pad(out.stable, k_target, m, nullptr);
    return out;
}

namespace {

struct Frame {
    Instance inst;
    std::vector<CandidateIndex> cand;  // local → original candidate
    std::vector<VoterIndex> voter;     // local → original voter
};

void recurse(const Frame& fr, std::size_t target, const ParamSet& params, CounterRng& rng,
             std::size_t depth, std::vector<LevelRecord>& levels, CandidateSet& out) {
    const Instance& inst = fr.inst;
    const std::size_t m = inst.num_candidates();
    if (target == 0 || m == 0) return;
    LevelRecord rec;
    rec.depth = depth;
    rec.num_voters = inst.num_voters();
    rec.num_candidates = m;
    rec.target = target;
    rec.candidates = fr.cand;

    auto finish_base = [&](const CandidateSet& local, bool verified) {
        rec.outcome = LevelCase::base;
        for (auto c : local) rec.chosen.push_back(fr.cand[c]);
        std::sort(rec.chosen.begin(), rec.chosen.end());
        rec.verified = verified;
        out.insert(out.end(), rec.chosen.begin(), rec.chosen.end());
        levels.push_back(std::move(rec));
    };

    if (m <= target) {
        CandidateSet all(m);
        std::iota(all.begin(), all.end(), 0);
        finish_base(all, true);
        return;
    }
    const bool any_voter = std::any_of(inst.voters().begin(), inst.voters().end(),
                                       [](const Voter& v) { return !v.approvals.empty(); });
    if (!any_voter) {
        // Nobody left to satisfy; the final padding fills these seats.
        finish_base({}, true);
        return;
    }
    const long k = static_cast<long>(std::ceil(params.eta * static_cast<double>(target) - 1e-12));
    auto gamma_cap = static_cast<std::size_t>(std::ceil(params.gamma * static_cast<double>(k) - 1e-12));
    if (target <= params.base_threshold || 2 * static_cast<std::size_t>(k) > target) {
        const auto base = base_case(inst, target);
        finish_base(base.stable, base.verified);
        return;
    }
    // Keep κ + γ_cap ≤ target: lower α toward 2, then trim γ_cap.
    auto kappa = static_cast<std::size_t>(std::ceil(params.alpha * static_cast<double>(k) - 1e-9));
    if (kappa + gamma_cap > target) {
        kappa = std::max<std::size_t>(2 * static_cast<std::size_t>(k), target > gamma_cap ? target - gamma_cap : 0);
        if (kappa + gamma_cap > target) gamma_cap = target - kappa;
    }
    kappa = std::min(kappa, m);
    ParamSet level = params;
    level.alpha = std::min(params.alpha, static_cast<double>(kappa) / static_cast<double>(k));
    if (level.alpha < 2.0) level.alpha = 2.0;

    const auto eq = eq::compute_lindahl(inst, k);
    const auto xp = sr::scale_and_round_marginals(eq.x, level.alpha, m);
    const sr::FixedSizeSampler sampler(sr::fit_max_entropy(xp), xp.kappa);

    rec.k = k;
    rec.kappa = xp.kappa;
    rec.alpha = level.alpha;
    rec.gamma_cap = gamma_cap;
    rec.x = eq.x.x;

    CandidateSet r;
    VoterSplit split;
    for (;;) {
        r = sampler.sample(rng);
        split = classify_voters(inst, eq.x, r);
        ++rec.resamples;
        if (accept_sample(split, level)) break;
        if (rec.resamples >= params.max_resamples)
            throw ResampleExhausted("no sample passed the acceptance test in " +
                                        std::to_string(params.max_resamples) + " draws (last delta1 " +
                                        std::to_string(split.delta1) + ", delta2 " +
                                        std::to_string(split.delta2) + ")",
                                    split.delta1, split.delta2);
    }
    rec.delta1 = split.delta1;
    rec.delta2 = split.delta2;
    rec.t = std::clamp(split.delta2, 0.0, level.t0());
    rec.beta = level.beta(rec.t);

    std::vector<VoterIndex> pool;
    std::set_difference(split.v1.begin(), split.v1.end(), split.v2.begin(), split.v2.end(),
                        std::back_inserter(pool));
    const auto greedy = greedy_phase(inst, pool, r, rec.beta, gamma_cap, k);
    rec.outcome = greedy.outcome;

    std::vector<VoterIndex> next_voters = split.v2;
    if (greedy.outcome == LevelCase::greedy_full) {
        std::vector<char> gone(inst.num_voters(), 0);
        for (const auto& g : greedy.removed)
            for (auto v : g) gone[v] = 1;
        for (auto v : pool)
            if (!gone[v]) next_voters.push_back(v);
        std::sort(next_voters.begin(), next_voters.end());
    }
    std::vector<char> taken(m, 0);
    for (auto c : r) taken[c] = 1;
    for (auto c : greedy.chosen) taken[c] = 1;
    std::vector<CandidateIndex> next_cands;
    for (std::size_t c = 0; c < m; ++c)
        if (!taken[c]) next_cands.push_back(static_cast<CandidateIndex>(c));

    for (auto c : r) rec.r.push_back(fr.cand[c]);
    std::sort(rec.r.begin(), rec.r.end());
    for (auto c : greedy.chosen) rec.r_prime.push_back(fr.cand[c]);
    for (const auto& g : greedy.removed) {
        std::vector<VoterIndex> orig;
        for (auto v : g) orig.push_back(fr.voter[v]);
        rec.removed.push_back(std::move(orig));
    }
    rec.next_target = target - static_cast<std::size_t>(xp.kappa) - gamma_cap;
    out.insert(out.end(), rec.r.begin(), rec.r.end());
    out.insert(out.end(), rec.r_prime.begin(), rec.r_prime.end());
    const auto next_target = rec.next_target;
    levels.push_back(std::move(rec));

    if (next_target == 0 || next_cands.empty()) return;
    Frame child{inst.restrict(next_voters, next_cands), {}, {}};
    for (auto c : next_cands) child.cand.push_back(fr.cand[c]);
    for (auto v : next_voters) child.voter.push_back(fr.voter[v]);
    recurse(child, next_target, params, rng, depth + 1, levels, out);
}

}  // namespace

CandidateSet select_recursive(const Instance& inst, std::size_t k_target, const ParamSet& params,
                              CounterRng& rng, std::vector<LevelRecord>& levels) {
    params.validate();
    if (k_target == 0) throw InvalidArgument("target size must be positive");
    if (k_target > inst.num_candidates()) throw InvalidArgument("K exceeds the number of candidates");
    Frame root{inst, {}, {}};
    root.cand.resize(inst.num_candidates());
    std::iota(root.cand.begin(), root.cand.end(), 0);
    root.voter.resize(inst.num_voters());
    std::iota(root.voter.begin(), root.voter.end(), 0);
    CandidateSet out;
    recurse(root, k_target, params, rng, 0, levels, out);
    std::sort(out.begin(), out.end());
    return out;
}

SelectionResult select_committee(const Instance& inst, std::size_t k, const ParamSet& params,
                                 std::uint64_t seed) {
    params.validate();
    if (k == 0) throw InvalidArgument("K must be positive");
    if (k > inst.num_candidates()) throw InvalidArgument("K exceeds the number of candidates");
    SelectionResult res;
    res.seed = seed;
    res.certified_bound = params.certified_bound();
    res.stated_bound = params.lambda_final;
    res.reduced_target = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(static_cast<double>(k) / (1.0 + 2.0 * params.rho) - 1e-12)));
    CounterRng rng(seed);
    auto core = select_recursive(inst, res.reduced_target, params, rng, res.levels);
    res.committee.target_size = k;
    res.committee.members = pad(std::move(core), k, inst.num_candidates(), &res.padding);
    return res;
}

}  // namespace corestable::sel
