#include "corestable/audit.hpp"

#include <algorithm>
#include <bit>
#include <future>
#include <numeric>

#include "corestable/error.hpp"

namespace corestable::audit {

namespace {

using Mask = std::uint64_t;

// Voters that could ever prefer some T: approval mask and current utility.
struct Dissatisfied {
    std::vector<Mask> approvals;
    std::vector<int> utility;
};

Dissatisfied collect(const Instance& inst, std::span<const CandidateIndex> s) {
    Dissatisfied d;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v) {
        const auto& a = inst.approvals(v);
        const auto u = utility(inst, v, s);
        if (a.size() <= u) continue;
        Mask mask = 0;
        for (const auto c : a) mask |= Mask{1} << c;
        d.approvals.push_back(mask);
        d.utility.push_back(static_cast<int>(u));
    }
    return d;
}

std::size_t count_mask(const Dissatisfied& d, Mask t) {
    std::size_t cov = 0;
    for (std::size_t j = 0; j < d.approvals.size(); ++j) {
        cov += std::popcount(d.approvals[j] & t) > d.utility[j];
    }
    return cov;
}

// Better means strictly larger coverage/|T|, compared exactly.
bool better(std::size_t cov_a, std::size_t size_a, std::size_t cov_b, std::size_t size_b) {
    return cov_a * size_b > cov_b * size_a;
}

struct ClassBest {
    std::size_t coverage = 0;
    Mask t = 0;
    std::uint64_t examined = 0;
};

ClassBest scan_size(const Dissatisfied& d, std::size_t m, std::size_t size) {
    ClassBest best;
    if (size == 0 || size > m) return best;
    const Mask limit = m == 64 ? ~Mask{0} : (Mask{1} << m) - 1;
    Mask t = (size == 64) ? ~Mask{0} : (Mask{1} << size) - 1;
    for (;;) {
        ++best.examined;
        const auto cov = count_mask(d, t);
        if (cov > best.coverage) {
            best.coverage = cov;
            best.t = t;
        }
        // Gosper's hack: next mask with the same popcount.
        const Mask low = t & (~t + 1);
        const Mask ripple = t + low;
        if (ripple == 0 || (ripple & ~limit) != 0) break;
        const Mask next = (((ripple ^ t) >> 2) / low) | ripple;
        if ((next & ~limit) != 0) break;
        t = next;
    }
    return best;
}

CandidateSet mask_to_set(Mask t) {
    CandidateSet out;
    while (t) {
        out.push_back(static_cast<CandidateIndex>(std::countr_zero(t)));
        t &= t - 1;
    }
    return out;
}

double ratio_of(std::size_t cov, std::size_t size, std::size_t k, std::size_t n) {
    if (cov == 0 || size == 0 || n == 0) return 0.0;
    return static_cast<double>(cov) * static_cast<double>(k) /
           (static_cast<double>(size) * static_cast<double>(n));
}

}  // namespace

std::size_t coverage(const Instance& inst, std::span<const CandidateIndex> s,
                     std::span<const CandidateIndex> t) {
    std::size_t cov = 0;
    for (VoterIndex v = 0; v < inst.num_voters(); ++v) cov += prefers(inst, v, t, s);
    return cov;
}

std::size_t default_size_cap(const Instance& inst, std::size_t k_target) {
    return std::min(inst.num_candidates(), k_target);
}

AuditResult stability_ratio_exact(const Instance& inst, std::span<const CandidateIndex> s,
                                  std::size_t k_target, std::size_t size_cap) {
    const auto m = inst.num_candidates();
    if (size_cap > m) throw InvalidArgument("size cap exceeds the number of candidates");
    if (m > 64 || (m > 24 && size_cap > 6)) {
        throw GuardExceeded("exact audit needs m <= 24 or size cap <= 6 (m = " +
                            std::to_string(m) + ", cap = " + std::to_string(size_cap) + ")");
    }
    const auto d = collect(inst, s);
    std::vector<std::future<ClassBest>> jobs;
    for (std::size_t size = 1; size <= size_cap; ++size) {
        jobs.push_back(std::async(std::launch::async, scan_size, std::cref(d), m, size));
    }
    AuditResult r;
    r.mode = Mode::exact;
    std::size_t best_size = 1;
    Mask best_t = 0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto cls = jobs[j].get();
        r.examined += cls.examined;
        const std::size_t size = j + 1;
        if (cls.coverage > 0 && (best_t == 0 || better(cls.coverage, size, r.coverage, best_size))) {
            r.coverage = cls.coverage;
            best_t = cls.t;
            best_size = size;
        }
    }
    if (best_t != 0) {
        r.worst_t = mask_to_set(best_t);
        r.ratio = ratio_of(r.coverage, best_size, k_target, inst.num_voters());
    }
    return r;
}

AuditResult stability_ratio_heuristic(const Instance& inst, std::span<const CandidateIndex> s,
                                      std::size_t k_target, std::size_t budget,
                                      CounterRng& rng) {
    if (budget == 0) throw InvalidArgument("heuristic budget must be at least 1");
    const auto m = inst.num_candidates();
    const auto n = inst.num_voters();
    AuditResult r;
    r.mode = Mode::heuristic;
    if (m == 0 || n == 0) return r;

    std::vector<std::size_t> base(n);
    for (VoterIndex v = 0; v < n; ++v) base[v] = utility(inst, v, s);
    // approvers[c] = voters approving c
    std::vector<std::vector<VoterIndex>> approvers(m);
    for (VoterIndex v = 0; v < n; ++v) {
        for (const auto c : inst.approvals(v)) approvers[c].push_back(v);
    }

    // counts[v] = |A_v ∩ T| for the current T
    std::vector<std::size_t> counts(n, 0);
    std::vector<char> in_t(m, 0);
    std::size_t cov = 0;
    const auto add = [&](CandidateIndex c) {
        in_t[c] = 1;
        for (const auto v : approvers[c]) {
            if (++counts[v] == base[v] + 1) ++cov;
        }
    };
    const auto remove = [&](CandidateIndex c) {
        in_t[c] = 0;
        for (const auto v : approvers[c]) {
            if (counts[v]-- == base[v] + 1) --cov;
        }
    };
    const auto gain_of = [&](CandidateIndex c) {
        std::size_t g = 0;
        for (const auto v : approvers[c]) g += counts[v] == base[v];
        return g;
    };
    const auto record = [&](const std::vector<CandidateIndex>& t) {
        ++r.examined;
        if (cov == 0) return;
        if (r.worst_t.empty() || better(cov, t.size(), r.coverage, r.worst_t.size())) {
            r.coverage = cov;
            r.worst_t = normalize_set(t);
        }
    };

    const std::size_t max_size = std::min(m, (k_target + 1) / 2 == 0 ? 1 : (k_target + 1) / 2);
    for (std::size_t restart = 0; restart < budget; ++restart) {
        for (std::size_t size = 1; size <= max_size; ++size) {
            std::fill(counts.begin(), counts.end(), 0);
            std::fill(in_t.begin(), in_t.end(), 0);
            cov = 0;
            std::vector<CandidateIndex> t;
            if (restart > 0) {
                const auto c = static_cast<CandidateIndex>(rng.below(m));
                add(c);
                t.push_back(c);
            }
            while (t.size() < size) {
                std::size_t best_gain = 0;
                CandidateIndex pick = 0;
                bool found = false;
                for (CandidateIndex c = 0; c < m; ++c) {
                    if (in_t[c]) continue;
                    const auto g = gain_of(c);
                    if (!found || g > best_gain) {
                        best_gain = g;
                        pick = c;
                        found = true;
                    }
                }
                add(pick);
                t.push_back(pick);
            }
            record(t);
            // Single-swap local search on coverage at fixed size.
            for (bool improved = true; improved;) {
                improved = false;
                for (std::size_t pos = 0; pos < t.size() && !improved; ++pos) {
                    const auto out = t[pos];
                    const auto before = cov;
                    remove(out);
                    for (CandidateIndex c = 0; c < m; ++c) {
                        if (in_t[c] || c == out) continue;
                        add(c);
                        if (cov > before) {
                            t[pos] = c;
                            improved = true;
                            break;
                        }
                        remove(c);
                    }
                    if (!improved) add(out);
                }
                if (improved) record(t);
            }
        }
    }
    if (!r.worst_t.empty()) r.ratio = ratio_of(r.coverage, r.worst_t.size(), k_target, n);
    return r;
}

bool is_lambda_stable(const Instance& inst, std::span<const CandidateIndex> s, std::size_t k_target,
                      double lambda, const StabilityQuery& query) {
    AuditResult r;
    if (query.mode == Mode::exact) {
        const auto cap = query.size_cap == 0 ? default_size_cap(inst, k_target) : query.size_cap;
        r = stability_ratio_exact(inst, s, k_target, cap);
    } else {
        CounterRng rng(query.seed);
        r = stability_ratio_heuristic(inst, s, k_target, query.budget, rng);
    }
    if (r.coverage == 0) return true;
    // Violation iff coverage ≥ λ|T|n/K.
    return static_cast<double>(r.coverage) * static_cast<double>(k_target) <
           lambda * static_cast<double>(r.worst_t.size()) * static_cast<double>(inst.num_voters());
}

}  // namespace corestable::audit
