#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "corestable/audit.hpp"
#include "corestable/equilibrium.hpp"
#include "corestable/error.hpp"
#include "corestable/sampler.hpp"
#include "corestable/selection.hpp"
#include "fixtures.hpp"

using namespace corestable;
using doctest::Approx;

TEST_SUITE("selection") {

TEST_CASE("default parameters: derived quantities") {
    const sel::ParamSet p;
    CHECK(p.t0() == Approx(0.02687223687896964).epsilon(1e-12));
    CHECK(p.f(p.t0()) == Approx(p.t0()).epsilon(1e-12));
    CHECK(std::abs(p.beta(p.t0())) <= 1e-10);
    CHECK(p.beta(0.0) == Approx(0.29369).epsilon(1e-5));
    CHECK(p.beta(0.0) == Approx(3.606655 * 0.358696 - 1.0));
    CHECK(p.beta(1.0) == 0.0);
    CHECK(p.certified_bound() == Approx(3.65737).epsilon(1e-5));
}

TEST_CASE("parameter verification: three of four endpoints hit lambda") {
    const auto r = sel::verify_parameters(sel::ParamSet{});
    CHECK(r.lambda2_at_0 == Approx(3.606655).epsilon(1e-9));
    CHECK(std::abs(r.lambda2_at_t0 - 3.606655) <= 1e-4);
    CHECK(std::abs(r.lambda1_at_t0 - 3.606655) <= 1e-4);
    // With the published gamma, lambda1(0) overshoots by 2.4e-4.
    CHECK(r.lambda1_at_0 == Approx(3.6068937776).epsilon(1e-9));
    CHECK_FALSE(r.ok);
}

TEST_CASE("parameter verification passes at the balanced gamma") {
    sel::ParamSet p;
    p.gamma = p.balanced_gamma();
    CHECK(p.gamma == Approx(0.3033153085).epsilon(1e-9));
    const auto r = sel::verify_parameters(p);
    CHECK(r.ok);
    CHECK(std::abs(r.lambda1_at_0 - r.lambda2_at_t0) <= 2e-5);
}

TEST_CASE("invalid parameters") {
    sel::ParamSet p;
    p.alpha = 1.5;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = {};
    p.eta = 1.2;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = {};
    p.lambda_inner = 2.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("voter classification on the two-party election") {
    const auto e = fixtures::example1();
    const FractionalAllocation x{std::vector<double>(5, 0.6), 3};
    auto s = sel::classify_voters(e, x, CandidateSet{0, 3});
    CHECK(s.v1.empty());
    CHECK(s.v2.empty());
    s = sel::classify_voters(e, x, CandidateSet{3, 4});
    CHECK(s.v1 == std::vector<VoterIndex>{0, 1, 2});
    CHECK(s.v2.empty());
    CHECK(s.delta1 == Approx(0.6));
    CHECK(s.delta2 == 0.0);
}

TEST_CASE("integral allocations inside R leave nobody behind") {
    const auto inst = fixtures::impartial(12, 8, 0.4, 3);
    const FractionalAllocation x{{1, 0, 1, 1, 0, 0, 1, 0}, 4};
    CHECK(sel::classify_voters(inst, x, CandidateSet{0, 2, 3, 6}).v1.empty());
}

TEST_CASE("utilities within 1e-9 of an integer are snapped before flooring") {
    const auto inst = Instance::from_approvals(3, {{0, 1, 2}});
    const FractionalAllocation x{{0.7, 0.7, 0.6 - 5e-10}, 2};
    const auto s = sel::classify_voters(inst, x, CandidateSet{0});
    CHECK(s.v1 == std::vector<VoterIndex>{0});
}

TEST_CASE("acceptance test") {
    sel::ParamSet p;
    const double ea = std::exp(-p.alpha);
    CHECK(sel::accept_sample({{}, {}, 0.0, 0.0}, p));
    CHECK_FALSE(sel::accept_sample({{}, {}, ea * (1 + p.epsilon) * 1.01, 0.0}, p));
    CHECK(sel::accept_sample({{}, {}, ea, 0.0}, p));
    CHECK_FALSE(sel::accept_sample({{}, {}, 0.0, ea}, p));
}

TEST_CASE("greedy: empty pool exhausts immediately") {
    const auto g = sel::greedy_phase(fixtures::example1(), {}, {}, 0.3, 2, 3);
    CHECK(g.chosen.empty());
    CHECK(g.outcome == sel::LevelCase::greedy_exhausted);
}

TEST_CASE("greedy: one popular candidate fills a single slot") {
    std::vector<CandidateSet> a(10, CandidateSet{2});
    const auto inst = Instance::from_approvals(4, a);
    std::vector<VoterIndex> pool(10);
    std::iota(pool.begin(), pool.end(), 0);
    // threshold β·n/k = 0.3·10/1 = 3
    const auto g = sel::greedy_phase(inst, pool, {}, 0.3, 1, 1);
    CHECK(g.chosen == std::vector<CandidateIndex>{2});
    CHECK(g.removed.at(0).size() == 10);
    CHECK(g.outcome == sel::LevelCase::greedy_full);
}

TEST_CASE("greedy: groups below threshold do not qualify") {
    std::vector<CandidateSet> a(4, CandidateSet{0});
    a.insert(a.end(), 4, CandidateSet{1});
    const auto inst = Instance::from_approvals(2, a);
    std::vector<VoterIndex> pool(8);
    std::iota(pool.begin(), pool.end(), 0);
    // threshold 0.625·8/1 = 5
    const auto g = sel::greedy_phase(inst, pool, {}, 0.625, 2, 1);
    CHECK(g.chosen.empty());
    CHECK(g.outcome == sel::LevelCase::greedy_exhausted);
}

TEST_CASE("greedy: excluded candidates, disjoint removals, ties to lowest index") {
    const auto inst = Instance::from_approvals(4, {{0, 1}, {0, 1}, {1, 2}, {2, 3}, {3}, {3}});
    const std::vector<VoterIndex> pool{0, 1, 2, 3, 4, 5};
    const auto g = sel::greedy_phase(inst, pool, CandidateSet{3}, 0.0, 3, 6);
    CHECK(g.chosen == std::vector<CandidateIndex>{1, 2});
    CHECK(g.removed[0] == std::vector<VoterIndex>{0, 1, 2});
    CHECK(g.removed[1] == std::vector<VoterIndex>{3});
    CHECK(g.outcome == sel::LevelCase::greedy_exhausted);
}

TEST_CASE("PAV on the two-party election") {
    const auto e = fixtures::example1();
    const auto s = sel::pav_exact(e, 3);
    CHECK(s == CandidateSet{0, 1, 3});
    CHECK(sel::pav_score_scaled(e, s, 3) == 39);                // 6.5 · lcm(1,2,3)
    CHECK(sel::pav_score_scaled(e, CandidateSet{0, 1, 2}, 3) == 33);  // 5.5 · 6
    CHECK(sel::pav_exact(e, 5) == CandidateSet{0, 1, 2, 3, 4});
}

TEST_CASE("PAV with one voter picks approved candidates, lowest indices first") {
    const auto inst = Instance::from_approvals(6, {{1, 3, 4}});
    CHECK(sel::pav_exact(inst, 2) == CandidateSet{1, 3});
    CHECK(sel::pav_exact(inst, 4) == CandidateSet{0, 1, 3, 4});
    CHECK_THROWS_AS(sel::pav_exact(fixtures::impartial(3, 31, 0.2, 1), 2), GuardExceeded);
}

TEST_CASE("base case") {
    const auto e = fixtures::example1();
    auto b = sel::base_case(e, 3);
    CHECK(b.stable == CandidateSet{0, 1, 3});
    CHECK(b.padded == CandidateSet{0, 1, 3});
    CHECK(b.verified);
    CHECK_FALSE(b.escalated);
    b = sel::base_case(Instance::from_approvals(3, {{1}, {1}, {1, 2}}), 1);
    CHECK(b.padded == CandidateSet{1});
    b = sel::base_case(e, 5);
    CHECK(b.padded == CandidateSet{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(sel::base_case(e, 6), InvalidArgument);
}

TEST_CASE("base case pads beyond eight with the lowest free indices") {
    const auto inst = fixtures::impartial(12, 14, 0.3, 5);
    const auto b = sel::base_case(inst, 11);
    CHECK(b.stable.size() == 8);
    CHECK(b.padded.size() == 11);
    CHECK(std::includes(b.padded.begin(), b.padded.end(), b.stable.begin(), b.stable.end()));
    CHECK(b.verified);
}

TEST_CASE("select: the two-party election at K = 3") {
    const auto r = sel::select_committee(fixtures::example1(), 3, sel::ParamSet{}, 42);
    CHECK(r.committee.members == CandidateSet{0, 1, 3});
    CHECK(r.padding.empty());
    CHECK(r.reduced_target == 3);
    CHECK(audit::stability_ratio_exact(fixtures::example1(), r.committee.members, 3, 3).ratio <= 1.0);
}

TEST_CASE("select: K = m returns everything") {
    const auto inst = fixtures::impartial(6, 7, 0.3, 2);
    const auto r = sel::select_committee(inst, 7, sel::ParamSet{}, 1);
    CHECK(r.committee.members.size() == 7);
    CHECK(audit::stability_ratio_exact(inst, r.committee.members, 7, 7).ratio == 0.0);
}

TEST_CASE("select: recursion path on an impartial election") {
    sel::ParamSet p;
    p.base_threshold = 8;
    const auto inst = fixtures::impartial(30, 22, 0.3, 1);
    const auto r = sel::select_committee(inst, 10, p, 1);
    CHECK(r.committee.members.size() == 10);
    REQUIRE_FALSE(r.levels.empty());
    CHECK(r.levels.front().outcome != sel::LevelCase::base);
    const auto a = audit::stability_ratio_exact(inst, r.committee.members, 10, 10);
    CHECK(a.ratio <= 3.651);
}

TEST_CASE("select: party list, K = 40 at full threshold") {
    GenSpec g;
    g.model = GenModel::party_list;
    g.voter_parties = {30, 20};
    g.candidate_parties = {40, 30};
    g.num_voters = 50;
    g.num_candidates = 70;
    const auto inst = generate(g);
    const auto r = sel::select_committee(inst, 40, sel::ParamSet{}, 7);
    CHECK(r.committee.members.size() == 40);
    CounterRng rng(7);
    CHECK(audit::stability_ratio_heuristic(inst, r.committee.members, 40, 6, rng).ratio <= 3.651);
}

TEST_CASE("select: level invariants") {
    sel::ParamSet p;
    p.base_threshold = 6;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto inst = seed % 2 ? fixtures::impartial(12 + seed, 14 + seed % 9, 0.3, seed)
                                   : fixtures::euclidean(12 + seed, 14 + seed % 9, 0.2, seed);
        const std::size_t K = 8 + seed % 6;
        const auto r = sel::select_committee(inst, K, p, seed);
        CHECK(r.committee.members.size() == K);
        CHECK(std::set<CandidateIndex>(r.committee.members.begin(), r.committee.members.end()).size() == K);
        std::set<CandidateIndex> chosen(r.padding.begin(), r.padding.end());
        std::size_t last_target = r.reduced_target + 1;
        for (const auto& l : r.levels) {
            CHECK(l.target < last_target);
            last_target = l.target;
            chosen.insert(l.r.begin(), l.r.end());
            chosen.insert(l.r_prime.begin(), l.r_prime.end());
            chosen.insert(l.chosen.begin(), l.chosen.end());
            if (l.outcome == sel::LevelCase::base) continue;
            CHECK(l.r.size() == static_cast<std::size_t>(l.kappa));
            CHECK(l.r_prime.size() <= l.gamma_cap);
            CHECK(l.gamma_cap <= static_cast<std::size_t>(std::ceil(p.gamma * l.k - 1e-12)));
            CHECK(l.delta2 <= l.delta1);
            for (auto c : l.r_prime) CHECK_FALSE(std::binary_search(l.r.begin(), l.r.end(), c));
            std::set<VoterIndex> removed;
            for (const auto& g : l.removed)
                for (auto v : g) CHECK(removed.insert(v).second);
        }
        CHECK(chosen == std::set<CandidateIndex>(r.committee.members.begin(), r.committee.members.end()));
    }
}

TEST_CASE("select: identical inputs give identical results") {
    sel::ParamSet p;
    p.base_threshold = 8;
    const auto inst = fixtures::euclidean(25, 20, 0.2, 9);
    const auto a = sel::select_committee(inst, 10, p, 5);
    const auto b = sel::select_committee(inst, 10, p, 5);
    CHECK(a.committee == b.committee);
    REQUIRE(a.levels.size() == b.levels.size());
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
        CHECK(a.levels[i].r == b.levels[i].r);
        CHECK(a.levels[i].x == b.levels[i].x);
        CHECK(a.levels[i].resamples == b.levels[i].resamples);
    }
}

TEST_CASE("select: errors") {
    const auto e = fixtures::example1();
    CHECK_THROWS_AS(sel::select_committee(e, 6, sel::ParamSet{}, 1), InvalidArgument);
    CHECK_THROWS_AS(sel::select_committee(e, 0, sel::ParamSet{}, 1), InvalidArgument);
    sel::ParamSet p;
    p.base_threshold = 4;
    p.epsilon = -1.0;
    CHECK_THROWS_AS(sel::select_committee(e, 5, p, 1), InvalidArgument);
}

TEST_CASE("select: a budget smaller than the needed draws is reported") {
    // Five voters, each approving a private block of ten candidates: a sample
    // missing a whole block puts a fifth of the voters in V1 and is rejected.
    std::vector<CandidateSet> a;
    for (CandidateIndex v = 0; v < 5; ++v) {
        CandidateSet block(10);
        std::iota(block.begin(), block.end(), 10 * v);
        a.push_back(block);
    }
    const auto inst = Instance::from_approvals(50, a);
    sel::ParamSet p;
    p.base_threshold = 8;
    const auto r = sel::select_committee(inst, 13, p, 1);
    REQUIRE(r.levels.front().resamples == 3);
    auto tight = p;
    tight.max_resamples = 2;
    try {
        sel::select_committee(inst, 13, tight, 1);
        FAIL("expected the resampling budget to run out");
    } catch (const sel::ResampleExhausted& ex) {
        CHECK(ex.delta1() + (std::exp(p.alpha) - 1 - 2 * p.alpha) * ex.delta2() >
              (1 + p.epsilon) * std::exp(-p.alpha));
    }
}

TEST_CASE("Monte Carlo mean of the acceptance statistic") {
    const sel::ParamSet p;
    const double c = std::exp(p.alpha) - 1.0 - 2.0 * p.alpha;
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        const auto inst = fixtures::impartial(30, 20, 0.3, 40 + seed);
        const long k = 4;
        const auto e = eq::compute_lindahl(inst, k);
        const auto xp = sr::scale_and_round_marginals(e.x, p.alpha, inst.num_candidates());
        const sr::FixedSizeSampler sampler(sr::fit_max_entropy(xp), xp.kappa);
        CounterRng rng(seed);
        const int draws = 2000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const auto s = sel::classify_voters(inst, e.x, sampler.sample(rng));
            const double z = s.delta1 + c * s.delta2;
            sum += z;
            sq += z * z;
        }
        const double mean = sum / draws;
        const double se = std::sqrt(std::max(0.0, sq / draws - mean * mean) / draws);
        CHECK(mean <= std::exp(-p.alpha) + 3 * se);
    }
}

}
