#include <doctest.h>

#include "corestable/audit.hpp"
#include "corestable/error.hpp"
#include "corestable/selection.hpp"
#include "fixtures.hpp"

using namespace corestable;
using doctest::Approx;

TEST_SUITE("audit") {

TEST_CASE("the all-{a,b,c} committee is blocked by {d}") {
    const auto e = fixtures::example1();
    const auto r = audit::stability_ratio_exact(e, CandidateSet{0, 1, 2}, 3, 5);
    CHECK(r.ratio == Approx(1.2));
    CHECK(r.worst_t == CandidateSet{3});
    CHECK(r.coverage == 2);
    CHECK(r.mode == audit::Mode::exact);
    CHECK(r.examined == 31);
}

TEST_CASE("{a,b,d} is stable with ratio 0.6") {
    const auto r = audit::stability_ratio_exact(fixtures::example1(), CandidateSet{0, 1, 3}, 3, 5);
    CHECK(r.ratio == Approx(0.6));
}

TEST_CASE("the full candidate set has ratio 0") {
    const auto e = fixtures::example1();
    CHECK(audit::stability_ratio_exact(e, CandidateSet{0, 1, 2, 3, 4}, 5, 5).ratio == 0.0);
    CounterRng rng(1);
    CHECK(audit::stability_ratio_heuristic(e, CandidateSet{0, 1, 2, 3, 4}, 5, 4, rng).ratio == 0.0);
}

TEST_CASE("heuristic finds {d} against {a,b,c}") {
    CounterRng rng(2);
    const auto r = audit::stability_ratio_heuristic(fixtures::example1(), CandidateSet{0, 1, 2}, 3, 4, rng);
    CHECK(r.ratio == Approx(1.2));
    CHECK(r.worst_t == CandidateSet{3});
    CHECK(r.mode == audit::Mode::heuristic);
}

TEST_CASE("lambda-stability decisions") {
    const auto e = fixtures::example1();
    CHECK_FALSE(audit::is_lambda_stable(e, CandidateSet{0, 1, 2}, 3, 1.0));
    CHECK(audit::is_lambda_stable(e, CandidateSet{0, 1, 3}, 3, 1.0));
    CHECK(audit::is_lambda_stable(e, CandidateSet{0, 1, 2}, 3, 1.2 + 1e-9));
    CHECK(audit::is_lambda_stable(e, CandidateSet{}, 3, 4.0));
    audit::StabilityQuery h;
    h.mode = audit::Mode::heuristic;
    CHECK_FALSE(audit::is_lambda_stable(e, CandidateSet{0, 1, 2}, 3, 1.0, h));
}

TEST_CASE("exact guard") {
    const auto big = fixtures::impartial(5, 26, 0.3, 1);
    CHECK_THROWS_AS(audit::stability_ratio_exact(big, CandidateSet{0}, 8, 8), GuardExceeded);
    CHECK_NOTHROW(audit::stability_ratio_exact(big, CandidateSet{0}, 8, 2));
    CHECK_THROWS_AS(audit::stability_ratio_exact(fixtures::impartial(3, 70, 0.3, 1), CandidateSet{0}, 2, 1),
                    GuardExceeded);
}

TEST_CASE("coverage counts strict preference only") {
    const auto e = fixtures::example1();
    CHECK(audit::coverage(e, CandidateSet{0, 1, 2}, CandidateSet{3}) == 2);
    CHECK(audit::coverage(e, CandidateSet{0, 1, 3}, CandidateSet{0, 1, 3}) == 0);
}

TEST_CASE("PAV committees of size K <= 5 are exactly stable") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = fixtures::impartial(4 + seed % 9, 3 + seed % 8, 0.35, seed);
        const std::size_t K = 1 + seed % std::min<std::size_t>(5, inst.num_candidates());
        const auto base = sel::base_case(inst, K);
        const auto r = audit::stability_ratio_exact(inst, base.padded, K, audit::default_size_cap(inst, K));
        CHECK(r.ratio < 1.0 + 1e-12);
    }
}

TEST_CASE("heuristic never exceeds the exact ratio") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto inst = fixtures::impartial(6 + seed % 10, 4 + seed % 11, 0.3, seed);
        const std::size_t K = 2 + seed % 4;
        CandidateSet s;
        for (CandidateIndex c = 0; c < std::min<std::size_t>(K, inst.num_candidates()); ++c) s.push_back(c);
        CounterRng rng(seed);
        const auto h = audit::stability_ratio_heuristic(inst, s, K, 6, rng);
        const auto x = audit::stability_ratio_exact(inst, s, K, inst.num_candidates());
        CHECK(h.ratio <= x.ratio + 1e-12);
    }
}

TEST_CASE("ratio bookkeeping: coverage <= n and ratio <= K/|T|") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto inst = fixtures::impartial(7, 9, 0.4, seed);
        const CandidateSet s{0, 4};
        const std::size_t K = 4;
        const auto r = audit::stability_ratio_exact(inst, s, K, 9);
        CHECK(r.coverage <= inst.num_voters());
        if (r.ratio > 0.0) {
            CHECK_FALSE(r.worst_t.empty());
            CHECK(r.ratio <= static_cast<double>(K) / static_cast<double>(r.worst_t.size()) + 1e-12);
            CHECK(r.ratio == Approx(double(r.coverage) * K / (r.worst_t.size() * 7.0)));
        }
    }
}

TEST_CASE("enlarging a committee never raises the ratio") {
    CounterRng rng(4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto inst = fixtures::impartial(10, 10, 0.3, seed);
        CandidateSet s{static_cast<CandidateIndex>(seed % 10)};
        CandidateSet bigger = s;
        bigger.push_back(static_cast<CandidateIndex>((seed + 3) % 10));
        bigger.push_back(static_cast<CandidateIndex>((seed + 7) % 10));
        bigger = normalize_set(bigger);
        CHECK(audit::stability_ratio_exact(inst, bigger, 5, 5).ratio <=
              audit::stability_ratio_exact(inst, s, 5, 5).ratio + 1e-12);
    }
}

}
