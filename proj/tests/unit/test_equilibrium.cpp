#include <doctest.h>

#include <numeric>

#include "corestable/equilibrium.hpp"
#include "corestable/error.hpp"
#include "fixtures.hpp"

using namespace corestable;
using doctest::Approx;

namespace {

FractionalAllocation alloc(std::vector<double> x, long k) { return {std::move(x), k}; }

double total(const FractionalAllocation& x) { return std::accumulate(x.x.begin(), x.x.end(), 0.0); }

// All nonempty subsets of [m] of size at most cap.
template <class F>
void each_subset(std::size_t m, std::size_t cap, F f) {
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) > cap) continue;
        CandidateSet t;
        for (CandidateIndex c = 0; c < m; ++c)
            if (mask >> c & 1u) t.push_back(c);
        f(t);
    }
}

}  // namespace

TEST_SUITE("equilibrium") {

TEST_CASE("capped Nash welfare: symmetric two-party optimum") {
    const auto x = eq::solve_capped_mnw(fixtures::example1(), 3);
    for (double v : x.x) CHECK(v == Approx(0.6).epsilon(1e-7));
    CHECK(x.x[0] + x.x[1] + x.x[2] == Approx(1.8));
}

TEST_CASE("capped Nash welfare: two singletons split evenly") {
    const auto inst = Instance::from_approvals(2, {{0}, {1}});
    const auto x = eq::solve_capped_mnw(inst, 1);
    CHECK(x.x[0] == Approx(0.5));
    CHECK(x.x[1] == Approx(0.5));
}

TEST_CASE("capped Nash welfare: k = m funds everything") {
    const auto x = eq::solve_capped_mnw(fixtures::example1(), 5);
    for (double v : x.x) CHECK(v == 1.0);
}

TEST_CASE("capped Nash welfare: unapproved candidates fill last, lowest index first") {
    const auto inst = Instance::from_approvals(4, {{1}, {1}});
    const auto x = eq::solve_capped_mnw(inst, 3);
    CHECK(x.x == std::vector<double>{1.0, 1.0, 1.0, 0.0});
}

TEST_CASE("capped Nash welfare: errors") {
    CHECK_THROWS_AS(eq::solve_capped_mnw(fixtures::example1(), 6), InvalidArgument);
    CHECK_THROWS_AS(eq::solve_capped_mnw(Instance::from_approvals(3, {{}, {}}), 1), InvalidArgument);
    eq::MnwOptions tight;
    tight.max_iter = 1;
    CHECK_THROWS_AS(eq::solve_capped_mnw(fixtures::impartial(20, 15, 0.3, 4), 5, tight), NonConvergence);
}

TEST_CASE("capped Nash welfare: objective never decreases") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        eq::MnwStats stats;
        eq::solve_capped_mnw(fixtures::impartial(15, 10, 0.3, seed), 4, {}, &stats);
        for (std::size_t i = 1; i < stats.objective_trace.size(); ++i)
            CHECK(stats.objective_trace[i] >= stats.objective_trace[i - 1] - 1e-12);
        CHECK(stats.residual <= 1e-8);
    }
}

TEST_CASE("capped Nash welfare: duplicating every voter leaves x unchanged") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = fixtures::impartial(10, 8, 0.35, seed);
        std::vector<CandidateSet> twice;
        for (int r = 0; r < 2; ++r)
            for (VoterIndex v = 0; v < inst.num_voters(); ++v) twice.push_back(inst.approvals(v));
        const auto a = eq::solve_capped_mnw(inst, 3);
        const auto b = eq::solve_capped_mnw(Instance::from_approvals(8, twice), 3);
        for (std::size_t i = 0; i < 8; ++i) CHECK(a.x[i] == Approx(b.x[i]).epsilon(1e-6));
    }
}

TEST_CASE("prices for the two-party equilibrium") {
    const auto inst = fixtures::example1();
    const auto fit = eq::fit_prices(inst, alloc(std::vector<double>(5, 0.6), 3));
    REQUIRE(fit.feasible);
    const auto& p = fit.prices.p;
    for (int v = 0; v < 3; ++v) {
        for (int i = 0; i < 3; ++i) CHECK(p[v][i] == Approx(1.0 / 3).epsilon(1e-6));
        for (int i = 3; i < 5; ++i) CHECK(p[v][i] == Approx(0.0));
    }
    for (int v = 3; v < 5; ++v) {
        for (int i = 0; i < 3; ++i) CHECK(p[v][i] == Approx(0.0));
        for (int i = 3; i < 5; ++i) CHECK(p[v][i] == Approx(0.5).epsilon(1e-6));
    }
    CHECK(fit.prices.budget == Approx(0.6));
}

TEST_CASE("prices for two singleton voters") {
    const auto inst = Instance::from_approvals(2, {{0}, {1}});
    const auto fit = eq::fit_prices(inst, alloc({0.5, 0.5}, 1));
    REQUIRE(fit.feasible);
    CHECK(fit.prices.p[0][0] == Approx(1.0));
    CHECK(fit.prices.p[0][1] == Approx(0.0));
    CHECK(fit.prices.p[1][0] == Approx(0.0));
    CHECK(fit.prices.p[1][1] == Approx(1.0));
}

TEST_CASE("one funded candidate approved by everyone splits its price equally") {
    const auto inst = Instance::from_approvals(3, {{0}, {0, 1}, {0, 2}, {0}});
    const auto fit = eq::fit_prices(inst, alloc({1.0, 0.0, 0.0}, 1));
    REQUIRE(fit.feasible);
    for (int v = 0; v < 4; ++v) CHECK(fit.prices.p[v][0] == Approx(0.25).epsilon(1e-6));
}

TEST_CASE("a non-equilibrium allocation yields a certificate") {
    // Voter 0 alone pays for item 0, so it cannot also afford half of item 1.
    const auto inst = Instance::from_approvals(2, {{0}, {1}});
    const auto fit = eq::fit_prices(inst, alloc({0.9, 0.1}, 1));
    CHECK_FALSE(fit.feasible);
    CHECK(fit.certificate.min_violation > 1e-3);
    CHECK(fit.certificate.rows.size() == fit.certificate.multipliers.size());
    CHECK_FALSE(fit.certificate.rows.empty());
}

TEST_CASE("validation of the two-party equilibrium and of injected faults") {
    const auto inst = fixtures::example1();
    const auto x = alloc(std::vector<double>(5, 0.6), 3);
    eq::PriceSystem p;
    p.budget = 0.6;
    p.p.assign(5, std::vector<double>(5, 0.0));
    for (int v = 0; v < 3; ++v)
        for (int i = 0; i < 3; ++i) p.p[v][i] = 1.0 / 3;
    for (int v = 3; v < 5; ++v)
        for (int i = 3; i < 5; ++i) p.p[v][i] = 0.5;
    CHECK(eq::validate_lindahl(inst, x, p).pass);

    auto bumped = p;
    bumped.p[0][0] += 0.1;
    const auto r = eq::validate_lindahl(inst, x, bumped);
    CHECK_FALSE(r.pass);
    CHECK(r.price_sum.worst == Approx(0.1));

    auto zero = p;
    for (auto& row : zero.p) std::fill(row.begin(), row.end(), 0.0);
    const auto z = eq::validate_lindahl(inst, x, zero);
    CHECK_FALSE(z.pass);
    REQUIRE(z.budget.residuals.size() == 5);
    for (double res : z.budget.residuals) CHECK(res == Approx(0.6));
}

TEST_CASE("fractional stability spot checks") {
    const auto inst = fixtures::example1();
    const auto x = alloc(std::vector<double>(5, 0.6), 3);
    auto s = eq::fractional_stability_spotcheck(inst, x, CandidateSet{3});
    CHECK(s.coverage == 0);
    CHECK(s.threshold == Approx(5.0 / 3));
    CHECK(s.ok);
    s = eq::fractional_stability_spotcheck(inst, x, CandidateSet{0, 1, 2, 3, 4});
    CHECK(s.threshold == Approx(25.0 / 3));
    CHECK(s.ok);
    s = eq::fractional_stability_spotcheck(inst, x, CandidateSet{0, 1});
    CHECK(s.coverage == 3);
    CHECK(s.threshold == Approx(10.0 / 3));
    CHECK(s.ok);
}

TEST_CASE("Lindahl equilibria certify on generated elections") {
    int certified = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto inst = seed % 2 ? fixtures::impartial(8 + seed % 20, 6 + seed % 14, 0.3, seed)
                                   : fixtures::euclidean(8 + seed % 20, 6 + seed % 14, 0.15, seed);
        const long k = 1 + static_cast<long>(seed % 5);
        const auto e = eq::compute_lindahl(inst, k);
        CHECK(total(e.x) == Approx(static_cast<double>(k)).epsilon(1e-8));
        CHECK(e.report.pass);
        CHECK(eq::validate_lindahl(inst, e.x, e.prices, 1e-6).pass);
        certified += e.report.pass;
    }
    CHECK(certified == 40);
}

TEST_CASE("equilibria are fractionally stable against every small deviation") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto inst = fixtures::impartial(10 + seed, 6 + seed % 7, 0.35, 100 + seed);
        const long k = 2 + static_cast<long>(seed % 3);
        const auto e = eq::compute_lindahl(inst, k);
        each_subset(inst.num_candidates(), 6, [&](const CandidateSet& t) {
            CHECK(eq::fractional_stability_spotcheck(inst, e.x, t).ok);
        });
    }
}

TEST_CASE("empty voters carry their share of the budget on funded items") {
    // Prices sum to 1 on funded items, so total spending is k and every one of
    // the n budgets, including an empty voter's, must be spent.
    const auto inst = Instance::from_approvals(4, {{0, 1}, {}, {2}, {2, 3}});
    const auto e = eq::compute_lindahl(inst, 2);
    CHECK(e.report.pass);
    double spend = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        spend += e.prices.p[1][i] * e.x.x[i];
        if (e.x.x[i] <= 1e-9) CHECK(e.prices.p[1][i] == 0.0);
    }
    CHECK(spend == Approx(0.5).epsilon(1e-6));
}

}
