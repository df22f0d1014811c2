#include <doctest.h>

#include <cmath>
#include <numeric>

#include "corestable/error.hpp"
#include "corestable/rng.hpp"
#include "corestable/tailbounds.hpp"

using namespace corestable;
using doctest::Approx;

namespace {

double brute_lower_tail(const std::vector<double>& p, long t) {
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << p.size()); ++mask) {
        double prob = 1.0;
        long ones = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const bool on = mask >> i & 1u;
            prob *= on ? p[i] : 1.0 - p[i];
            ones += on;
        }
        if (ones <= t) total += prob;
    }
    return total;
}

}  // namespace

TEST_SUITE("tailbounds") {

TEST_CASE("generalized binomial tails") {
    CHECK(tail::genbin_lower_tail(std::vector<double>{1, 1}, 1) == 0.0);
    CHECK(tail::genbin_lower_tail(std::vector<double>{0.5, 0.5}, 0) == Approx(0.25));
    CHECK(tail::genbin_lower_tail(std::vector<double>{0.3, 0.7}, 1) == Approx(0.79));
    CHECK(tail::genbin_lower_tail(std::vector<double>{0.3, 0.7}, -1) == 0.0);
}

TEST_CASE("Poisson tails") {
    CHECK(tail::poisson_lower_tail(1.7, 0) == Approx(std::exp(-1.7)));
    CHECK(tail::poisson_lower_tail(0.0, 3) == 1.0);
    CHECK(tail::poisson_lower_tail(4.0, 1) == Approx(5 * std::exp(-4.0)).epsilon(1e-12));
    CHECK(tail::poisson_lower_tail(4.0, 1) == Approx(0.0916).epsilon(1e-3));
    CHECK(tail::poisson_lower_tail(800.0, 700) == Approx(0.000204).epsilon(0.05));
    CHECK_THROWS_AS(tail::poisson_lower_tail(-1.0, 2), InvalidArgument);
}

TEST_CASE("bound right-hand sides") {
    CHECK(tail::tail_bound_rhs(0, 2.5, 1) == 0.0);
    CHECK(tail::tail_bound_rhs(1, 2.0, 1) == Approx(std::exp(-2.0)));
    CHECK(tail::tail_bound_rhs(1, 2.0, 1) == Approx(0.1353).epsilon(1e-3));
    CHECK(tail::tail_bound_rhs(5, 2.0, 1) == Approx(5 * std::exp(-4.0)));
    CHECK(tail::tail_bound_rhs(1, 2.0, 2) == 0.0);
    CHECK(tail::tail_bound_rhs(3, 2.0, 2) == Approx(std::exp(-4.0)));
    CHECK(tail::tail_bound_rhs(3, 2.0, 2) == Approx(0.0183).epsilon(1e-2));
    CHECK_THROWS_AS(tail::tail_bound_rhs(1, 1.9, 1), InvalidArgument);
}

TEST_CASE("main tail bound examples") {
    auto r = tail::verify_main_tail(std::vector<double>(40, 0.1), 2.0, 2.0);
    CHECK(r.ok);
    CHECK(r.lhs[0] == Approx(tail::genbin_lower_tail(std::vector<double>(40, 0.1), 1)));
    CHECK(r.rhs[0] == Approx(5 * std::exp(-4.0)));
    r = tail::verify_main_tail(std::vector<double>{0.2, 0.3}, 0.1, 2.0);
    CHECK(r.ok);
    CHECK(r.lhs[0] == 0.0);
    r = tail::verify_main_tail(std::vector<double>{1, 1, 1, 1}, 2.0, 2.0);
    CHECK(r.ok);
    CHECK(r.lhs[0] == 0.0);
    CHECK_THROWS_AS(tail::verify_main_tail(std::vector<double>{0.5}, 1.0, 2.0), InvalidArgument);
}

TEST_CASE("Poisson claim sweeps") {
    const auto a = tail::check_claim_pois(2.154564, 100);
    CHECK(a.ok);
    CHECK(a.argmax[0] == 2);
    CHECK(a.argmax[1] == 2);
    CHECK(tail::check_claim_pois(2.0, 2).ok);
    const auto three = tail::check_claim_pois(3.0, 50);
    const auto two = tail::check_claim_pois(2.0, 50);
    CHECK(three.ok);
    for (long mu = 3; mu <= 50; ++mu) {
        const auto i = static_cast<std::size_t>(mu - 2);
        for (int ell = 0; ell < 2; ++ell) {
            const double m3 = three.f[ell][0] - three.f[ell][i];
            const double m2 = two.f[ell][0] - two.f[ell][i];
            CHECK(m3 / three.f[ell][0] >= m2 / two.f[ell][0] - 1e-12);
        }
    }
}

TEST_CASE("domination witnesses") {
    auto w = tail::check_domination(std::vector<double>{1, 1, 0.25, 0.25}, 8);
    CHECK(w.ok);
    CHECK(w.full_range);
    CHECK(w.shift == 2);
    CHECK(w.trials == 2);
    // Not a shifted binomial, so only the lower tail t <= s - 1 = 1 can be dominated.
    w = tail::check_domination(std::vector<double>{0.9, 0.3, 0.3, 0.5}, 8);
    CHECK(w.ok);
    CHECK_FALSE(w.full_range);
    CHECK(w.max_t == 1);
    w = tail::check_domination(std::vector<double>{1.0}, 8);
    CHECK(w.ok);
    CHECK(w.shift == 1);
}

TEST_CASE("lower-tail witnesses exist for random vectors") {
    CounterRng rng(6);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> p(1 + rng.below(8));
        for (auto& v : p) v = rng.uniform();
        CHECK(tail::check_domination(p, 8).ok);
    }
}

TEST_CASE("exact tails agree with enumeration and are monotone") {
    CounterRng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(1 + rng.below(15));
        for (auto& v : p) v = rng.uniform();
        double prev = 0.0;
        for (long t = -1; t <= static_cast<long>(p.size()); ++t) {
            const double tail_t = tail::genbin_lower_tail(p, t);
            CHECK(tail_t == Approx(brute_lower_tail(p, t)).epsilon(1e-12));
            CHECK(tail_t >= prev - 1e-15);
            prev = tail_t;
        }
        CHECK(prev == Approx(1.0));
    }
}

TEST_CASE("main bound holds on random queries") {
    CounterRng rng(10);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> p(1 + rng.below(25));
        for (auto& v : p) v = rng.uniform();
        const double alpha = 2.0 + 2.0 * rng.uniform();
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        const double mu = rng.uniform() * sum / alpha;
        CHECK(tail::verify_main_tail(p, mu, alpha).ok);
    }
}

TEST_CASE("binomial mass stays under the Poisson mass") {
    for (long mu = 1; mu <= 10; ++mu)
        for (long trials : {static_cast<long>(std::ceil(2.154564 * mu)) + 1, 50L, 500L})
            CHECK(tail::binomial_vs_poisson_margin(trials, 2.154564, mu) >= -1e-15);
}

}
