#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "herdlab/exact_oracle.hpp"
#include "herdlab/herd_path.hpp"

using namespace herdlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("path starts at the prior log-odds", "[herd_path]") {
    const HerdPath p1 = compute_herd_path(Environment::canonical(1.0, 1.0), 1);
    CHECK(p1.length() == 1);
    CHECK(p1.r_tilde_h[0] == 0.0);
    CHECK(p1.one_minus_pi_tilde_h[0] == 0.5);
    const HerdPath p2 = compute_herd_path(Environment::canonical(1.0, 1.0), 2);
    CHECK_THAT(p2.r_tilde_h[1], WithinAbs(std::log(3.0), 1e-14));
    CHECK_THROWS_AS(compute_herd_path(Environment::canonical(1.0, 1.0), 0), DomainError);
}

TEST_CASE("path matches a high-precision reference at n = 1001", "[herd_path]") {
    const HerdPath p = compute_herd_path(Environment::canonical(2.0, 2.5), 1001);
    CHECK_THAT(p.r_h.back(), WithinRel(8.6369872672989695, 1e-12));
    CHECK_THAT(p.r_tilde_h.back(), WithinRel(3.7635689765198807, 1e-12));
}

TEST_CASE("paths strictly increase and approach one", "[herd_path]") {
    for (auto [a, at] : std::vector<std::pair<double, double>>{{2, 1.5}, {2, 2.5}, {2, 3.2}, {0.5, 1}, {3.5, 3.5}}) {
        const HerdPath p = compute_herd_path(Environment::canonical(a, at), 100'000);
        for (std::size_t i = 1; i < p.length(); ++i) {
            REQUIRE(p.r_h[i] > p.r_h[i - 1]);
            REQUIRE(p.r_tilde_h[i] > p.r_tilde_h[i - 1]);
        }
        // 1 - pi~_n decays like n^(-1/alpha~): at n = 10^4 that is below
        // 1e-2 only for alpha~ up to about 2.5.
        INFO("alpha~ = " << at);
        if (at <= 2.5) CHECK(p.one_minus_pi_tilde_h[9'999] < 1e-2);
        const double decade = p.one_minus_pi_tilde_h.back() / p.one_minus_pi_tilde_h[9'999];
        CHECK(decade < 1.0);
        CHECK_THAT(decade, WithinRel(std::pow(10.0, -1.0 / at), 0.25));
    }
}

TEST_CASE("monotone domination across priors", "[herd_path]") {
    const Environment env = Environment::canonical(2.0, 2.0);
    std::vector<HerdPath> paths;
    for (double pi : {0.5, 0.6, 0.75, 0.9, 0.99}) paths.push_back(compute_herd_path({env.true_family, env.perceived_family, pi}, 5000));
    for (std::size_t j = 1; j < paths.size(); ++j)
        for (std::size_t i = 0; i < 5000; ++i) REQUIRE(paths[j - 1].r_tilde_h[i] <= paths[j].r_tilde_h[i]);
}

TEST_CASE("envelope ratio is flat across decades", "[herd_path]") {
    const HerdPath p = compute_herd_path(Environment::canonical(2.0, 2.0), 1'000'000);
    const double at = 2.0;
    CHECK(envelope_ratio(p, at, 1'000'000) / envelope_ratio(p, at, 10'000) < 10.0);
    CHECK(envelope_ratio(p, at, 1'000'000) / envelope_ratio(p, at, 10'000) > 0.1);
    for (std::size_t n = 1000; n <= 100'000; n *= 10) {
        const double ratio = envelope_ratio(p, at, 10 * n) / envelope_ratio(p, at, n);
        CHECK(ratio > 0.2);
        CHECK(ratio < 5.0);
    }
    const EnvelopeFit fit = fit_envelopes(p, TailExponent(at));
    CHECK(fit.c_lower <= fit.C_upper);
    CHECK(std::isfinite(fit.spread()));
    CHECK(fit.ode_rate > 0.0);
    for (std::size_t n = fit.n_start; n <= p.length(); n += 997) {
        const double v = envelope_ratio(p, at, n);
        REQUIRE(v >= fit.c_lower);
        REQUIRE(v <= fit.C_upper);
    }
}

TEST_CASE("envelope spread stable as the path grows", "[herd_path]") {
    const HerdPath p = compute_herd_path(Environment::canonical(2.0, 2.0), 1'000'000);
    const double short_spread = fit_envelopes(p, TailExponent(2.0), kDefaultEnvelopeStart, 100'000).spread();
    const double long_spread = fit_envelopes(p, TailExponent(2.0)).spread();
    CHECK(long_spread / short_spread < 2.0);
}

TEST_CASE("envelope fit on a minimal path", "[herd_path]") {
    const HerdPath p = compute_herd_path(Environment::canonical(2.0, 2.0), 100);
    const EnvelopeFit fit = fit_envelopes(p, TailExponent(2.0));
    CHECK(fit.n_start == 50);
    CHECK(fit.n_end == 100);
    CHECK(fit.c_lower <= fit.C_upper);
    CHECK_THROWS_AS(fit_envelopes(compute_herd_path(Environment::canonical(2.0, 2.0), 99), TailExponent(2.0)),
                    DomainError);
}

TEST_CASE("envelope ODE matches the path at its start", "[herd_path]") {
    const HerdPath p = compute_herd_path(Environment::canonical(2.0, 2.5), 10'000);
    const EnvelopeFit fit = fit_envelopes(p, TailExponent(2.5));
    const double z = std::log(fit.kappa + fit.ode_rate * 2.5 * fit.n_start) / 2.5;
    CHECK_THAT(z, WithinAbs(p.r_tilde_h[fit.n_start - 1], 1e-12));
}

TEST_CASE("immediate herd probabilities by regime", "[herd_path]") {
    const auto at = [](double a, double t) { return Environment::canonical(a, t); };
    const HerdProbBounds eta_window = immediate_herd_prob(at(2.0, 2.5), State::High, Action::High, 1'000'000);
    CHECK(eta_window.lower > 0.0);
    CHECK(eta_window.lower <= eta_window.upper);
    CHECK(eta_window.upper - eta_window.lower <= 1.0 - std::exp(-eta_window.tail_bound) + 1e-15);
    CHECK_THAT(eta_window.fitted_exponent, WithinAbs(1.2, 0.05));

    const HerdProbBounds xi_window = immediate_herd_prob(at(2.0, 2.5), State::High, Action::Low, 100'000);
    CHECK(xi_window.lower == 0.0);

    const HerdProbBounds xi_anti = immediate_herd_prob(at(2.0, 1.5), State::High, Action::Low, 100'000);
    CHECK(xi_anti.lower > 0.0);
    CHECK_THAT(xi_anti.upper, WithinAbs(0.0536, 5e-4));

    const HerdProbBounds eta_over = immediate_herd_prob(at(2.0, 3.2), State::High, Action::High, 100'000);
    CHECK(eta_over.lower == 0.0);
    CHECK(eta_over.fitted_exponent < 1.0);
    const double up_1e4 = immediate_herd_prob(at(2.0, 3.2), State::High, Action::High, 10'000).upper;
    CHECK(eta_over.upper < up_1e4);
}

TEST_CASE("truncated product reference value", "[herd_path]") {
    const HerdProbBounds b = immediate_herd_prob(Environment::canonical(2.0, 2.5), State::High, Action::High, 1000);
    CHECK_THAT(b.upper, WithinRel(0.33797141023932461, 1e-12));
    CHECK(herd_prefix_probability(Environment::canonical(2.0, 2.5), State::High, Action::High, 1000) == b.upper);
}

TEST_CASE("truncated product equals the all-High oracle prefix", "[herd_path]") {
    const Environment env = Environment::canonical(1.5, 2.1, 0.4);
    for (std::size_t k : {1u, 5u, 12u, 20u}) {
        const std::vector<Action> highs(k, Action::High), lows(k, Action::Low);
        for (State s : {State::High, State::Low}) {
            CHECK_THAT(herd_prefix_probability(env, s, Action::High, k), WithinRel(prefix_probability(env, s, highs), 1e-12));
            CHECK_THAT(herd_prefix_probability(env, s, Action::Low, k), WithinRel(prefix_probability(env, s, lows), 1e-12));
        }
    }
}

TEST_CASE("regime labels and agreement with herd bounds", "[herd_path]") {
    const TailExponent two(2.0);
    CHECK(classify_regime(two, TailExponent(2.5)) == RegimeLabel::EfficientWindow);
    CHECK(classify_regime(two, TailExponent(1.5)) == RegimeLabel::AntiCondescending);
    CHECK(classify_regime(two, TailExponent(3.0)) == RegimeLabel::BoundaryOne);
    CHECK(classify_regime(two, TailExponent(3.2)) == RegimeLabel::OverCondescending);
    CHECK(classify_regime(two, TailExponent(2.0)) == RegimeLabel::BoundaryZero);
    CHECK(to_string(RegimeLabel::EfficientWindow) == "EfficientWindow");

    // Boundary labels are not checked against the bounds: finite-N fits
    // cannot resolve an exponent of exactly one.
    for (auto [a, t] : std::vector<std::pair<double, double>>{{2, 1.5}, {2, 2.5}, {2, 3.5}, {1, 0.5}, {1, 1.4}, {0.5, 2.0}}) {
        const Environment env = Environment::canonical(a, t);
        const RegimeLabel label = classify_regime(TailExponent(a), TailExponent(t));
        const double eta = immediate_herd_prob(env, State::High, Action::High, 100'000).lower;
        const double xi = immediate_herd_prob(env, State::High, Action::Low, 100'000).lower;
        INFO("alpha = " << a << ", alpha~ = " << t);
        CHECK((eta > 0.0) == (label != RegimeLabel::OverCondescending));
        CHECK((xi > 0.0) == (label == RegimeLabel::AntiCondescending));
    }
}

TEST_CASE("Raabe statistic trends", "[herd_path]") {
    CHECK(raabe_sum_diagnostic(Environment::canonical(2.0, 1.5), 100'000).raabe_statistic < 1.0);
    const double up3 = raabe_sum_diagnostic(Environment::canonical(2.0, 2.5), 1000).raabe_statistic;
    const double up5 = raabe_sum_diagnostic(Environment::canonical(2.0, 2.5), 100'000).raabe_statistic;
    CHECK(up5 > up3);
    const double eq4 = raabe_sum_diagnostic(Environment::canonical(2.0, 2.0), 10'000).raabe_statistic;
    const double eq5 = raabe_sum_diagnostic(Environment::canonical(2.0, 2.0), 100'000).raabe_statistic;
    CHECK_THAT(eq5 / eq4, WithinAbs(1.0, 0.05));
    CHECK_THROWS_AS(raabe_sum_diagnostic(Environment::canonical(2.0, 2.0), 9), DomainError);
}

TEST_CASE("uniformity check", "[herd_path]") {
    const Environment env = Environment::canonical(2.0, 2.0);
    const std::vector<double> grid{0.5, 0.7, 0.9};
    CHECK(uniformity_check(env, 0.0, grid).n0 == 1);
    const UniformityResult u = uniformity_check(env, 5.0, grid);
    CHECK(u.slowest_prior == 0);
    const HerdPath p = compute_herd_path(env, u.n0);
    CHECK(p.r_tilde_h[u.n0 - 1] >= 5.0);
    CHECK(p.r_tilde_h[u.n0 - 2] < 5.0);
    CHECK_THROWS_AS(uniformity_check(env, 50.0, grid, 1000), HorizonExhausted);
    const std::vector<double> bad{0.3};
    CHECK_THROWS_AS(uniformity_check(env, 1.0, bad), DomainError);
}
