#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "herdlab/belief_engine.hpp"
#include "herdlab/random.hpp"

using namespace herdlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BeliefState at_pi_tilde(double pt) { return {logit(pt), logit(pt)}; }

}  // namespace

TEST_CASE("action rule", "[belief_engine]") {
    CHECK(choose_action(at_pi_tilde(0.6), 0.5) == Action::High);
    CHECK(choose_action(at_pi_tilde(0.3), 0.6) == Action::Low);
    CHECK(choose_action(at_pi_tilde(0.4), 0.6) == Action::High);
    CHECK(choose_action(at_pi_tilde(0.5), 0.0) == Action::Low);
    CHECK(choose_action(at_pi_tilde(0.5), 1.0) == Action::High);
    CHECK_THROWS_AS(choose_action(at_pi_tilde(0.5), 1.2), DomainError);
}

TEST_CASE("exact ties go to High", "[belief_engine]") {
    for (double q : {0.1, 0.25, 0.5, 0.8, 0.999}) {
        const double rt = -logit(q);
        CHECK(choose_action({0.0, rt}, q) == Action::High);
        CHECK(choose_action({0.0, std::nextafter(rt, -INFINITY)}, q) == Action::Low);
    }
}

TEST_CASE("posterior pair", "[belief_engine]") {
    CHECK_THAT(posterior_pair({0.0, 0.0}, 0.5).p, WithinAbs(0.5, 1e-15));
    CHECK_THAT(posterior_pair({std::log(3.0), 0.0}, 0.5).p, WithinAbs(0.75, 1e-15));
    const PosteriorPair pp = posterior_pair({0.0, std::log(3.0)}, 0.25);
    CHECK_THAT(pp.p, WithinAbs(0.25, 1e-15));
    CHECK_THAT(pp.p_tilde, WithinAbs(0.5, 1e-15));
    CHECK_FALSE(pp.degenerate);
    CHECK(posterior_pair({1.0, 2.0}, 0.0).degenerate);
    CHECK(posterior_pair({1.0, 2.0}, 1.0).p == 1.0);
}

TEST_CASE("first High update from an even prior", "[belief_engine]") {
    const Environment e11 = Environment::canonical(1.0, 1.0);
    const BeliefState b = update_after_action(e11, BeliefState::initial(0.5), Action::High);
    CHECK_THAT(b.r_tilde, WithinAbs(std::log(3.0), 1e-14));
    CHECK_THAT(b.r, WithinAbs(std::log(3.0), 1e-14));

    const Environment e12 = Environment::canonical(1.0, 2.0);
    const BeliefState c = update_after_action(e12, BeliefState::initial(0.5), Action::High);
    CHECK_THAT(c.r_tilde, WithinAbs(std::log(2.0), 1e-14));
    CHECK_THAT(c.r, WithinAbs(std::log(3.0), 1e-14));

    const BeliefState d = update_after_action(e12, BeliefState::initial(0.5), Action::Low);
    CHECK(d.pi_tilde() < 0.5);
    CHECK_THAT(d.r_tilde, WithinAbs(-std::log(2.0), 1e-14));
}

TEST_CASE("increment reference values", "[belief_engine]") {
    const auto f1 = make_canonical(1.0);
    const auto f2 = make_canonical(2.0);
    CHECK_THAT(high_increment(*f1, 0.0), WithinAbs(std::log(3.0), 1e-15));
    CHECK_THAT(high_increment(*f2, 0.0), WithinAbs(std::log(2.0), 1e-15));
    CHECK_THAT(high_increment(*f2, 3.0), WithinRel(0.0084660766234265985, 1e-13));
    CHECK_THAT(high_increment(*f2, -3.0), WithinRel(3.4219245939724080, 1e-13));
    CHECK_THAT(low_increment(*f2, 3.0), WithinRel(-3.4219245939724080, 1e-13));
    // U(r) / 2F(1/(1+e^r)) -> 1
    const double mu = logistic(-20.0);
    CHECK_THAT(high_increment(*f1, 20.0) / (2.0 * f1->mixture_cdf(mu)), WithinAbs(1.0, 1e-8));
}

TEST_CASE("increments positive, nonincreasing, and symmetric", "[belief_engine]") {
    for (double a : {0.5, 1.0, 2.0, 3.5}) {
        const auto f = make_canonical(a);
        double prev = INFINITY;
        for (int i = -300; i <= 300; ++i) {
            const double r = i / 10.0;
            const double u = high_increment(*f, r);
            CHECK(u > 0.0);
            CHECK(u <= prev);
            CHECK_THAT(low_increment(*f, r), WithinAbs(-high_increment(*f, -r), 1e-12 * std::max(1.0, u)));
            prev = u;
        }
    }
}

TEST_CASE("deep-herd increments stay finite and positive", "[belief_engine]") {
    const auto f = make_canonical(2.5);
    for (double r : {40.0, 100.0, 250.0}) {
        const double u = high_increment(*f, r);
        CHECK(std::isfinite(u));
        CHECK(u > 0.0);
        CHECK(std::isfinite(low_increment(*f, r)));
    }
}

TEST_CASE("update direction and overturning", "[belief_engine]") {
    const Environment env = Environment::canonical(2.0, 2.5, 0.5);
    for (int i = -40; i <= 40; ++i) {
        const BeliefState b{0.3 * i, 0.25 * i};
        CHECK(update_after_action(env, b, Action::High).r_tilde > b.r_tilde);
        CHECK(update_after_action(env, b, Action::Low).r_tilde < b.r_tilde);
    }
    RandomStream rng(11);
    BeliefState b = BeliefState::initial(0.5);
    for (int n = 0; n < 20'000; ++n) {
        const Action a = rng.next_uniform() < 0.5 ? Action::Low : Action::High;
        b = update_after_action(env, b, a);
        REQUIRE((b.pi_tilde() >= 0.5) == (a == Action::High));
    }
}

TEST_CASE("well-specified beliefs coincide", "[belief_engine]") {
    const Environment env = Environment::canonical(1.3, 1.3, 0.37);
    RandomStream rng(3);
    BeliefState b = BeliefState::initial(env.prior);
    for (int n = 0; n < 1000; ++n) {
        b = update_after_action(env, b, rng.next_uniform() < 0.4 ? Action::Low : Action::High);
        REQUIRE(b.r == b.r_tilde);
    }
}

TEST_CASE("environment validation", "[belief_engine]") {
    CHECK_THROWS_AS(Environment::canonical(2.0, 2.0, 0.0), DomainError);
    CHECK_THROWS_AS(Environment::canonical(2.0, 2.0, 1.0), DomainError);
    CHECK_THROWS_AS(Environment::canonical(-2.0, 2.0), DomainError);
    const Environment env = Environment::canonical(2.0, 2.5, 0.3);
    CHECK_THAT(env.condescension(), WithinAbs(0.5, 1e-15));
    CHECK_THAT(env.mirrored().prior, WithinAbs(0.7, 1e-15));
    CHECK(BeliefState::initial(0.5) == BeliefState{0.0, 0.0});
    CHECK_THAT(BeliefState::initial(0.25).r, WithinAbs(-std::log(3.0), 1e-15));
}

TEST_CASE("low action probability is the true cdf at the cut point", "[belief_engine]") {
    const auto f = make_canonical(1.0);
    CHECK_THAT(low_action_probability(*f, State::High, BeliefState::initial(0.5)), WithinAbs(0.25, 1e-15));
    CHECK_THAT(low_action_probability(*f, State::Low, BeliefState::initial(0.5)), WithinAbs(0.75, 1e-15));
}
