#pragma once

// Action rule and public-belief recursions. All belief arithmetic is in
// log-odds; probabilities are materialized only at the interface.

#include <cmath>
#include <string>

#include "herdlab/errors.hpp"
#include "herdlab/numeric.hpp"
#include "herdlab/signal_model.hpp"

namespace herdlab {

enum class Action { Low, High };

constexpr Action flip(Action a) noexcept { return a == Action::High ? Action::Low : Action::High; }
constexpr bool is_correct(Action a, State s) noexcept { return (a == Action::High) == (s == State::High); }
constexpr std::string_view to_string(Action a) noexcept { return a == Action::High ? "h" : "l"; }

/// True signal family, perceived signal family, and common prior P(high).
struct Environment {
    FamilyPtr true_family;
    FamilyPtr perceived_family;
    double prior = 0.5;

    static Environment canonical(double alpha, double alpha_tilde, double prior = 0.5) {
        Environment env{make_canonical(alpha), make_canonical(alpha_tilde), prior};
        env.validate();
        return env;
    }

    void validate() const {
        if (!true_family || !perceived_family) throw DomainError("environment needs both signal families");
        if (!(prior > 0.0 && prior < 1.0)) throw DomainError("prior must lie in (0,1), got " + std::to_string(prior));
    }

    double alpha() const noexcept { return true_family->alpha(); }
    double alpha_tilde() const noexcept { return perceived_family->alpha(); }
    /// alpha_tilde - alpha; positive values mean condescending agents.
    double condescension() const noexcept { return alpha_tilde() - alpha(); }

    /// Same world seen from the other state label: prior 1 - prior.
    Environment mirrored() const { return {true_family, perceived_family, 1.0 - prior}; }
};

/// Well-specified and misspecified public log-likelihood ratios.
struct BeliefState {
    double r = 0.0;
    double r_tilde = 0.0;

    static BeliefState initial(double prior) noexcept {
        const double r0 = logit(prior);
        return {r0, r0};
    }

    double pi() const noexcept { return logistic(r); }
    double pi_tilde() const noexcept { return logistic(r_tilde); }
    double one_minus_pi_tilde() const noexcept { return logistic(-r_tilde); }

    /// The cut point 1 - pi_tilde at which agents switch actions.
    UnitPoint threshold() const noexcept { return UnitPoint::from_logodds(-r_tilde); }

    friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

/// High iff pi_tilde + q >= 1; ties go to High.
inline Action choose_action(const BeliefState& belief, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("private posterior outside [0,1]: " + std::to_string(q));
    return logit(q) + belief.r_tilde >= 0.0 ? Action::High : Action::Low;
}

struct PosteriorPair {
    double p;
    double p_tilde;
    bool degenerate;  // q was 0 or 1
};

inline PosteriorPair posterior_pair(const BeliefState& belief, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("private posterior outside [0,1]: " + std::to_string(q));
    if (q == 0.0 || q == 1.0) return {q, q, true};
    const double lq = logit(q);
    return {logistic(belief.r + lq), logistic(belief.r_tilde + lq), false};
}

/// Log-likelihood ratio carried by a High action when the public
/// log-odds is r: log[(1 - F_h(x)) / (1 - F_l(x))], x = 1 / (1 + e^r).
/// This is U(r) for the true family and U~(r) for the perceived one.
inline double high_increment(const SignalFamily& family, double r) noexcept {
    const UnitPoint x = UnitPoint::from_logodds(-r);
    return family.log_ccdf(State::High, x) - family.log_ccdf(State::Low, x);
}

/// Log-likelihood ratio carried by a Low action: log[F_h(x) / F_l(x)].
/// Under symmetry it equals -high_increment(family, -r).
inline double low_increment(const SignalFamily& family, double r) noexcept {
    const UnitPoint x = UnitPoint::from_logodds(-r);
    return family.log_cdf(State::High, x) - family.log_cdf(State::Low, x);
}

inline double action_increment(const SignalFamily& family, Action a, double r) noexcept {
    return a == Action::High ? high_increment(family, r) : low_increment(family, r);
}

/// Both recursions advance on the cut point set by the misspecified belief.
inline BeliefState update_after_action(const Environment& env, const BeliefState& belief, Action action) {
    const BeliefState next{belief.r + action_increment(*env.true_family, action, belief.r_tilde),
                           belief.r_tilde + action_increment(*env.perceived_family, action, belief.r_tilde)};
    if (!std::isfinite(next.r) || !std::isfinite(next.r_tilde))
        throw NumericalError("non-finite belief update at pi_tilde = " + std::to_string(belief.pi_tilde()),
                             belief.pi_tilde());
    return next;
}

/// P(Low action | state) at the given belief: F_state(1 - pi_tilde).
inline double low_action_probability(const SignalFamily& true_family, State s, const BeliefState& belief) noexcept {
    return true_family.cdf(s, belief.threshold());
}

}  // namespace herdlab
