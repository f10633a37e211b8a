#pragma once

// Deterministic dynamics on the all-High action path, their power-law
// envelopes, and probabilities of immediate herds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "herdlab/belief_engine.hpp"
#include "herdlab/errors.hpp"
#include "herdlab/numeric.hpp"

namespace herdlab {

/// Beliefs along a_1 = a_2 = ... = High. Index 0 holds n = 1.
struct HerdPath {
    double prior = 0.5;
    std::vector<double> r_h;
    std::vector<double> r_tilde_h;
    std::vector<double> one_minus_pi_tilde_h;

    std::size_t length() const noexcept { return r_tilde_h.size(); }
};

/// r_{n+1} = r_n + U(r~_n), r~_{n+1} = r~_n + U~(r~_n), from r_1 = r~_1 = logit(prior).
inline HerdPath compute_herd_path(const Environment& env, std::size_t n) {
    env.validate();
    if (n < 1) throw DomainError("herd path length must be >= 1");
    HerdPath path;
    path.prior = env.prior;
    path.r_h.reserve(n);
    path.r_tilde_h.reserve(n);
    path.one_minus_pi_tilde_h.reserve(n);
    BeliefState b = BeliefState::initial(env.prior);
    for (std::size_t i = 0; i < n; ++i) {
        path.r_h.push_back(b.r);
        path.r_tilde_h.push_back(b.r_tilde);
        path.one_minus_pi_tilde_h.push_back(b.one_minus_pi_tilde());
        if (i + 1 < n) b = update_after_action(env, b, Action::High);
    }
    return path;
}

/// Empirical sandwich c_lower <= e^{r~_n} / n^{1/alpha~} <= C_upper over
/// [n_start, n_end], plus the envelope ODE z(t) = log(kappa + c alpha~ t) / alpha~
/// matched to the path at n_start, with c = U~(r~) e^{alpha~ r~} there.
struct EnvelopeFit {
    double c_lower = 0.0;
    double C_upper = 0.0;
    std::size_t n_start = 0;
    std::size_t n_end = 0;
    double kappa = 0.0;
    double ode_rate = 0.0;

    double spread() const noexcept { return C_upper / c_lower; }
};

inline constexpr std::size_t kDefaultEnvelopeStart = 50;

inline double envelope_ratio(const HerdPath& path, double alpha_tilde, std::size_t n) noexcept {
    return std::exp(path.r_tilde_h[n - 1] - std::log(static_cast<double>(n)) / alpha_tilde);
}

inline EnvelopeFit fit_envelopes(const HerdPath& path, TailExponent alpha_tilde,
                                 std::size_t n_start = kDefaultEnvelopeStart, std::size_t n_end = 0) {
    if (path.length() < 100) throw DomainError("envelope fit needs a path of length >= 100");
    if (n_end == 0) n_end = path.length();
    if (n_start < 1 || n_start > n_end || n_end > path.length())
        throw DomainError("envelope window outside the computed path");
    const double at = alpha_tilde.value();
    EnvelopeFit fit;
    fit.n_start = n_start;
    fit.n_end = n_end;
    fit.c_lower = std::numeric_limits<double>::infinity();
    fit.C_upper = 0.0;
    for (std::size_t n = n_start; n <= n_end; ++n) {
        const double v = envelope_ratio(path, at, n);
        fit.c_lower = std::min(fit.c_lower, v);
        fit.C_upper = std::max(fit.C_upper, v);
    }
    // Local rate from consecutive path points; avoids needing the family here.
    const double r0 = path.r_tilde_h[n_start - 1];
    const double step = n_start < path.length() ? path.r_tilde_h[n_start] - r0 : 0.0;
    fit.ode_rate = step * std::exp(at * r0);
    fit.kappa = std::exp(at * r0) - fit.ode_rate * at * static_cast<double>(n_start);
    return fit;
}

/// Bracket on an infinite product prod_n (1 - t_n). `upper` is the product
/// truncated at N; `lower` discounts it by a tail bound extrapolated from a
/// power law fitted to the last decade of t_n. The bracket is certified only
/// under that extrapolation.
struct HerdProbBounds {
    double lower = 0.0;
    double upper = 1.0;
    std::size_t truncation_n = 0;
    double tail_bound = std::numeric_limits<double>::infinity();
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();

    bool tail_summable() const noexcept { return std::isfinite(tail_bound); }
};

inline constexpr double kTailSafetyFactor = 2.0;

/// P_{prior, state}(every agent takes herd_action), as bounds.
/// A Low herd is reduced to a High herd of the mirrored world:
/// P_{pi,s}(all Low) = P_{1-pi, flip(s)}(all High).
inline HerdProbBounds immediate_herd_prob(const Environment& env, State state, Action herd_action, std::size_t n) {
    env.validate();
    if (n < 1) throw DomainError("truncation N must be >= 1");
    const Environment world = herd_action == Action::High ? env : env.mirrored();
    const State s = herd_action == Action::High ? state : flip(state);
    const SignalFamily& truth = *world.true_family;
    const SignalFamily& perceived = *world.perceived_family;

    // Least-squares fit of log t_n on log n over n in [max(1, N/10), N].
    const std::size_t fit_from = std::max<std::size_t>(1, n / 10);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;

    CompensatedSum log_product;
    double r_tilde = logit(world.prior);
    for (std::size_t k = 1; k <= n; ++k) {
        const UnitPoint x = UnitPoint::from_logodds(-r_tilde);
        log_product.add(truth.log_ccdf(s, x));
        if (k >= fit_from) {
            const double lt = truth.log_cdf(s, x);
            const double lk = std::log(static_cast<double>(k));
            if (std::isfinite(lt)) {
                sx += lk;
                sy += lt;
                sxx += lk * lk;
                sxy += lk * lt;
                ++m;
            }
        }
        if (k < n) r_tilde += high_increment(perceived, r_tilde);
    }

    HerdProbBounds out;
    out.truncation_n = n;
    out.upper = std::exp(log_product.value());
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (m >= 2 && denom > 0.0) {
        const double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
        const double intercept = (sy - slope * sx) / static_cast<double>(m);
        out.fitted_exponent = -slope;
        const double p = out.fitted_exponent;
        if (p > 1.0) {
            const double tail_sum = std::exp(intercept + (1.0 - p) * std::log(static_cast<double>(n))) / (p - 1.0);
            out.tail_bound = kTailSafetyFactor * tail_sum;
        }
    }
    out.lower = out.tail_summable() ? out.upper * std::exp(-out.tail_bound) : 0.0;
    return out;
}

/// Probability the first `n` agents all take `herd_action` (truncated product).
inline double herd_prefix_probability(const Environment& env, State state, Action herd_action, std::size_t n) {
    return immediate_herd_prob(env, state, herd_action, n).upper;
}

enum class RegimeLabel { AntiCondescending, BoundaryZero, EfficientWindow, BoundaryOne, OverCondescending };

constexpr std::string_view to_string(RegimeLabel r) noexcept {
    switch (r) {
        case RegimeLabel::AntiCondescending: return "AntiCondescending";
        case RegimeLabel::BoundaryZero: return "BoundaryZero";
        case RegimeLabel::EfficientWindow: return "EfficientWindow";
        case RegimeLabel::BoundaryOne: return "BoundaryOne";
        case RegimeLabel::OverCondescending: return "OverCondescending";
    }
    return "?";
}

inline constexpr double kBoundaryTolerance = 1e-12;

/// Regime of alpha~ - alpha: < 0, = 0, in (0,1), = 1, > 1.
inline RegimeLabel classify_regime(TailExponent alpha, TailExponent alpha_tilde) noexcept {
    const double d = alpha_tilde.value() - alpha.value();
    if (std::fabs(d) <= kBoundaryTolerance) return RegimeLabel::BoundaryZero;
    if (std::fabs(d - 1.0) <= kBoundaryTolerance) return RegimeLabel::BoundaryOne;
    if (d < 0.0) return RegimeLabel::AntiCondescending;
    if (d < 1.0) return RegimeLabel::EfficientWindow;
    return RegimeLabel::OverCondescending;
}

struct RaabeDiagnostic {
    double partial_sum = 0.0;      // sum_{n <= N} e^{-r_n^h}
    double raabe_statistic = 0.0;  // N (e^{U(r~_N^h)} - 1)
};

/// Raabe ratio test for sum_n e^{-r_n^h}, the series bounding E[tau].
inline RaabeDiagnostic raabe_sum_diagnostic(const Environment& env, std::size_t n) {
    if (n < 10) throw DomainError("Raabe diagnostic needs N >= 10");
    const HerdPath path = compute_herd_path(env, n);
    CompensatedSum sum;
    for (double r : path.r_h) sum.add(std::exp(-r));
    const double u = high_increment(*env.true_family, path.r_tilde_h.back());
    return {sum.value(), static_cast<double>(n) * std::expm1(u)};
}

struct UniformityResult {
    std::size_t n0 = 0;
    std::size_t slowest_prior = 0;  // index into the prior grid of the last path to cross
};

/// Smallest n with min over the grid of r~_n^h(pi) >= r_bar.
inline UniformityResult uniformity_check(const Environment& env, double r_bar, std::span<const double> priors,
                                         std::size_t max_n = 10'000'000) {
    if (priors.empty()) throw DomainError("uniformity check needs a non-empty prior grid");
    std::vector<double> r(priors.size());
    for (std::size_t i = 0; i < priors.size(); ++i) {
        if (!(priors[i] >= 0.5 && priors[i] < 1.0)) throw DomainError("uniformity priors must lie in [1/2, 1)");
        r[i] = logit(priors[i]);
    }
    const SignalFamily& perceived = *env.perceived_family;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto it = std::min_element(r.begin(), r.end());
        if (*it >= r_bar) return {n, static_cast<std::size_t>(it - r.begin())};
        for (double& x : r) x += high_increment(perceived, x);
    }
    const double reached = *std::min_element(r.begin(), r.end());
    throw HorizonExhausted("uniformity threshold " + std::to_string(r_bar) + " not reached within " +
                           std::to_string(max_n) + " steps; slowest path at r~ = " + std::to_string(reached));
}

}  // namespace herdlab
