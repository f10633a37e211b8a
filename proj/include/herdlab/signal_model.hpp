#pragma once

// Conditional private-posterior distributions (F_low, F_high) and their
// mixture F = (F_low + F_high) / 2.
//
// A family is described by the distribution of the private posterior
// q = P(high | signal). Families are symmetric, F_low(q) + F_high(1 - q) = 1,
// and tail-regular, F(q) = Theta(q^alpha) as q -> 0.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>

#include "herdlab/errors.hpp"
#include "herdlab/random.hpp"

namespace herdlab {

enum class State { Low, High };

constexpr State flip(State s) noexcept { return s == State::High ? State::Low : State::High; }

constexpr std::string_view to_string(State s) noexcept { return s == State::High ? "high" : "low"; }

/// Positive, finite tail exponent alpha.
class TailExponent {
public:
    explicit TailExponent(double alpha) : value_(alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw DomainError("tail exponent must be positive and finite, got " + std::to_string(alpha));
    }

    double value() const noexcept { return value_; }

private:
    double value_;
};

/// A point of [0, 1] carried together with its complement, each computed
/// to full relative precision. Near 1 the complement is the meaningful part.
struct UnitPoint {
    double value;
    double complement;

    static UnitPoint of(double q) {
        if (!(q >= 0.0 && q <= 1.0)) throw DomainError("probability outside [0,1]: " + std::to_string(q));
        return {q, 1.0 - q};
    }

    /// The point 1 / (1 + e^{-r}); both halves are exact to rounding.
    static UnitPoint from_logodds(double r) noexcept {
        if (r >= 0.0) {
            const double e = std::exp(-r);
            return {1.0 / (1.0 + e), e / (1.0 + e)};
        }
        const double e = std::exp(r);
        return {e / (1.0 + e), 1.0 / (1.0 + e)};
    }

    UnitPoint reflected() const noexcept { return {complement, value}; }
};

/// Interface for a symmetric signal family. Implementations must be
/// immutable; instances are shared across threads.
class SignalFamily {
public:
    virtual ~SignalFamily() = default;

    virtual double alpha() const noexcept = 0;
    virtual std::string name() const = 0;

    virtual double mixture_cdf(UnitPoint q) const noexcept = 0;
    virtual double mixture_ccdf(UnitPoint q) const noexcept = 0;
    virtual double cdf(State s, UnitPoint q) const noexcept = 0;
    /// 1 - F_s(q), evaluated without cancellation.
    virtual double ccdf(State s, UnitPoint q) const noexcept = 0;

    virtual double log_cdf(State s, UnitPoint q) const noexcept {
        return q.value <= 0.5 ? std::log(cdf(s, q)) : std::log1p(-ccdf(s, q));
    }

    virtual double log_ccdf(State s, UnitPoint q) const noexcept {
        return q.value <= 0.5 ? std::log1p(-cdf(s, q)) : std::log(ccdf(s, q));
    }

    double mixture_cdf(double q) const { return mixture_cdf(UnitPoint::of(q)); }
    double cdf(State s, double q) const { return cdf(s, UnitPoint::of(q)); }
    double ccdf(State s, double q) const { return ccdf(s, UnitPoint::of(q)); }
};

using FamilyPtr = std::shared_ptr<const SignalFamily>;

/// F(q) = 2^(alpha-1) q^alpha on [0, 1/2], extended by symmetry. The
/// conditionals follow from the iterated likelihood principle:
///   F_high(q) = alpha/(alpha+1) 2^alpha q^(alpha+1)
///   F_low(q)  = 2^alpha q^alpha (1 - alpha q/(alpha+1))      for q <= 1/2.
class CanonicalFamily final : public SignalFamily {
public:
    explicit CanonicalFamily(TailExponent alpha)
        : alpha_(alpha.value()),
          ratio_(alpha_ / (alpha_ + 1.0)),
          log_ratio_(std::log(ratio_)),
          log_two_pow_alpha_(alpha_ * std::numbers::ln2),
          two_pow_alpha_(std::exp2(alpha_)) {}

    double alpha() const noexcept override { return alpha_; }
    std::string name() const override { return "canonical"; }

    using SignalFamily::cdf;
    using SignalFamily::ccdf;
    using SignalFamily::mixture_cdf;

    double mixture_cdf(UnitPoint q) const noexcept override {
        return q.value <= 0.5 ? lower_mixture(q.value) : 1.0 - lower_mixture(q.complement);
    }

    double mixture_ccdf(UnitPoint q) const noexcept override {
        return q.value <= 0.5 ? 1.0 - lower_mixture(q.value) : lower_mixture(q.complement);
    }

    double cdf(State s, UnitPoint q) const noexcept override {
        if (q.value <= 0.5) return lower(s, q.value);
        return 1.0 - lower(flip(s), q.complement);
    }

    double ccdf(State s, UnitPoint q) const noexcept override {
        if (q.value <= 0.5) return 1.0 - lower(s, q.value);
        return lower(flip(s), q.complement);
    }

    double log_cdf(State s, UnitPoint q) const noexcept override {
        if (q.value <= 0.5) return log_lower(s, q.value);
        return std::log1p(-lower(flip(s), q.complement));
    }

    double log_ccdf(State s, UnitPoint q) const noexcept override {
        if (q.value <= 0.5) return std::log1p(-lower(s, q.value));
        return log_lower(flip(s), q.complement);
    }

private:
    double lower_mixture(double x) const noexcept { return 0.5 * two_pow_alpha_ * std::pow(x, alpha_); }

    // Conditional CDFs on [0, 1/2].
    double lower(State s, double x) const noexcept {
        const double base = two_pow_alpha_ * std::pow(x, alpha_);
        return s == State::High ? ratio_ * base * x : base * (1.0 - ratio_ * x);
    }

    // Logs of the same, stable for x far below the underflow of pow().
    double log_lower(State s, double x) const noexcept {
        const double lx = std::log(x);
        if (s == State::High) return log_ratio_ + log_two_pow_alpha_ + (alpha_ + 1.0) * lx;
        return log_two_pow_alpha_ + alpha_ * lx + std::log1p(-ratio_ * x);
    }

    double alpha_;
    double ratio_;
    double log_ratio_;
    double log_two_pow_alpha_;
    double two_pow_alpha_;
};

inline FamilyPtr make_canonical(double alpha) { return std::make_shared<CanonicalFamily>(TailExponent(alpha)); }

inline constexpr int kQuantileMaxIterations = 200;
inline constexpr double kQuantileTolerance = 1e-13;

namespace detail {

// Bisection on t in [0, 1]; the candidate point is {t, 1-t} when solving
// F_s(q) = mass, or {1-t, t} when solving 1 - F_s(q) = mass. Either way the
// evaluated tail is increasing in t. Runs until the bracket collapses to
// adjacent doubles, far inside kQuantileTolerance, or the cap is hit.
inline UnitPoint bisect_tail(const SignalFamily& family, State s, double mass, bool upper) {
    auto point = [upper](double t) { return upper ? UnitPoint{1.0 - t, t} : UnitPoint{t, 1.0 - t}; };
    auto g = [&](double t) { return upper ? family.ccdf(s, point(t)) : family.cdf(s, point(t)); };
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < kQuantileMaxIterations; ++i) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (g(mid) < mass ? lo : hi) = mid;
    }
    return point(std::fabs(g(lo) - mass) <= std::fabs(g(hi) - mass) ? lo : hi);
}

}  // namespace detail

/// q with F_s(q) = u, as a point with its complement. Levels above 1/2
/// are solved on the complementary form 1 - F_s.
inline UnitPoint quantile_point(const SignalFamily& family, State s, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile level outside [0,1]: " + std::to_string(u));
    if (u == 0.0) return {0.0, 1.0};
    if (u == 1.0) return {1.0, 0.0};
    return u > 0.5 ? detail::bisect_tail(family, s, 1.0 - u, true) : detail::bisect_tail(family, s, u, false);
}

/// q with 1 - F_s(q) = tail. Resolves upper quantiles whose level 1 - tail
/// is not representable.
inline UnitPoint upper_quantile_point(const SignalFamily& family, State s, double tail) {
    if (!(tail >= 0.0 && tail <= 1.0)) throw DomainError("tail mass outside [0,1]: " + std::to_string(tail));
    if (tail == 0.0) return {1.0, 0.0};
    if (tail == 1.0) return {0.0, 1.0};
    return tail < 0.5 ? detail::bisect_tail(family, s, tail, true) : detail::bisect_tail(family, s, 1.0 - tail, false);
}

inline double quantile(const SignalFamily& family, State s, double u) { return quantile_point(family, s, u).value; }

/// One private posterior drawn from F_s by inversion of the next uniform.
inline double sample_private_posterior(const SignalFamily& family, State s, RandomStream& stream) {
    return quantile(family, s, stream.next_uniform());
}

struct FamilyReport {
    double max_symmetry_violation = 0.0;        // |F_low(q) + F_high(1-q) - 1|
    double max_mixture_symmetry_violation = 0.0;  // |F(q) + F(1-q) - 1|
    double max_mixture_violation = 0.0;         // |2F(q) - F_low(q) - F_high(q)|
    double max_lemma_excess = 0.0;              // max of F_high - 2qF and |F_low - 2F| - 3qF, clipped at 0
    double max_dominance_violation = 0.0;       // max of F_high - F_low, clipped at 0
    double exponent_mixture_1e3 = 0.0;          // log F(q) / log q at q = 1e-3
    double exponent_mixture_1e6 = 0.0;
    double exponent_high_1e3 = 0.0;             // log F_high(q) / log q
    double exponent_high_1e6 = 0.0;

    double max_identity_violation() const noexcept {
        return std::max({max_symmetry_violation, max_mixture_symmetry_violation, max_mixture_violation});
    }
};

inline FamilyReport verify_family(const SignalFamily& family, std::size_t grid_size) {
    if (grid_size < 2) throw DomainError("verify_family needs grid_size >= 2");
    FamilyReport rep;
    const double step = 1.0 / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        // Exact complement on the grid: 1 - i/(n-1) = (n-1-i)/(n-1).
        const UnitPoint q{static_cast<double>(i) * step, static_cast<double>(grid_size - 1 - i) * step};
        const double fl = family.cdf(State::Low, q);
        const double fh = family.cdf(State::High, q);
        const double f = family.mixture_cdf(q);
        rep.max_symmetry_violation =
            std::max(rep.max_symmetry_violation, std::fabs(fl + family.cdf(State::High, q.reflected()) - 1.0));
        rep.max_mixture_symmetry_violation =
            std::max(rep.max_mixture_symmetry_violation, std::fabs(f + family.mixture_cdf(q.reflected()) - 1.0));
        rep.max_mixture_violation = std::max(rep.max_mixture_violation, std::fabs(2.0 * f - fl - fh));
        rep.max_lemma_excess = std::max(
            {rep.max_lemma_excess, fh - 2.0 * q.value * f, std::fabs(fl - 2.0 * f) - 3.0 * q.value * f});
        rep.max_dominance_violation = std::max(rep.max_dominance_violation, fh - fl);
    }
    auto exponent = [&](auto&& cdf_at, double q) { return std::log(cdf_at(UnitPoint::of(q))) / std::log(q); };
    auto mix = [&](UnitPoint p) { return family.mixture_cdf(p); };
    auto high = [&](UnitPoint p) { return family.cdf(State::High, p); };
    rep.exponent_mixture_1e3 = exponent(mix, 1e-3);
    rep.exponent_mixture_1e6 = exponent(mix, 1e-6);
    rep.exponent_high_1e3 = exponent(high, 1e-3);
    rep.exponent_high_1e6 = exponent(high, 1e-6);
    return rep;
}

}  // namespace herdlab
