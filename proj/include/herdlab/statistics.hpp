#pragma once

// Confidence intervals: normal approximation for means, Wilson for proportions.

#include <cmath>
#include <cstddef>
#include <limits>

#include "herdlab/numeric.hpp"

namespace herdlab {

inline constexpr double kZ95 = 1.959963984540054;

/// Mean with a 95% normal-approximation half-width. With fewer than two
/// observations the half-width is infinite.
struct MeanEstimate {
    std::size_t n = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double half_width = std::numeric_limits<double>::infinity();

    double lower() const noexcept { return mean - half_width; }
    double upper() const noexcept { return mean + half_width; }
};

/// Two-pass accumulator; observations are folded in insertion order so the
/// result is reproducible bit-for-bit.
class MeanAccumulator {
public:
    void add(double x) noexcept {
        sum_.add(x);
        sum_sq_.add(x * x);
        ++n_;
    }

    std::size_t count() const noexcept { return n_; }

    MeanEstimate estimate() const noexcept {
        MeanEstimate e;
        e.n = n_;
        if (n_ == 0) return e;
        const double nn = static_cast<double>(n_);
        e.mean = sum_.value() / nn;
        if (n_ >= 2) {
            const double var = std::max(0.0, (sum_sq_.value() - nn * e.mean * e.mean) / (nn - 1.0));
            e.half_width = kZ95 * std::sqrt(var / nn);
        }
        return e;
    }

private:
    CompensatedSum sum_;
    CompensatedSum sum_sq_;
    std::size_t n_ = 0;
};

struct Proportion {
    std::size_t successes = 0;
    std::size_t n = 0;
    double estimate = std::numeric_limits<double>::quiet_NaN();
    double lower = 0.0;
    double upper = 1.0;

    bool excludes(double p) const noexcept { return p < lower || p > upper; }
};

/// Wilson score interval at 95%.
inline Proportion wilson(std::size_t successes, std::size_t n) noexcept {
    Proportion p;
    p.successes = successes;
    p.n = n;
    if (n == 0) return p;
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(successes) / nn;
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / nn;
    const double centre = (phat + z2 / (2.0 * nn)) / denom;
    const double half = kZ95 * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    p.estimate = phat;
    p.lower = std::max(0.0, centre - half);
    p.upper = std::min(1.0, centre + half);
    // The closed form leaves rounding residue at the extremes.
    if (successes == 0) p.lower = 0.0;
    if (successes == n) p.upper = 1.0;
    return p;
}

inline bool intervals_overlap(const MeanEstimate& a, const MeanEstimate& b) noexcept {
    return a.lower() <= b.upper() && b.lower() <= a.upper();
}

}  // namespace herdlab
