#pragma once

#include <cmath>
#include <cstddef>

namespace herdlab {

/// 1 / (1 + e^{-x}) without overflow for large |x|.
inline double logistic(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(p / (1 - p)).
inline double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    void add(const CompensatedSum& other) noexcept {
        add(other.sum_);
        add(other.comp_);
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace herdlab
