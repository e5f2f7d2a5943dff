#include "solis/surrogate.hpp"

#include <algorithm>
#include <sstream>

namespace solis {

CanonicalParams canonical_params(const SurrogateCoefficients& theta) {
    if (!(theta.k > 0.0)) {
        std::ostringstream msg;
        msg << "canonical form undefined for k = " << theta.k << " <= 0";
        throw DomainError(msg.str());
    }
    const double wn = std::sqrt(theta.k);
    return {wn, theta.d / (2.0 * wn), theta.g / theta.k};
}

CanonicalParams canonical_params(const SurrogateCoefficients& theta, const State& at) {
    try {
        return canonical_params(theta);
    } catch (const DomainError& e) {
        std::ostringstream msg;
        msg << e.what() << " at state (y = " << at.y << ", v = " << at.v << ")";
        throw DomainError(msg.str());
    }
}

SurrogateCoefficients coefficients_from_canonical(const CanonicalParams& c) {
    const double k = c.omega_n * c.omega_n;
    return {k, 2.0 * c.zeta * c.omega_n, c.gain * k};
}

InputSignal::InputSignal(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size()) throw UsageError("input signal times/values length mismatch");
    if (times_.empty()) throw UsageError("input signal needs at least one sample");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1])) throw UsageError("input signal times must be strictly increasing");
}

InputSignal InputSignal::constant(double value) { return InputSignal({0.0}, {value}); }

double InputSignal::operator()(double t) const {
    if (times_.empty()) return 0.0;
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return values_[lo] + w * (values_[hi] - values_[lo]);
}

}  // namespace solis
