#include "atomlaser/interferometry.hpp"

#include <cmath>

namespace atomlaser {

namespace {

// k' = sqrt(k^2 - 2 m V0 / hbar^2), the wavenumber over the barrier.
double barrier_wavenumber(double k, double barrier, double mass) {
    const double k2 = k * k - 2.0 * mass * barrier / (hbar * hbar);
    if (k2 <= 0.0)
        throw ConfigError("evanescent regime: hbar^2 k^2 must exceed 2 m V0");
    return std::sqrt(k2);
}

} // namespace

void StepProbe::validate() const {
    if (!(k > 0.0)) throw ConfigError("probe wavenumber must be > 0");
    if (!(width > 0.0)) throw ConfigError("barrier width must be > 0");
    if (!(mass > 0.0)) throw ConfigError("probe mass must be > 0");
    if (dk < 0.0) throw ConfigError("wavenumber spread must be >= 0");
    barrier_wavenumber(k, barrier, mass); // throws in the evanescent regime
}

double phase_uncertainty(const StepProbe& p) {
    p.validate();
    const double w = hbar * hbar * p.k * p.k;
    const double v = 2.0 * p.mass * p.barrier;
    const double bracket = hbar * p.k * (w - 2.0 * v) / std::pow(w - v, 1.5) - 1.0;
    return 0.5 * p.width * p.dk * bracket;
}

double phase_uncertainty_exact(const StepProbe& p) {
    p.validate();
    const double k2 = p.k + p.dk;
    barrier_wavenumber(k2, p.barrier, p.mass); // both components must propagate
    auto phi = [&](double k) {
        const double kp = barrier_wavenumber(k, p.barrier, p.mass);
        return 0.5 * p.width * (k * k / kp - k);
    };
    return phi(k2) - phi(p.k);
}

double phase_uncertainty_fixed_position(const StepProbe& p) {
    p.validate();
    const double k2 = p.k + p.dk;
    auto phi = [&](double k) {
        return p.width * (barrier_wavenumber(k, p.barrier, p.mass) - k);
    };
    return phi(k2) - phi(p.k);
}

} // namespace atomlaser
