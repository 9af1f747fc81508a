// Dispersive phase uncertainty of a step potential in one interferometer arm.
#pragma once

#include "atomlaser/physical_model.hpp"

namespace atomlaser {

struct StepProbe {
    double k = 0.0;       // mean wavenumber (1/m)
    double dk = 0.0;      // wavenumber spread (1/m)
    double barrier = 0.0; // V0 (J)
    double width = 0.0;   // L (m)
    double mass = 0.0;    // kg

    void validate() const; // requires k > 0, L > 0, classically allowed regime
    bool spread_warning() const { return dk / k > 0.1; }
};

// First-order phase difference between the k and k+dk components:
//   dphi = (L dk / 2) [ hbar k (hbar^2 k^2 - 4 m V0) / (hbar^2 k^2 - 2 m V0)^{3/2} - 1 ].
double phase_uncertainty(const StepProbe& p);

// Non-expanded oracle: group-delay dynamical phase accumulated across the
// barrier, phi(k) = (L/2)(k^2 / k' - k) with k' = sqrt(k^2 - 2 m V0 / hbar^2),
// differenced between the two wavenumber components. Its first order in dk
// reproduces phase_uncertainty exactly.
double phase_uncertainty_exact(const StepProbe& p);

// Fixed-position phase-accumulation model L (k' - k), differenced between the
// two components. Reported separately: its small-dk limit is
// (L dk)(k/k' - 1), which differs from the normative first-order formula.
double phase_uncertainty_fixed_position(const StepProbe& p);

} // namespace atomlaser
