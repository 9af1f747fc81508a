// Discrete trap eigenmodes coupled to discrete beam modes: the multimode
// linear outcoupling model, energy/momentum resonance rules, and relative
// output intensities.
#pragma once

#include <complex>
#include <vector>

#include "atomlaser/physical_model.hpp"
#include "atomlaser/single_mode.hpp"

namespace atomlaser {

// Normalized harmonic-oscillator eigenfunction h_n(xi) (weight included),
// evaluated with the stable three-term recurrence.
double hermite_function(unsigned n, double xi);

// Harmonic trap eigenbasis: eigenfrequencies omega_t (n + 1/2) and
// Hermite-Gaussian eigenfunctions in position and momentum space.
struct TrapModeBasis {
    unsigned mode_count = 0;
    double mass = 0.0;
    double omega = 0.0;  // trap frequency
    double length = 0.0; // oscillator length sqrt(hbar / m omega)

    static TrapModeBasis make(unsigned mode_count, const AtomSpecies& species,
                              const TrapConfig& trap);

    double eigenfrequency(unsigned n) const; // omega (n + 1/2), rad/s
    double position_eigenfunction(unsigned n, double x) const;
    // Momentum-space eigenfunction (-i)^n h_n(k a) sqrt(a).
    std::complex<double> momentum_eigenfunction(unsigned n, double k) const;
};

// A_mn = momentum eigenfunction of trap mode m at (k_n - k0); continuum
// normalized so that row sums |A_mn|^2 dk equal 1.
struct CouplingMatrix {
    unsigned trap_modes = 0;
    std::size_t beam_modes = 0;
    std::vector<std::complex<double>> a; // row-major [m * beam_modes + n]

    std::complex<double> at(unsigned m, std::size_t n) const { return a[m * beam_modes + n]; }
};

CouplingMatrix coupling_matrix(const TrapModeBasis& basis, const BeamModeGrid& grid,
                               const CouplingConfig& coupling);

struct MultimodeState {
    std::vector<std::complex<double>> alpha; // trap amplitudes
    std::vector<std::complex<double>> beta;  // discrete beam amplitudes
    double time = 0.0;
    Frame frame = Frame::lab;

    double trap_number() const;
    double beam_number() const;
};

struct MultimodeTrajectory {
    std::vector<double> times;
    std::vector<double> trap_number;
    std::vector<double> beam_number;
    std::vector<MultimodeState> snapshots;
    MultimodeState final_state;
};

struct MultimodeEvolveOptions {
    double dt = 0.0; // 0 = auto (max phase rate * dt = 0.1)
    std::size_t samples = 200;
    std::vector<double> snapshot_times;
    bool check_guards = true;
    double revival_safety = 2.5;
    double boundary_tolerance = 1e-6;
    double norm_drift_tolerance = 1e-6;
};

// Rotating-frame RK4 for
//   i d(alpha_m)/dt = -Omega sum_n A_mn sqrt(dk) beta_n e^{i(w_tm - (w_un - delta)) t}
//   i d(beta_n)/dt  = -Omega* sum_m A*_mn sqrt(dk) alpha_m e^{-i(...) t}
MultimodeTrajectory evolve_multimode(const MultimodeState& initial, const TrapModeBasis& basis,
                                     const BeamModeGrid& grid, const CouplingMatrix& matrix,
                                     const CouplingConfig& coupling, double duration,
                                     const MultimodeEvolveOptions& opts = {});

// Condensate-side resonant momentum k_n = sqrt(2m(delta + omega_n)/hbar) - k0.
double resonant_momentum(unsigned n, double detuning, double kick, const AtomSpecies& species,
                         const TrapConfig& trap);

struct ModeIntensity {
    unsigned n = 0;
    double k_res = 0.0;     // condensate-side resonant momentum
    double intensity = 0.0; // normalized to max = 1
    bool resonant = true;   // false when no propagating state exists
};

// Relative output intensities |alpha_n|^2 |A_n(k_n)|^2, evaluated analytically
// at the exact resonant momentum and normalized to a unit maximum.
std::vector<ModeIntensity> relative_intensities(const std::vector<std::complex<double>>& alpha,
                                                const TrapModeBasis& basis, double detuning,
                                                double kick);

// Beam spectrum of a multimode state over the discrete k grid (density per
// unit k, i.e. |beta_n|^2 / dk).
Spectrum beam_spectrum(const MultimodeState& state, const BeamModeGrid& grid);

} // namespace atomlaser
