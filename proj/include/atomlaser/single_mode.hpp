// Single-mode condensate coupled to a discretized continuum of beam modes:
// the linear outcoupling model, its golden-rule decay rate, and the
// finite-time output spectrum.
#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "atomlaser/analysis.hpp"
#include "atomlaser/physical_model.hpp"

namespace atomlaser {

enum class Frame { lab, rotating };

// Uniform grid of beam-mode labels q with a dispersion map omega(q).
// Free-space dispersion is omega = hbar q^2 / 2m.
struct BeamModeGrid {
    std::vector<double> q;      // strictly increasing, uniform spacing
    double dq = 0.0;            // 1/m
    std::vector<double> omega;  // rad/s per sample
    bool free_space = true;
    double mass = 0.0;          // used by the free-space dispersion helpers

    static BeamModeGrid make_free_space(double q_min, double q_max, std::size_t count,
                                        double mass);
    static BeamModeGrid make_user(std::vector<double> q,
                                  const std::function<double(double)>& dispersion);

    // d omega / d q at wavenumber q (analytic for free space).
    double domega_dq(double q_value) const;
    void validate() const;
};

// A(q) samples over a BeamModeGrid. For Raman coupling from the trap ground
// state into free space, A(q) is the momentum-space ground-state Gaussian
// centered on the kick k0; the delta-normalized continuum convention makes
// the integral of |A|^2 dq equal 1.
struct OverlapFunction {
    BeamModeGrid grid;
    std::vector<std::complex<double>> a;
    double kick = 0.0;
    double source_width = 0.0; // harmonic oscillator length of the source

    // Analytic evaluation at arbitrary q (free-space Gaussian case).
    double value_at(double q_value) const;
};

// Requires the grid to cover [k0 - 6 sigma_k, k0 + 6 sigma_k] with
// sigma_k = sqrt(m omega_t / 2 hbar).
OverlapFunction overlap(const AtomSpecies& species, const TrapConfig& trap,
                        const BeamModeGrid& grid, const CouplingConfig& coupling);

// Condensate amplitude plus per-mode beam amplitudes beta(q) (continuum
// normalized: atom number is |alpha0|^2 + sum |beta|^2 dq).
struct SingleModeState {
    std::complex<double> alpha0;
    std::vector<std::complex<double>> beta;
    double time = 0.0;
    Frame frame = Frame::lab;
    double omega0 = 0.0; // trap ground energy / hbar = omega_t / 2

    double condensate_number() const { return std::norm(alpha0); }
    double beam_number(double dq) const;

    static SingleModeState vacuum_beam(double n0, const BeamModeGrid& grid, double omega0);
};

SingleModeState to_rotating(const SingleModeState& s, const BeamModeGrid& grid, double detuning);
SingleModeState to_lab(const SingleModeState& s, const BeamModeGrid& grid, double detuning);

enum class ModeIntegrator {
    rk4_rotating, // fixed-step RK4 on the rotating-frame equations
    split         // exact diagonal phases + exact coupling rotation (Strang)
};

struct SingleModeEvolveOptions {
    double dt = 0.0;               // 0 = auto from the integrator's step rule
    std::size_t samples = 400;     // N(t) sampling resolution
    std::vector<double> snapshot_times; // full beta snapshots
    ModeIntegrator integrator = ModeIntegrator::rk4_rotating;
    bool check_guards = true;
    double revival_safety = 2.5;   // require T_rev >= safety * duration
    double boundary_tolerance = 1e-6;
    double norm_drift_tolerance = 1e-6;
};

struct SingleModeTrajectory {
    std::vector<double> times;
    std::vector<double> condensate_number;
    std::vector<double> beam_number;
    std::vector<SingleModeState> snapshots;
    SingleModeState final_state;
};

// Integrates
//   i d(alpha0)/dt = omega0 alpha0 - Omega sum A(q) beta(q) dq
//   i d(beta)/dt   = (omega(q) - delta) beta - Omega* A*(q) alpha0
// from a vacuum beam. Number conservation is enforced as a guard.
SingleModeTrajectory evolve_single_mode(const SingleModeState& initial,
                                        const OverlapFunction& overlap_fn,
                                        const CouplingConfig& coupling, double duration,
                                        const SingleModeEvolveOptions& opts = {});

// Golden-rule decay rate gamma = 2 pi |Omega|^2 |A(q0)|^2 dq/domega.
double golden_rule_rate(double rabi_magnitude, double overlap_at_resonance, double dq_domega);

// Golden-rule rate of the discretized model: sums 2 pi |Omega A(q_r)|^2 dq/domega
// over all resonant roots omega(q_r) = omega0 + delta on the grid's dispersion.
// This is the rate the evolve_single_mode dynamics realizes in weak coupling.
double model_decay_rate(const OverlapFunction& overlap_fn, const CouplingConfig& coupling,
                        double omega0);

// Compact free-space closed form gamma = sqrt(pi) |Omega|^2 sqrt(m / hbar omega_t) / k0.
// It uses the standing-wave continuum normalization, which carries half the
// resonant overlap weight of the traveling-wave convention; for a kicked
// Gaussian source it therefore equals model_decay_rate / 2.
double free_space_rate(double rabi_magnitude, double kick, const TrapConfig& trap,
                       const AtomSpecies& species);

// F(dw, t) = (1 - 2 cos(dw t) e^{-gamma t/2} + e^{-gamma t}) / (gamma^2/4 + dw^2).
// Tends to the Lorentzian 1/(gamma^2/4 + dw^2) as t -> infinity.
double spectrum_F(double delta_omega, double t, double gamma);

struct FluxBoundResult {
    double ratio = 0.0; // F_av / (delta_omega * N0)
    bool satisfied = false;
    double average_flux = 0.0;
};

// Checks F_av / delta_omega <= N0 with F_av = outcoupled / duration.
FluxBoundResult flux_linewidth_bound(double n0, double outcoupled, double duration,
                                     double measured_linewidth);

// Beam spectrum |beta(q)|^2 over q.
Spectrum beam_spectrum(const SingleModeState& state, const BeamModeGrid& grid);

// Beam spectrum against the offset omega(q) - delta - omega0 (rad/s), density
// converted with the dispersion Jacobian. The offset is zero on resonance.
Spectrum beam_spectrum_omega(const SingleModeState& state, const BeamModeGrid& grid,
                             double detuning, double omega0);

} // namespace atomlaser
