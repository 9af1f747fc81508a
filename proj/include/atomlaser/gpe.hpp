// Coupled 1D Gross-Pitaevskii solver: imaginary-time ground states, Strang
// split-step real-time evolution with rf/Raman outcoupling, detuning
// schedules (constant or chirp-compensated sweep), and beam spectra.
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "atomlaser/analysis.hpp"
#include "atomlaser/physical_model.hpp"

namespace atomlaser {

struct SpatialGrid {
    std::size_t n = 0;    // power of two
    double length = 0.0;  // m
    double x0 = 0.0;      // left edge coordinate

    double dx() const { return length / static_cast<double>(n); }
    double dk() const { return 2.0 * pi / length; }
    double x(std::size_t i) const { return x0 + dx() * static_cast<double>(i); }
    // Wavenumber of FFT bin i (standard FFT ordering, positive then negative).
    double k_fft(std::size_t i) const {
        const auto half = n / 2;
        const double idx = i <= half ? static_cast<double>(i)
                                     : static_cast<double>(i) - static_cast<double>(n);
        return dk() * idx;
    }
    void validate() const;
    static SpatialGrid centered(std::size_t n, double length, double center = 0.0);
};

struct FieldState {
    SpatialGrid grid;
    std::vector<std::complex<double>> psi_t; // sqrt(atoms/m)
    std::vector<std::complex<double>> psi_u;
    double time = 0.0;
    double absorbed = 0.0; // atoms removed by the boundary absorber

    double n_trapped() const;
    double n_beam() const;
    double total_accounted() const { return n_trapped() + n_beam() + absorbed; }
    double outcoupled_fraction() const;
};

// Species, trap and reduced mean-field couplings for one 1D simulation.
struct GpeSystem {
    AtomSpecies species;
    TrapConfig trap;
    NonlinearCouplings couplings;
    double trap_center = 0.0; // m

    double reduced_tt() const { return couplings.reduced_tt(); }
    double reduced_uu() const { return couplings.reduced_uu(); }
    double reduced_tu() const { return couplings.reduced_tu(); }
};

enum class MuModel { tf_1d, tf_3d };

// Two-photon detuning: constant, or the compensating sweep
//   delta(t) = hbar k0^2 / 2m - (mu(N(t)) - mu(N0))/hbar - m w^2 r0^2 / (2 hbar)
// with mu evaluated from the live trapped atom number through a closed-form
// Thomas-Fermi model. E_out = hbar delta + mu is then time independent.
struct DetuningSchedule {
    enum class Kind { constant, chirp_compensated };
    Kind kind = Kind::constant;
    double delta0 = 0.0;

    // Sweep parameters.
    double r0 = 0.0;
    double kick = 0.0;
    double mu_at_start = 0.0;
    MuModel mu_model = MuModel::tf_1d;
    double mass = 0.0;
    double omega = 0.0;
    double coupling_for_model = 0.0; // u1 (J m) or U3 (J m^3) per mu_model
    AtomSpecies species_for_model;
    TrapConfig trap_for_model;

    bool time_dependent() const { return kind == Kind::chirp_compensated; }
    double mu(double n_trapped) const;
    double delta(double t, double n_trapped) const;
    double e_out(double t, double n_trapped) const; // J

    static DetuningSchedule constant(double delta);
    static DetuningSchedule chirp_compensated(const AtomSpecies& species, const TrapConfig& trap,
                                              double coupling_for_model, MuModel model,
                                              double n0, double r0, double kick);
};

// delta(t) of the compensating sweep for a live trapped number n. Kept as a
// free function mirroring DetuningSchedule::delta for direct evaluation.
double chirp_compensated_detuning(double t, double n_trapped, const DetuningSchedule& schedule);

struct GroundStateOptions {
    double dtau = 0.0; // imaginary-time step; 0 = auto
    std::size_t max_iterations = 400000;
    double density_tolerance = 1e-12;      // per-step relative density change
    double stationarity_tolerance = 1e-8;  // real-time verification level
    bool verify = true;
};

// Imaginary-time propagation of the trapped field to the stationary state
// with norm n0. Post: one real-time step changes |psi_t| pointwise (above a
// 1e-6 relative floor) by < stationarity_tolerance.
FieldState ground_state(const SpatialGrid& grid, const GpeSystem& system, double n0,
                        const GroundStateOptions& opts = {});

struct AbsorberConfig {
    bool enabled = false;
    double fraction = 0.10; // of the grid length, on the beam (+x) side
    double strength = 0.0;  // peak damping rate (1/s); 0 = auto
};

struct GpeEvolveOptions {
    double dt = 0.0; // 0 = auto (0.8 x the kinetic-split step bound)
    std::size_t samples = 200;
    std::vector<double> snapshot_times;
    AbsorberConfig absorber;
    bool check_guards = true;
    double edge_tolerance = 1e-6;        // edge-zone population, fraction of total
    double accounting_tolerance = 1e-8;  // norm accounting drift per 1e3 steps
    std::size_t guard_interval = 256;
};

struct GpeSample {
    double time = 0.0;
    double n_trapped = 0.0;
    double n_beam = 0.0;
    double n_absorbed = 0.0;
    double detuning = 0.0; // rad/s as applied at this time
    double mu = 0.0;       // schedule's mu(N(t)) (J); 0 for constant schedules
    double e_out = 0.0;    // hbar delta + mu (J); 0 for constant schedules
};

struct GpeResult {
    std::vector<GpeSample> samples;
    std::vector<FieldState> snapshots;
    FieldState final_state;
};

// Second-order Strang split-step integration of the coupled equations: exact
// kinetic phases in k space, then an exact pointwise 2x2 rotation for the
// potential + mean-field + coupling block in x space. Negative duration
// integrates backwards (absorber must be off).
GpeResult evolve_gpe(const FieldState& initial, const GpeSystem& system,
                     const CouplingConfig& coupling, const DetuningSchedule& schedule,
                     double duration, const GpeEvolveOptions& opts = {});

// Beam momentum density |psi_u(k)|^2 with continuum normalization (integral
// over k equals the beam atom number). pad > 1 evaluates the transform of the
// compactly supported field on a pad-times finer k grid.
Spectrum beam_momentum_spectrum(const FieldState& state, unsigned pad = 1);

// Same, restricted to the escaped beam: psi_u is tapered to zero for
// x < x_cut (half-cosine ramp of width `taper`), removing the atoms still
// in transit across the mean-field hill. The integral then counts escaped
// atoms only.
Spectrum beam_momentum_spectrum_masked(const FieldState& state, unsigned pad, double x_cut,
                                       double taper);

// mu[psi_t] = (kinetic + potential + mean-field) energy functional per atom.
double measure_chemical_potential(const FieldState& state, const GpeSystem& system);

// Max pointwise relative change of |psi_t| over one default real-time step.
double stationarity_error(const FieldState& state, const GpeSystem& system);

// k_cent = sqrt(k0^2 + 2 m mu(N0) / hbar^2) with the 3D Thomas-Fermi mu.
double initial_line_center(double n0, double kick, const AtomSpecies& species,
                           const TrapConfig& trap, double u_tt3d);

// Atom budget keeping the chemical-potential drop below hbar * delta_omega:
// dN = (5 hbar / m w^2) (4 pi m w^2 / 15 U_tt)^{2/5} N0^{3/5} delta_omega.
double weak_outcoupling_budget(double n0, double delta_omega, const AtomSpecies& species,
                               const TrapConfig& trap, double u_tt3d);

// Restrict a spectrum to an axis window (used to isolate the beam line).
Spectrum restrict_axis(const Spectrum& s, double lo, double hi);

} // namespace atomlaser
