// Physical parameters, unit conventions and Thomas-Fermi relations shared by
// every other module. All quantities are SI: masses kg, lengths m, angular
// frequencies rad/s, energies J.
#pragma once

#include <complex>

#include "atomlaser/constants.hpp"
#include "atomlaser/errors.hpp"

namespace atomlaser {

struct AtomSpecies {
    double mass = 0.0;  // kg
    double a_tt = 0.0;  // s-wave scattering length, trapped-trapped (m)
    double a_uu = 0.0;  // untrapped-untrapped (m)
    double a_tu = 0.0;  // cross term (m)
    // Negative scattering lengths are rejected unless explicitly enabled.
    bool allow_negative_scattering = false;

    void validate() const;

    // Rb-87 with all scattering lengths set to `a`.
    static AtomSpecies rb87(double a = 0.0);
};

struct TrapConfig {
    double omega = 0.0;   // harmonic trap angular frequency (rad/s)
    bool gravity = false; // interface placeholder, must stay off

    void validate() const;
};

enum class CouplingScheme { rf, raman };

// Effective two-level outcoupling parameters. Only the composite Rabi
// strength and two-photon detuning enter the dynamics; the underlying
// three-level quantities never appear here.
struct CouplingConfig {
    CouplingScheme scheme = CouplingScheme::raman;
    double rabi_magnitude = 0.0; // |Omega| (rad/s)
    double rabi_phase = 0.0;     // arg(Omega) (rad)
    double kick = 0.0;           // k0 imparted to the beam (1/m); 0 for rf
    double detuning = 0.0;       // constant two-photon detuning (rad/s)

    std::complex<double> rabi() const;
    void validate() const;
};

enum class CouplingPair { tt, uu, tu };

// U_ij = 4 pi hbar^2 a_ij / m, in J m^3.
double nonlinear_coupling(const AtomSpecies& species, CouplingPair pair);

// Mean-field couplings plus the transverse area used for the 1D reduction.
// reduced_*() values are in J m and multiply 1D densities |psi|^2 (atoms/m).
struct NonlinearCouplings {
    double u_tt = 0.0; // 3D couplings, J m^3
    double u_uu = 0.0;
    double u_tu = 0.0;
    double transverse_area = 0.0; // m^2

    double reduced_tt() const { return u_tt / transverse_area; }
    double reduced_uu() const { return u_uu / transverse_area; }
    double reduced_tu() const { return u_tu / transverse_area; }

    static NonlinearCouplings from_species(const AtomSpecies& species, double transverse_area);
};

// Default reduction area: pi * (harmonic oscillator length)^2 = pi hbar/(m omega).
double default_transverse_area(const AtomSpecies& species, const TrapConfig& trap);

// Area for which the 1D-reduced Thomas-Fermi chemical potential equals the
// 3D closed form at atom number n0. Pins the otherwise free 1D scale so that
// reduced simulations can be compared against 3D formulas.
double matched_transverse_area(double n0, const AtomSpecies& species, const TrapConfig& trap);

// 3D Thomas-Fermi chemical potential
//   mu(N) = (m omega^2 / 2) * (15 N U_tt / (4 pi m omega^2))^{2/5},  in J.
// u_tt3d is the 3D coupling in J m^3. Monotone increasing and concave in N.
double chemical_potential(double n, const AtomSpecies& species, const TrapConfig& trap,
                          double u_tt3d);

// 1D Thomas-Fermi chemical potential for the reduced equation with coupling
// u1 (J m): mu = (m omega^2 / 2) * (3 N u1 / (2 m omega^2))^{2/3}.
double chemical_potential_1d(double n, const AtomSpecies& species, const TrapConfig& trap,
                             double u1);

// Radius at which the Thomas-Fermi density vanishes: sqrt(2 mu / m omega^2).
double thomas_fermi_radius(double mu, const AtomSpecies& species, const TrapConfig& trap);

// max(0, (mu(N) - m omega^2 r^2 / 2) / U_tt) with the 3D chemical potential.
// Gravity-free form; density in atoms/m^3 when U_tt is the 3D coupling.
double thomas_fermi_density(double r, double n, const AtomSpecies& species,
                            const TrapConfig& trap, double u_tt);

// 1D-reduced Thomas-Fermi profile: density (atoms/m) normalized so that the
// spatial integral recovers the atom number.
struct ThomasFermi1D {
    double mu = 0.0;     // 1D chemical potential (J)
    double radius = 0.0; // m
    double u1 = 0.0;     // reduced coupling (J m)
    double mass = 0.0;
    double omega = 0.0;

    double density(double x) const;

    static ThomasFermi1D make(double n, const AtomSpecies& species, const TrapConfig& trap,
                              double u1);
};

} // namespace atomlaser
