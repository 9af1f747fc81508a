#include "atomlaser/physical_model.hpp"

#include <cmath>

namespace atomlaser {

void AtomSpecies::validate() const {
    if (!(mass > 0.0)) throw ConfigError("atom mass must be > 0");
    for (double a : {a_tt, a_uu, a_tu}) {
        if (!std::isfinite(a)) throw ConfigError("scattering length must be finite");
        if (a < 0.0 && !allow_negative_scattering)
            throw ConfigError("negative scattering length requires explicit opt-in");
    }
}

AtomSpecies AtomSpecies::rb87(double a) {
    AtomSpecies s;
    s.mass = 1.4432e-25;
    s.a_tt = s.a_uu = s.a_tu = a;
    return s;
}

void TrapConfig::validate() const {
    if (!(omega > 0.0)) throw ConfigError("trap frequency must be > 0");
    if (gravity) throw ConfigError("gravity is not supported; keep it off");
}

std::complex<double> CouplingConfig::rabi() const {
    return std::polar(rabi_magnitude, rabi_phase);
}

void CouplingConfig::validate() const {
    if (rabi_magnitude < 0.0) throw ConfigError("|Omega| must be >= 0");
    if (scheme == CouplingScheme::rf && kick != 0.0)
        throw ConfigError("rf outcoupling has no momentum kick; set k0 = 0");
    if (!std::isfinite(detuning)) throw ConfigError("detuning must be finite");
}

double nonlinear_coupling(const AtomSpecies& species, CouplingPair pair) {
    if (!(species.mass > 0.0)) throw ConfigError("atom mass must be > 0");
    double a = 0.0;
    switch (pair) {
        case CouplingPair::tt: a = species.a_tt; break;
        case CouplingPair::uu: a = species.a_uu; break;
        case CouplingPair::tu: a = species.a_tu; break;
    }
    return 4.0 * pi * hbar * hbar * a / species.mass;
}

NonlinearCouplings NonlinearCouplings::from_species(const AtomSpecies& species,
                                                    double transverse_area) {
    if (!(transverse_area > 0.0)) throw ConfigError("transverse area must be > 0");
    NonlinearCouplings u;
    u.u_tt = nonlinear_coupling(species, CouplingPair::tt);
    u.u_uu = nonlinear_coupling(species, CouplingPair::uu);
    u.u_tu = nonlinear_coupling(species, CouplingPair::tu);
    u.transverse_area = transverse_area;
    return u;
}

double default_transverse_area(const AtomSpecies& species, const TrapConfig& trap) {
    species.validate();
    trap.validate();
    return pi * hbar / (species.mass * trap.omega);
}

double matched_transverse_area(double n0, const AtomSpecies& species, const TrapConfig& trap) {
    species.validate();
    trap.validate();
    if (!(n0 > 0.0)) throw ConfigError("atom number must be > 0 to match the reduction area");
    const double u3 = nonlinear_coupling(species, CouplingPair::tt);
    if (!(u3 > 0.0)) throw ConfigError("matched area requires a repulsive a_tt");
    const double m_w2 = species.mass * trap.omega * trap.omega;
    // Equate the 1D and 3D Thomas-Fermi chemical potentials at n0.
    const double u1 = (2.0 * m_w2 / (3.0 * n0)) *
                      std::pow(15.0 * n0 * u3 / (4.0 * pi * m_w2), 3.0 / 5.0);
    return u3 / u1;
}

double chemical_potential(double n, const AtomSpecies& species, const TrapConfig& trap,
                          double u_tt3d) {
    if (n < 0.0) throw ConfigError("atom number must be >= 0");
    if (n == 0.0) return 0.0;
    const double m_w2 = species.mass * trap.omega * trap.omega;
    return 0.5 * m_w2 * std::pow(15.0 * n * u_tt3d / (4.0 * pi * m_w2), 2.0 / 5.0);
}

double chemical_potential_1d(double n, const AtomSpecies& species, const TrapConfig& trap,
                             double u1) {
    if (n < 0.0) throw ConfigError("atom number must be >= 0");
    if (n == 0.0) return 0.0;
    const double m_w2 = species.mass * trap.omega * trap.omega;
    return 0.5 * m_w2 * std::pow(3.0 * n * u1 / (2.0 * m_w2), 2.0 / 3.0);
}

double thomas_fermi_radius(double mu, const AtomSpecies& species, const TrapConfig& trap) {
    if (mu <= 0.0) return 0.0;
    return std::sqrt(2.0 * mu / (species.mass * trap.omega * trap.omega));
}

double thomas_fermi_density(double r, double n, const AtomSpecies& species,
                            const TrapConfig& trap, double u_tt) {
    if (u_tt == 0.0)
        throw ConfigError("Thomas-Fermi density undefined for U_tt = 0");
    const double mu = chemical_potential(n, species, trap, u_tt);
    const double v = 0.5 * species.mass * trap.omega * trap.omega * r * r;
    return std::max(0.0, (mu - v) / u_tt);
}

double ThomasFermi1D::density(double x) const {
    const double v = 0.5 * mass * omega * omega * x * x;
    return std::max(0.0, (mu - v) / u1);
}

ThomasFermi1D ThomasFermi1D::make(double n, const AtomSpecies& species, const TrapConfig& trap,
                                  double u1) {
    if (u1 == 0.0)
        throw ConfigError("Thomas-Fermi profile undefined for u1 = 0");
    ThomasFermi1D tf;
    tf.mu = chemical_potential_1d(n, species, trap, u1);
    tf.radius = thomas_fermi_radius(tf.mu, species, trap);
    tf.u1 = u1;
    tf.mass = species.mass;
    tf.omega = trap.omega;
    return tf;
}

} // namespace atomlaser
