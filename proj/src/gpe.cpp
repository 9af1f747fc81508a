#include "atomlaser/gpe.hpp"

#include <algorithm>
#include <cmath>

#include "fft_util.hpp"

namespace atomlaser {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

double norm_sum(const std::vector<std::complex<double>>& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return s;
}

} // namespace

void SpatialGrid::validate() const {
    if (!is_power_of_two(n)) throw ConfigError("grid point count must be a power of two");
    if (!(length > 0.0)) throw ConfigError("grid length must be > 0");
    const double closure = dx() * dk() * static_cast<double>(n) / (2.0 * pi);
    if (std::fabs(closure - 1.0) > 1e-12)
        throw ConfigError("grid closure dx*dk*n != 2*pi");
}

SpatialGrid SpatialGrid::centered(std::size_t n, double length, double center) {
    SpatialGrid g;
    g.n = n;
    g.length = length;
    g.x0 = center - 0.5 * length;
    g.validate();
    return g;
}

double FieldState::n_trapped() const { return norm_sum(psi_t) * grid.dx(); }
double FieldState::n_beam() const { return norm_sum(psi_u) * grid.dx(); }

double FieldState::outcoupled_fraction() const {
    const double total = total_accounted();
    return total > 0.0 ? (n_beam() + absorbed) / total : 0.0;
}

double DetuningSchedule::mu(double n_trapped) const {
    switch (mu_model) {
        case MuModel::tf_1d:
            return chemical_potential_1d(std::max(n_trapped, 0.0), species_for_model,
                                         trap_for_model, coupling_for_model);
        case MuModel::tf_3d:
            return chemical_potential(std::max(n_trapped, 0.0), species_for_model,
                                      trap_for_model, coupling_for_model);
    }
    return 0.0;
}

double DetuningSchedule::delta(double t, double n_trapped) const {
    (void)t;
    if (kind == Kind::constant) return delta0;
    const double recoil = hbar * kick * kick / (2.0 * mass);
    return recoil - (mu(n_trapped) - mu_at_start) / hbar -
           0.5 * mass * omega * omega * r0 * r0 / hbar;
}

double DetuningSchedule::e_out(double t, double n_trapped) const {
    return hbar * delta(t, n_trapped) + mu(n_trapped);
}

DetuningSchedule DetuningSchedule::constant(double delta) {
    DetuningSchedule s;
    s.kind = Kind::constant;
    s.delta0 = delta;
    return s;
}

DetuningSchedule DetuningSchedule::chirp_compensated(const AtomSpecies& species,
                                                     const TrapConfig& trap,
                                                     double coupling_for_model, MuModel model,
                                                     double n0, double r0, double kick) {
    species.validate();
    trap.validate();
    DetuningSchedule s;
    s.kind = Kind::chirp_compensated;
    s.r0 = r0;
    s.kick = kick;
    s.mu_model = model;
    s.mass = species.mass;
    s.omega = trap.omega;
    s.coupling_for_model = coupling_for_model;
    s.species_for_model = species;
    s.trap_for_model = trap;
    s.mu_at_start = s.mu(n0);
    const double r_tf = thomas_fermi_radius(s.mu_at_start, species, trap);
    if (r0 > r_tf)
        throw ConfigError("outcoupling point r0 lies outside the condensate");
    s.delta0 = s.delta(0.0, n0);
    return s;
}

double chirp_compensated_detuning(double t, double n_trapped, const DetuningSchedule& schedule) {
    return schedule.delta(t, n_trapped);
}

namespace {

struct SplitStepper {
    const GpeSystem& sys;
    const CouplingConfig& coupling;
    SpatialGrid grid;
    double dt; // signed
    Fft1D fft;

    std::vector<std::complex<double>> kin_half, kin_full;
    std::vector<double> vtrap;
    std::vector<double> off_re, off_im; // off-diagonal -hbar Omega e^{-i k0 x}
    std::vector<double> absorber_decay; // per-step amplitude factor
    bool absorber_on = false;
    double h_omega2 = 0.0; // (hbar |Omega|)^2

    SplitStepper(const GpeSystem& s, const CouplingConfig& c, const SpatialGrid& g, double dt_in,
                 const AbsorberConfig& ab)
        : sys(s), coupling(c), grid(g), dt(dt_in), fft(g.n) {
        const std::size_t n = grid.n;
        kin_half.resize(n);
        kin_full.resize(n);
        const double kfac = hbar * dt / (2.0 * sys.species.mass);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = grid.k_fft(i);
            kin_full[i] = std::polar(1.0, -kfac * k * k);
            kin_half[i] = std::polar(1.0, -0.5 * kfac * k * k);
        }
        vtrap.resize(n);
        off_re.resize(n);
        off_im.resize(n);
        const double m_w2 = sys.species.mass * sys.trap.omega * sys.trap.omega;
        const double mag = hbar * coupling.rabi_magnitude;
        h_omega2 = mag * mag;
        const double k0 = coupling.scheme == CouplingScheme::raman ? coupling.kick : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid.x(i);
            const double xr = x - sys.trap_center;
            vtrap[i] = 0.5 * m_w2 * xr * xr;
            // off = -hbar |Omega| e^{i (phase - k0 x)}
            const double ph = coupling.rabi_phase - k0 * x;
            off_re[i] = -mag * std::cos(ph);
            off_im[i] = -mag * std::sin(ph);
        }
        if (ab.enabled) {
            absorber_on = true;
            absorber_decay.assign(n, 1.0);
            const double width = ab.fraction * grid.length;
            const double x_on = grid.x0 + grid.length - width;
            double strength = ab.strength;
            if (strength <= 0.0) {
                // Scale with the fastest beam component expected to arrive.
                const double k_ref =
                    std::max(std::fabs(k0), 2.0 * pi / (8.0 * grid.dx()));
                const double v = hbar * k_ref / sys.species.mass;
                strength = 25.0 * v / width;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double x = grid.x(i);
                if (x > x_on) {
                    const double u = (x - x_on) / width;
                    const double gamma_x = strength * std::sin(0.5 * pi * u) * std::sin(0.5 * pi * u);
                    absorber_decay[i] = std::exp(-gamma_x * std::fabs(dt));
                }
            }
        }
    }

    void kinetic(std::vector<std::complex<double>>& psi, const std::vector<std::complex<double>>& fac) {
        fft.forward(psi.data());
        for (std::size_t i = 0; i < grid.n; ++i) psi[i] *= fac[i];
        fft.backward(psi.data());
    }

    void kinetic_half_both(FieldState& f) {
        kinetic(f.psi_t, kin_half);
        kinetic(f.psi_u, kin_half);
    }
    void kinetic_full_both(FieldState& f) {
        kinetic(f.psi_t, kin_full);
        kinetic(f.psi_u, kin_full);
    }

    // Exact 2x2 rotation with frozen mean-field coefficients.
    void x_step(FieldState& f, double delta) {
        const double u_tt = sys.reduced_tt();
        const double u_uu = sys.reduced_uu();
        const double u_tu = sys.reduced_tu();
        const double dt_over_h = dt / hbar;
        const double hd = hbar * delta;
        const std::size_t n = grid.n;
        std::complex<double>* pt = f.psi_t.data();
        std::complex<double>* pu = f.psi_u.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double at2 = std::norm(pt[i]);
            const double au2 = std::norm(pu[i]);
            const double vt = vtrap[i] + u_tt * at2 + u_tu * au2;
            const double vu = -hd + u_uu * au2 + u_tu * at2;
            const double avg = 0.5 * (vt + vu);
            const double h = 0.5 * (vt - vu);
            const double r = std::sqrt(h * h + h_omega2);
            const double theta = r * dt_over_h;
            const double c = std::cos(theta);
            const double sn = r > 1e-300 ? std::sin(theta) / r : dt_over_h;
            const std::complex<double> off(off_re[i], off_im[i]);
            const std::complex<double> t0 = pt[i];
            const std::complex<double> u0 = pu[i];
            const std::complex<double> i_sn(0.0, sn);
            std::complex<double> t1 = c * t0 - i_sn * (h * t0 + off * u0);
            std::complex<double> u1 = c * u0 - i_sn * (std::conj(off) * t0 - h * u0);
            const std::complex<double> global = std::polar(1.0, -avg * dt_over_h);
            pt[i] = global * t1;
            pu[i] = global * u1;
        }
    }

    // Returns the atom number removed this step.
    double absorb(FieldState& f) {
        if (!absorber_on) return 0.0;
        double removed = 0.0;
        const std::size_t n = grid.n;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = absorber_decay[i];
            if (d == 1.0) continue;
            const double before = std::norm(f.psi_t[i]) + std::norm(f.psi_u[i]);
            f.psi_t[i] *= d;
            f.psi_u[i] *= d;
            removed += before * (1.0 - d * d);
        }
        return removed * grid.dx();
    }
};

} // namespace

FieldState ground_state(const SpatialGrid& grid, const GpeSystem& system, double n0,
                        const GroundStateOptions& opts) {
    grid.validate();
    system.species.validate();
    system.trap.validate();
    if (!(n0 > 0.0)) throw ConfigError("ground state needs n0 > 0");

    const double m = system.species.mass;
    const double w = system.trap.omega;
    const double a_ho = std::sqrt(hbar / (m * w));
    const double u1 = system.reduced_tt();
    const double mu_tf = u1 > 0.0 ? chemical_potential_1d(n0, system.species, system.trap, u1)
                                  : 0.5 * hbar * w;
    const double e_scale = std::max(mu_tf, hbar * w);

    FieldState f;
    f.grid = grid;
    f.time = 0.0;
    f.psi_t.resize(grid.n);
    f.psi_u.assign(grid.n, {0.0, 0.0});

    // Thomas-Fermi-shaped start in the interacting case, Gaussian otherwise.
    const bool tf_start = u1 > 0.0 && mu_tf > 2.0 * hbar * w;
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double x = grid.x(i) - system.trap_center;
        double d;
        if (tf_start)
            d = std::max(0.0, (mu_tf - 0.5 * m * w * w * x * x) / u1);
        else
            d = std::exp(-x * x / (a_ho * a_ho));
        f.psi_t[i] = std::sqrt(d);
    }
    const double raw = norm_sum(f.psi_t) * grid.dx();
    const double rescale = std::sqrt(n0 / raw);
    for (auto& z : f.psi_t) z *= rescale;

    double dtau = opts.dtau > 0.0 ? opts.dtau : 0.1 * hbar / e_scale;

    Fft1D fft(grid.n);
    std::vector<double> kin(grid.n), vt(grid.n);
    const double m_w2 = m * w * w;
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double x = grid.x(i) - system.trap_center;
        vt[i] = 0.5 * m_w2 * x * x;
    }
    auto set_kinetic = [&](double tau) {
        for (std::size_t i = 0; i < grid.n; ++i) {
            const double k = grid.k_fft(i);
            kin[i] = std::exp(-hbar * k * k * tau / (4.0 * m)); // half step
        }
    };
    set_kinetic(dtau);

    auto iterate = [&](double tau) {
        // K_half V K_half with renormalization.
        fft.forward(f.psi_t.data());
        for (std::size_t i = 0; i < grid.n; ++i) f.psi_t[i] *= kin[i];
        fft.backward(f.psi_t.data());
        for (std::size_t i = 0; i < grid.n; ++i) {
            const double v = vt[i] + u1 * std::norm(f.psi_t[i]);
            f.psi_t[i] *= std::exp(-v * tau / hbar);
        }
        fft.forward(f.psi_t.data());
        for (std::size_t i = 0; i < grid.n; ++i) f.psi_t[i] *= kin[i];
        fft.backward(f.psi_t.data());
        const double nn = norm_sum(f.psi_t) * grid.dx();
        const double sc = std::sqrt(n0 / nn);
        for (auto& z : f.psi_t) z *= sc;
    };

    std::vector<double> prev_abs(grid.n, 0.0);
    auto density_change = [&]() {
        double peak = 0.0;
        for (const auto& z : f.psi_t) peak = std::max(peak, std::abs(z));
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.n; ++i) {
            const double cur = std::abs(f.psi_t[i]);
            worst = std::max(worst, std::fabs(cur - prev_abs[i]));
            prev_abs[i] = cur;
        }
        return worst / peak;
    };

    const int stages = 3;
    std::size_t iter = 0;
    bool converged = false;
    for (int stage = 0; stage < stages && !converged; ++stage) {
        const double tol = opts.density_tolerance * (stage + 1 == stages ? 1.0 : 10.0);
        density_change(); // prime prev_abs
        const std::size_t check_every = 25;
        while (iter < opts.max_iterations) {
            for (std::size_t k = 0; k < check_every; ++k) iterate(dtau);
            iter += check_every;
            const double c = density_change() / static_cast<double>(check_every);
            if (c < tol) break;
        }
        if (iter >= opts.max_iterations) break;
        if (stage + 1 < stages) {
            dtau /= 8.0;
            set_kinetic(dtau);
        } else {
            converged = true;
        }
    }
    if (!converged)
        throw DivergenceError("ground state did not converge within the iteration cap");

    if (opts.verify) {
        const double err = stationarity_error(f, system);
        if (err > opts.stationarity_tolerance)
            throw DivergenceError("ground state failed the stationarity check: " +
                                  std::to_string(err));
    }
    return f;
}

GpeResult evolve_gpe(const FieldState& initial, const GpeSystem& system,
                     const CouplingConfig& coupling, const DetuningSchedule& schedule,
                     double duration, const GpeEvolveOptions& opts) {
    initial.grid.validate();
    system.species.validate();
    system.trap.validate();
    coupling.validate();
    if (duration == 0.0) throw ConfigError("duration must be nonzero");
    if (duration < 0.0 && opts.absorber.enabled)
        throw ConfigError("backward evolution requires the absorber to be off");
    if (initial.psi_t.size() != initial.grid.n || initial.psi_u.size() != initial.grid.n)
        throw ConfigError("field arrays do not match the grid");

    const double dx = initial.grid.dx();
    const double step_bound = dx * dx * system.species.mass / (pi * hbar);
    double dt_mag = opts.dt > 0.0 ? opts.dt : 0.8 * step_bound;
    if (dt_mag > step_bound)
        throw NumericalGuardError("kinetic-split-step",
                                  "dt exceeds the kinetic split bound dx^2 m / (pi hbar)");
    dt_mag = std::min(dt_mag, std::fabs(duration));
    const std::size_t steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::fabs(duration) / dt_mag)));
    const double dt = duration / static_cast<double>(steps);

    SplitStepper stepper(system, coupling, initial.grid, dt, opts.absorber);

    FieldState f = initial;
    const double n_init = f.total_accounted();

    const std::size_t samples =
        std::max<std::size_t>(2, std::min<std::size_t>(opts.samples, steps + 1));
    const std::size_t stride = std::max<std::size_t>(1, steps / (samples - 1));

    std::vector<std::size_t> snapshot_steps;
    for (double ts : opts.snapshot_times) {
        const double rel = (ts - initial.time) / dt;
        snapshot_steps.push_back(
            std::min<std::size_t>(static_cast<std::size_t>(std::llround(std::max(rel, 0.0))), steps));
    }

    GpeResult result;
    auto record_sample = [&](double t) {
        GpeSample s;
        s.time = t;
        s.n_trapped = f.n_trapped();
        s.n_beam = f.n_beam();
        s.n_absorbed = f.absorbed;
        s.detuning = schedule.delta(t, s.n_trapped);
        if (schedule.time_dependent()) {
            s.mu = schedule.mu(s.n_trapped);
            s.e_out = hbar * s.detuning + s.mu;
        }
        result.samples.push_back(s);
    };
    record_sample(initial.time);
    for (std::size_t ss : snapshot_steps)
        if (ss == 0) result.snapshots.push_back(f);

    const std::size_t edge_zone = std::min<std::size_t>(5, initial.grid.n / 4);
    auto guards = [&](double t, std::size_t step) {
        if (!opts.check_guards) return;
        double edge = 0.0;
        for (std::size_t j = 0; j < edge_zone; ++j) {
            edge += std::norm(f.psi_u[j]) + std::norm(f.psi_t[j]);
            const std::size_t r = initial.grid.n - 1 - j;
            edge += std::norm(f.psi_u[r]) + std::norm(f.psi_t[r]);
        }
        edge *= dx;
        if (edge > opts.edge_tolerance * n_init)
            throw NumericalGuardError("grid-extent",
                                      "field reached the grid edge at t = " + std::to_string(t) +
                                          "; enlarge the box or the absorber");
        if (step % 1000 == 0 || step == steps) {
            const double drift = std::fabs(f.total_accounted() - n_init) / n_init;
            const double budget =
                opts.accounting_tolerance * (1.0 + static_cast<double>(step) / 1000.0);
            if (drift > budget)
                throw DivergenceError("norm accounting drift " + std::to_string(drift) +
                                      " at step " + std::to_string(step));
        }
    };

    // Strang march with merged kinetic half steps between x stages.
    stepper.kinetic_half_both(f);
    double n_t_cache = f.n_trapped();
    for (std::size_t step = 1; step <= steps; ++step) {
        const double t_mid = initial.time + dt * (static_cast<double>(step) - 0.5);
        if (schedule.time_dependent()) n_t_cache = f.n_trapped();
        const double delta_now = schedule.delta(t_mid, n_t_cache);
        stepper.x_step(f, delta_now);
        f.absorbed += stepper.absorb(f);

        const double t_now = initial.time + dt * static_cast<double>(step);
        const bool is_last = step == steps;
        bool want_snapshot = false;
        for (std::size_t ss : snapshot_steps) want_snapshot |= (ss == step);
        const bool want_sample = (step % stride == 0) || is_last;

        if (is_last) {
            stepper.kinetic_half_both(f);
            f.time = t_now;
            if (want_snapshot) result.snapshots.push_back(f);
            record_sample(t_now);
            guards(t_now, step);
        } else if (want_snapshot) {
            stepper.kinetic_half_both(f);
            f.time = t_now;
            result.snapshots.push_back(f);
            if (want_sample) record_sample(t_now);
            guards(t_now, step);
            stepper.kinetic_half_both(f);
        } else {
            stepper.kinetic_full_both(f);
            f.time = t_now;
            if (want_sample) {
                record_sample(t_now);
                guards(t_now, step);
            }
        }
    }

    result.final_state = f;
    return result;
}

namespace {

Spectrum spectrum_of_field(const std::vector<std::complex<double>>& field,
                           const SpatialGrid& grid, unsigned pad, double time,
                           const char* provenance) {
    if (pad == 0) pad = 1;
    const std::size_t n = grid.n;
    const std::size_t nf = n * pad;
    std::vector<std::complex<double>> buf(nf, {0.0, 0.0});
    std::copy(field.begin(), field.end(), buf.begin());
    Fft1D fft(nf);
    fft.forward(buf.data());

    const double dx = grid.dx();
    const double dkf = 2.0 * pi / (grid.length * pad);
    const double scale = dx / std::sqrt(2.0 * pi);

    Spectrum s;
    s.kind = SpectrumAxis::wavenumber;
    s.time = time;
    s.provenance = provenance;
    s.axis.resize(nf);
    s.density.resize(nf);
    // Reorder FFT bins to a monotone axis: negative half first.
    const std::size_t half = nf / 2;
    for (std::size_t j = 0; j < nf; ++j) {
        const std::size_t src = (j + half) % nf;
        const double idx = src <= half ? static_cast<double>(src)
                                       : static_cast<double>(src) - static_cast<double>(nf);
        s.axis[j] = dkf * idx;
        s.density[j] = std::norm(buf[src] * scale);
    }
    return s;
}

} // namespace

Spectrum beam_momentum_spectrum(const FieldState& state, unsigned pad) {
    state.grid.validate();
    return spectrum_of_field(state.psi_u, state.grid, pad, state.time, "gpe-beam");
}

Spectrum beam_momentum_spectrum_masked(const FieldState& state, unsigned pad, double x_cut,
                                       double taper) {
    state.grid.validate();
    if (!(taper > 0.0)) throw ConfigError("mask taper must be > 0");
    std::vector<std::complex<double>> masked = state.psi_u;
    for (std::size_t i = 0; i < state.grid.n; ++i) {
        const double x = state.grid.x(i);
        if (x <= x_cut - taper) {
            masked[i] = {0.0, 0.0};
        } else if (x < x_cut) {
            const double u = (x - (x_cut - taper)) / taper;
            masked[i] *= 0.5 * (1.0 - std::cos(pi * u));
        }
    }
    return spectrum_of_field(masked, state.grid, pad, state.time, "gpe-beam-escaped");
}

double measure_chemical_potential(const FieldState& state, const GpeSystem& system) {
    state.grid.validate();
    const std::size_t n = state.grid.n;
    const double dx = state.grid.dx();
    const double number = state.n_trapped();
    if (!(number > 0.0)) throw ConfigError("empty trapped field");

    std::vector<std::complex<double>> buf = state.psi_t;
    Fft1D fft(n);
    fft.forward(buf.data());
    double kinetic = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double k = state.grid.k_fft(i);
        kinetic += hbar * hbar * k * k / (2.0 * system.species.mass) * std::norm(buf[i]);
    }
    kinetic *= dx / static_cast<double>(n);

    const double m_w2 = system.species.mass * system.trap.omega * system.trap.omega;
    const double u1 = system.reduced_tt();
    double potential = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = state.grid.x(i) - system.trap_center;
        const double d = std::norm(state.psi_t[i]);
        potential += (0.5 * m_w2 * x * x) * d + u1 * d * d;
    }
    potential *= dx;
    return (kinetic + potential) / number;
}

double stationarity_error(const FieldState& state, const GpeSystem& system) {
    CouplingConfig off;
    off.scheme = CouplingScheme::rf;
    off.rabi_magnitude = 0.0;
    off.kick = 0.0;
    GpeEvolveOptions opts;
    opts.check_guards = false;
    opts.samples = 2;
    const double dx = state.grid.dx();
    const double dt = 0.8 * dx * dx * system.species.mass / (pi * hbar);
    opts.dt = dt;
    const GpeResult r = evolve_gpe(state, system, off, DetuningSchedule::constant(0.0), dt, opts);

    double peak = 0.0;
    for (const auto& z : state.psi_t) peak = std::max(peak, std::abs(z));
    const double floor = 1e-6 * peak;
    double worst = 0.0;
    for (std::size_t i = 0; i < state.grid.n; ++i) {
        const double before = std::abs(state.psi_t[i]);
        if (before < floor) continue;
        const double after = std::abs(r.final_state.psi_t[i]);
        worst = std::max(worst, std::fabs(after - before) / before);
    }
    return worst;
}

double initial_line_center(double n0, double kick, const AtomSpecies& species,
                           const TrapConfig& trap, double u_tt3d) {
    const double mu = chemical_potential(n0, species, trap, u_tt3d);
    return std::sqrt(kick * kick + 2.0 * species.mass * mu / (hbar * hbar));
}

double weak_outcoupling_budget(double n0, double delta_omega, const AtomSpecies& species,
                               const TrapConfig& trap, double u_tt3d) {
    if (delta_omega < 0.0) throw ConfigError("delta_omega must be >= 0");
    if (!(u_tt3d > 0.0)) throw ConfigError("budget needs a repulsive U_tt");
    const double m_w2 = species.mass * trap.omega * trap.omega;
    return 5.0 * hbar / m_w2 * std::pow(4.0 * pi * m_w2 / (15.0 * u_tt3d), 2.0 / 5.0) *
           std::pow(n0, 3.0 / 5.0) * delta_omega;
}

Spectrum restrict_axis(const Spectrum& s, double lo, double hi) {
    Spectrum out;
    out.kind = s.kind;
    out.time = s.time;
    out.provenance = s.provenance;
    for (std::size_t i = 0; i < s.axis.size(); ++i) {
        if (s.axis[i] >= lo && s.axis[i] <= hi) {
            out.axis.push_back(s.axis[i]);
            out.density.push_back(s.density[i]);
        }
    }
    if (out.axis.size() < 4)
        throw AnalysisError("axis window keeps fewer than 4 samples");
    return out;
}

} // namespace atomlaser
