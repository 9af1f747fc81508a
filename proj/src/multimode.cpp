#include "atomlaser/multimode.hpp"

#include <algorithm>
#include <cmath>

namespace atomlaser {

double hermite_function(unsigned n, double xi) {
    const double h0 = std::pow(pi, -0.25) * std::exp(-0.5 * xi * xi);
    if (n == 0) return h0;
    double hm = h0;
    double h = std::sqrt(2.0) * xi * h0;
    for (unsigned j = 1; j < n; ++j) {
        const double hn = std::sqrt(2.0 / (j + 1.0)) * xi * h - std::sqrt(j / (j + 1.0)) * hm;
        hm = h;
        h = hn;
    }
    return h;
}

TrapModeBasis TrapModeBasis::make(unsigned mode_count, const AtomSpecies& species,
                                  const TrapConfig& trap) {
    species.validate();
    trap.validate();
    if (mode_count == 0) throw ConfigError("trap basis needs at least one mode");
    TrapModeBasis b;
    b.mode_count = mode_count;
    b.mass = species.mass;
    b.omega = trap.omega;
    b.length = std::sqrt(hbar / (species.mass * trap.omega));
    return b;
}

double TrapModeBasis::eigenfrequency(unsigned n) const {
    return omega * (n + 0.5);
}

double TrapModeBasis::position_eigenfunction(unsigned n, double x) const {
    return hermite_function(n, x / length) / std::sqrt(length);
}

std::complex<double> TrapModeBasis::momentum_eigenfunction(unsigned n, double k) const {
    // Fourier transform of h_n is (-i)^n h_n in the conjugate variable.
    static const std::complex<double> phases[4] = {
        {1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
    return phases[n % 4] * (hermite_function(n, k * length) * std::sqrt(length));
}

CouplingMatrix coupling_matrix(const TrapModeBasis& basis, const BeamModeGrid& grid,
                               const CouplingConfig& coupling) {
    grid.validate();
    coupling.validate();
    const double k0 = coupling.scheme == CouplingScheme::raman ? coupling.kick : 0.0;
    // Momentum support of the highest mode: classical turning point plus tails.
    const double support =
        (std::sqrt(2.0 * basis.mode_count - 1.0) + 6.0) / basis.length;
    if (grid.q.front() > k0 - support || grid.q.back() < k0 + support)
        throw NumericalGuardError("grid-coverage",
                                  "beam grid does not cover the shifted momentum support "
                                  "of all trap modes");
    CouplingMatrix m;
    m.trap_modes = basis.mode_count;
    m.beam_modes = grid.q.size();
    m.a.resize(static_cast<std::size_t>(basis.mode_count) * grid.q.size());
    for (unsigned mm = 0; mm < basis.mode_count; ++mm)
        for (std::size_t n = 0; n < grid.q.size(); ++n)
            m.a[mm * grid.q.size() + n] = basis.momentum_eigenfunction(mm, grid.q[n] - k0);
    return m;
}

double MultimodeState::trap_number() const {
    double s = 0.0;
    for (const auto& a : alpha) s += std::norm(a);
    return s;
}

double MultimodeState::beam_number() const {
    double s = 0.0;
    for (const auto& b : beta) s += std::norm(b);
    return s;
}

MultimodeTrajectory evolve_multimode(const MultimodeState& initial, const TrapModeBasis& basis,
                                     const BeamModeGrid& grid, const CouplingMatrix& matrix,
                                     const CouplingConfig& coupling, double duration,
                                     const MultimodeEvolveOptions& opts) {
    if (!(duration > 0.0)) throw ConfigError("duration must be > 0");
    if (initial.frame != Frame::lab)
        throw ConfigError("evolve_multimode expects a lab-frame initial state");
    const unsigned M = basis.mode_count;
    const std::size_t K = grid.q.size();
    if (initial.alpha.size() != M || initial.beta.size() != K ||
        matrix.trap_modes != M || matrix.beam_modes != K)
        throw ConfigError("state / basis / matrix dimensions disagree");

    const double n0 = initial.trap_number() + initial.beam_number();
    const double root_dk = std::sqrt(grid.dq);
    const std::complex<double> rabi = coupling.rabi();

    // Rotation rates. alpha_m rotates at omega_tm, beta_n at omega_un - delta.
    std::vector<double> wa(M), wb(K);
    for (unsigned m = 0; m < M; ++m) wa[m] = basis.eigenfrequency(m);
    for (std::size_t n = 0; n < K; ++n) wb[n] = grid.omega[n] - coupling.detuning;

    double max_rate = 0.0;
    for (unsigned m = 0; m < M; ++m)
        for (std::size_t n = 0; n < K; ++n)
            max_rate = std::max(max_rate, std::fabs(wa[m] - wb[n]));

    if (opts.check_guards) {
        // Mode spacing in energy near the resonance of the most energetic
        // populated trap mode bounds the revival-free window.
        double spacing = 1e300;
        for (std::size_t n = 0; n + 1 < K; ++n)
            if (grid.q[n] > 0.0)
                spacing = std::min(spacing, std::fabs(grid.omega[n + 1] - grid.omega[n]));
        if (spacing < 1e300 && spacing > 0.0) {
            const double t_revival = 2.0 * pi / spacing;
            if (duration * opts.revival_safety > t_revival)
                throw NumericalGuardError("revival-time",
                                          "duration exceeds the discrete-mode revival window");
        }
    }

    double dt = opts.dt;
    if (dt <= 0.0) dt = 0.1 / std::max(max_rate, 1e-12);
    dt = std::min(dt, duration / 8.0);
    const std::size_t steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / dt)));
    dt = duration / static_cast<double>(steps);

    const std::size_t samples =
        std::max<std::size_t>(2, std::min<std::size_t>(opts.samples, steps + 1));
    const std::size_t stride = std::max<std::size_t>(1, steps / (samples - 1));

    std::vector<std::size_t> snapshot_steps;
    for (double ts : opts.snapshot_times)
        snapshot_steps.push_back(
            std::min<std::size_t>(static_cast<std::size_t>(std::llround(ts / dt)), steps));

    // Rotating amplitudes (equal to lab amplitudes at t = 0 only if time = 0;
    // transform explicitly to stay general).
    std::vector<std::complex<double>> a(M), b(K);
    for (unsigned m = 0; m < M; ++m)
        a[m] = initial.alpha[m] * std::polar(1.0, wa[m] * initial.time);
    for (std::size_t n = 0; n < K; ++n)
        b[n] = initial.beta[n] * std::polar(1.0, wb[n] * initial.time);

    // Stage phase factors u_m = e^{i wa t}, v_n = e^{-i wb t} maintained
    // incrementally.
    std::vector<std::complex<double>> u(M), v(K), uh(M), vh(K);
    for (unsigned m = 0; m < M; ++m) {
        u[m] = std::polar(1.0, wa[m] * initial.time);
        uh[m] = std::polar(1.0, wa[m] * 0.5 * dt);
    }
    for (std::size_t n = 0; n < K; ++n) {
        v[n] = std::polar(1.0, -wb[n] * initial.time);
        vh[n] = std::polar(1.0, -wb[n] * 0.5 * dt);
    }

    MultimodeTrajectory traj;
    auto push_sample = [&](double t, const std::vector<std::complex<double>>& aa,
                           const std::vector<std::complex<double>>& bb) {
        traj.times.push_back(t);
        double na = 0.0, nb = 0.0;
        for (const auto& z : aa) na += std::norm(z);
        for (const auto& z : bb) nb += std::norm(z);
        traj.trap_number.push_back(na);
        traj.beam_number.push_back(nb);
    };
    push_sample(initial.time, a, b);

    auto make_lab_state = [&](double t) {
        MultimodeState s;
        s.time = t;
        s.frame = Frame::lab;
        s.alpha.resize(M);
        s.beta.resize(K);
        for (unsigned m = 0; m < M; ++m) s.alpha[m] = a[m] * std::polar(1.0, -wa[m] * t);
        for (std::size_t n = 0; n < K; ++n) s.beta[n] = b[n] * std::polar(1.0, -wb[n] * t);
        return s;
    };
    for (std::size_t ss : snapshot_steps)
        if (ss == 0) traj.snapshots.push_back(make_lab_state(initial.time));

    // RHS at a stage with phase vectors (us, vs):
    //   da_m = i Omega u_m sum_n A_mn sqrt(dk) (b_n v_n)
    //   db_n = i conj(Omega) conj(v_n) sum_m conj(A_mn) (a_m conj(u_m)) sqrt(dk)
    std::vector<std::complex<double>> bv(K), au(M), da(M), db(K), at1(M), bt1(K);
    auto rhs = [&](const std::vector<std::complex<double>>& aa,
                   const std::vector<std::complex<double>>& bb,
                   const std::vector<std::complex<double>>& us,
                   const std::vector<std::complex<double>>& vs,
                   std::vector<std::complex<double>>& out_da,
                   std::vector<std::complex<double>>& out_db) {
        for (std::size_t n = 0; n < K; ++n) bv[n] = bb[n] * vs[n];
        for (unsigned m = 0; m < M; ++m) au[m] = aa[m] * std::conj(us[m]);
        const std::complex<double> i_unit(0.0, 1.0);
        for (unsigned m = 0; m < M; ++m) {
            std::complex<double> acc = 0.0;
            const std::complex<double>* row = &matrix.a[m * K];
            for (std::size_t n = 0; n < K; ++n) acc += row[n] * bv[n];
            out_da[m] = i_unit * rabi * us[m] * acc * root_dk;
        }
        for (std::size_t n = 0; n < K; ++n) out_db[n] = 0.0;
        for (unsigned m = 0; m < M; ++m) {
            const std::complex<double>* row = &matrix.a[m * K];
            const std::complex<double> w = au[m];
            for (std::size_t n = 0; n < K; ++n) out_db[n] += std::conj(row[n]) * w;
        }
        for (std::size_t n = 0; n < K; ++n)
            out_db[n] *= i_unit * std::conj(rabi) * std::conj(vs[n]) * root_dk;
    };

    std::vector<std::complex<double>> k1a(M), k2a(M), k3a(M), k4a(M);
    std::vector<std::complex<double>> k1b(K), k2b(K), k3b(K), k4b(K);
    std::vector<std::complex<double>> um(M), ue(M), vm(K), ve(K);

    double t = initial.time;
    for (std::size_t step = 1; step <= steps; ++step) {
        for (unsigned m = 0; m < M; ++m) {
            um[m] = u[m] * uh[m];
            ue[m] = um[m] * uh[m];
        }
        for (std::size_t n = 0; n < K; ++n) {
            vm[n] = v[n] * vh[n];
            ve[n] = vm[n] * vh[n];
        }
        rhs(a, b, u, v, k1a, k1b);
        for (unsigned m = 0; m < M; ++m) at1[m] = a[m] + 0.5 * dt * k1a[m];
        for (std::size_t n = 0; n < K; ++n) bt1[n] = b[n] + 0.5 * dt * k1b[n];
        rhs(at1, bt1, um, vm, k2a, k2b);
        for (unsigned m = 0; m < M; ++m) at1[m] = a[m] + 0.5 * dt * k2a[m];
        for (std::size_t n = 0; n < K; ++n) bt1[n] = b[n] + 0.5 * dt * k2b[n];
        rhs(at1, bt1, um, vm, k3a, k3b);
        for (unsigned m = 0; m < M; ++m) at1[m] = a[m] + dt * k3a[m];
        for (std::size_t n = 0; n < K; ++n) bt1[n] = b[n] + dt * k3b[n];
        rhs(at1, bt1, ue, ve, k4a, k4b);
        for (unsigned m = 0; m < M; ++m)
            a[m] += dt / 6.0 * (k1a[m] + 2.0 * (k2a[m] + k3a[m]) + k4a[m]);
        for (std::size_t n = 0; n < K; ++n)
            b[n] += dt / 6.0 * (k1b[n] + 2.0 * (k2b[n] + k3b[n]) + k4b[n]);
        u.swap(ue);
        v.swap(ve);
        if (step % 4096 == 0) {
            for (auto& z : u) z /= std::abs(z);
            for (auto& z : v) z /= std::abs(z);
        }
        t = initial.time + dt * static_cast<double>(step);

        if (step % stride == 0 || step == steps) {
            push_sample(t, a, b);
            if (opts.check_guards) {
                const double total = traj.trap_number.back() + traj.beam_number.back();
                if (std::fabs(total - n0) / std::max(n0, 1e-300) > opts.norm_drift_tolerance)
                    throw DivergenceError("multimode norm drift at t = " + std::to_string(t));
                double edge = 0.0;
                const std::size_t z = std::min<std::size_t>(5, K / 2);
                for (std::size_t j = 0; j < z; ++j)
                    edge += std::norm(b[j]) + std::norm(b[K - 1 - j]);
                if (edge > opts.boundary_tolerance * n0)
                    throw NumericalGuardError("grid-boundary",
                                              "beam population reached the k-grid edge");
            }
        }
        for (std::size_t ss : snapshot_steps)
            if (ss == step) traj.snapshots.push_back(make_lab_state(t));
    }

    traj.final_state = make_lab_state(initial.time + duration);
    return traj;
}

double resonant_momentum(unsigned n, double detuning, double kick, const AtomSpecies& species,
                         const TrapConfig& trap) {
    const double omega_n = trap.omega * (n + 0.5);
    const double total = detuning + omega_n;
    if (total <= 0.0)
        throw NumericalGuardError("no-propagating-mode",
                                  "delta + omega_n <= 0: no resonant propagating state");
    return std::sqrt(2.0 * species.mass * total / hbar) - kick;
}

std::vector<ModeIntensity> relative_intensities(const std::vector<std::complex<double>>& alpha,
                                                const TrapModeBasis& basis, double detuning,
                                                double kick) {
    std::vector<ModeIntensity> out(alpha.size());
    AtomSpecies species;
    species.mass = basis.mass;
    TrapConfig trap;
    trap.omega = basis.omega;
    double peak = 0.0;
    for (unsigned n = 0; n < alpha.size(); ++n) {
        ModeIntensity mi;
        mi.n = n;
        try {
            mi.k_res = resonant_momentum(n, detuning, kick, species, trap);
            const double h = hermite_function(n, mi.k_res * basis.length);
            mi.intensity = std::norm(alpha[n]) * h * h * basis.length;
            mi.resonant = true;
        } catch (const NumericalGuardError&) {
            mi.k_res = 0.0;
            mi.intensity = 0.0;
            mi.resonant = false;
        }
        peak = std::max(peak, mi.intensity);
        out[n] = mi;
    }
    if (peak > 0.0)
        for (auto& mi : out) mi.intensity /= peak;
    return out;
}

Spectrum beam_spectrum(const MultimodeState& state, const BeamModeGrid& grid) {
    Spectrum s;
    s.kind = SpectrumAxis::wavenumber;
    s.time = state.time;
    s.provenance = "multimode";
    s.axis = grid.q;
    s.density.resize(state.beta.size());
    for (std::size_t n = 0; n < state.beta.size(); ++n)
        s.density[n] = std::norm(state.beta[n]) / grid.dq;
    return s;
}

} // namespace atomlaser
