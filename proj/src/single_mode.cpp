#include "atomlaser/single_mode.hpp"

#include <algorithm>
#include <cmath>

namespace atomlaser {

namespace {

constexpr std::size_t kBoundaryZone = 5;

double square(double x) { return x * x; }

} // namespace

BeamModeGrid BeamModeGrid::make_free_space(double q_min, double q_max, std::size_t count,
                                           double mass) {
    if (count < 2) throw ConfigError("beam grid needs at least 2 modes");
    if (!(q_max > q_min)) throw ConfigError("beam grid needs q_max > q_min");
    if (!(mass > 0.0)) throw ConfigError("beam grid needs a positive mass");
    BeamModeGrid g;
    g.free_space = true;
    g.mass = mass;
    g.dq = (q_max - q_min) / static_cast<double>(count - 1);
    g.q.resize(count);
    g.omega.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        g.q[i] = q_min + g.dq * static_cast<double>(i);
        g.omega[i] = hbar * g.q[i] * g.q[i] / (2.0 * mass);
    }
    return g;
}

BeamModeGrid BeamModeGrid::make_user(std::vector<double> q,
                                     const std::function<double(double)>& dispersion) {
    if (q.size() < 2) throw ConfigError("beam grid needs at least 2 modes");
    BeamModeGrid g;
    g.free_space = false;
    g.q = std::move(q);
    g.dq = g.q[1] - g.q[0];
    g.omega.resize(g.q.size());
    for (std::size_t i = 0; i < g.q.size(); ++i) g.omega[i] = dispersion(g.q[i]);
    g.validate();
    return g;
}

double BeamModeGrid::domega_dq(double q_value) const {
    if (free_space) return hbar * q_value / mass;
    // Central difference on the sampled dispersion.
    const auto it = std::lower_bound(q.begin(), q.end(), q_value);
    std::size_t i = static_cast<std::size_t>(std::distance(q.begin(), it));
    i = std::min(std::max<std::size_t>(i, 1), q.size() - 2);
    return (omega[i + 1] - omega[i - 1]) / (q[i + 1] - q[i - 1]);
}

void BeamModeGrid::validate() const {
    if (q.size() < 2 || q.size() != omega.size())
        throw ConfigError("beam grid arrays inconsistent");
    if (!(dq > 0.0)) throw ConfigError("beam grid spacing must be > 0");
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
        if (!(q[i + 1] > q[i])) throw ConfigError("beam grid q must increase strictly");
        if (std::fabs((q[i + 1] - q[i]) - dq) > 1e-9 * dq)
            throw ConfigError("beam grid must be uniform");
    }
    for (double w : omega)
        if (!std::isfinite(w)) throw ConfigError("dispersion must be finite on all samples");
}

double OverlapFunction::value_at(double q_value) const {
    const double a0 = source_width;
    return std::pow(a0 * a0 / pi, 0.25) * std::exp(-0.5 * square((q_value - kick) * a0));
}

OverlapFunction overlap(const AtomSpecies& species, const TrapConfig& trap,
                        const BeamModeGrid& grid, const CouplingConfig& coupling) {
    species.validate();
    trap.validate();
    coupling.validate();
    grid.validate();

    const double sigma_k = std::sqrt(species.mass * trap.omega / (2.0 * hbar));
    const double k0 = coupling.scheme == CouplingScheme::raman ? coupling.kick : 0.0;
    if (grid.q.front() > k0 - 6.0 * sigma_k || grid.q.back() < k0 + 6.0 * sigma_k)
        throw NumericalGuardError("grid-coverage",
                                  "beam grid must cover [k0 - 6 sigma_k, k0 + 6 sigma_k]");

    OverlapFunction ov;
    ov.grid = grid;
    ov.kick = k0;
    ov.source_width = std::sqrt(hbar / (species.mass * trap.omega));
    ov.a.resize(grid.q.size());
    for (std::size_t i = 0; i < grid.q.size(); ++i)
        ov.a[i] = ov.value_at(grid.q[i]);
    return ov;
}

double SingleModeState::beam_number(double dq) const {
    double sum = 0.0;
    for (const auto& b : beta) sum += std::norm(b);
    return sum * dq;
}

SingleModeState SingleModeState::vacuum_beam(double n0, const BeamModeGrid& grid,
                                             double omega0_in) {
    SingleModeState s;
    s.alpha0 = std::sqrt(n0);
    s.beta.assign(grid.q.size(), {0.0, 0.0});
    s.omega0 = omega0_in;
    s.frame = Frame::lab;
    return s;
}

SingleModeState to_rotating(const SingleModeState& s, const BeamModeGrid& grid, double detuning) {
    if (s.frame == Frame::rotating) return s;
    SingleModeState r = s;
    r.frame = Frame::rotating;
    r.alpha0 = s.alpha0 * std::polar(1.0, s.omega0 * s.time);
    for (std::size_t j = 0; j < s.beta.size(); ++j)
        r.beta[j] = s.beta[j] * std::polar(1.0, (grid.omega[j] - detuning) * s.time);
    return r;
}

SingleModeState to_lab(const SingleModeState& s, const BeamModeGrid& grid, double detuning) {
    if (s.frame == Frame::lab) return s;
    SingleModeState r = s;
    r.frame = Frame::lab;
    r.alpha0 = s.alpha0 * std::polar(1.0, -s.omega0 * s.time);
    for (std::size_t j = 0; j < s.beta.size(); ++j)
        r.beta[j] = s.beta[j] * std::polar(1.0, -(grid.omega[j] - detuning) * s.time);
    return r;
}

namespace {

struct ModeWorkspace {
    // Discrete amplitudes b_j = beta_j sqrt(dq) and couplings c_j = Omega A_j sqrt(dq).
    std::vector<double> br, bi;
    std::vector<double> cr, ci;
    std::vector<double> domega; // omega_j - delta (beam phase rates, lab frame)
    std::complex<double> alpha;
    double omega0 = 0.0;
    double dq = 0.0;

    double number() const {
        double sum = std::norm(alpha);
        for (std::size_t j = 0; j < br.size(); ++j) sum += br[j] * br[j] + bi[j] * bi[j];
        return sum;
    }

    double boundary_population() const {
        const std::size_t n = br.size();
        const std::size_t z = std::min(kBoundaryZone, n / 2);
        double sum = 0.0;
        for (std::size_t j = 0; j < z; ++j)
            sum += br[j] * br[j] + bi[j] * bi[j] + br[n - 1 - j] * br[n - 1 - j] +
                   bi[n - 1 - j] * bi[n - 1 - j];
        return sum;
    }
};

ModeWorkspace make_workspace(const SingleModeState& initial, const OverlapFunction& ov,
                             const CouplingConfig& coupling) {
    const std::size_t n = ov.grid.q.size();
    if (initial.beta.size() != n)
        throw ConfigError("state beta array does not match the beam grid");
    ModeWorkspace w;
    w.alpha = initial.alpha0;
    w.omega0 = initial.omega0;
    w.dq = ov.grid.dq;
    w.br.resize(n);
    w.bi.resize(n);
    w.cr.resize(n);
    w.ci.resize(n);
    w.domega.resize(n);
    const double root_dq = std::sqrt(ov.grid.dq);
    const std::complex<double> rabi = coupling.rabi();
    for (std::size_t j = 0; j < n; ++j) {
        const std::complex<double> b = initial.beta[j] * root_dq;
        w.br[j] = b.real();
        w.bi[j] = b.imag();
        const std::complex<double> c = rabi * ov.a[j] * root_dq;
        w.cr[j] = c.real();
        w.ci[j] = c.imag();
        w.domega[j] = ov.grid.omega[j] - coupling.detuning;
    }
    return w;
}

SingleModeState export_state(const ModeWorkspace& w, double t) {
    SingleModeState s;
    s.alpha0 = w.alpha;
    s.time = t;
    s.frame = Frame::lab;
    s.omega0 = w.omega0;
    const double inv_root_dq = 1.0 / std::sqrt(w.dq);
    s.beta.resize(w.br.size());
    for (std::size_t j = 0; j < w.br.size(); ++j)
        s.beta[j] = std::complex<double>(w.br[j], w.bi[j]) * inv_root_dq;
    return s;
}

// Spacing of the mode frequencies around the resonant energy omega0 + delta;
// sets the revival time of the discretized continuum.
double resonant_mode_spacing(const ModeWorkspace& w) {
    std::size_t jr = 0;
    double best = std::fabs(w.domega[0] - w.omega0);
    for (std::size_t j = 1; j < w.domega.size(); ++j) {
        const double d = std::fabs(w.domega[j] - w.omega0);
        if (d < best) {
            best = d;
            jr = j;
        }
    }
    const std::size_t ja = jr + 1 < w.domega.size() ? jr + 1 : jr - 1;
    return std::fabs(w.domega[ja] - w.domega[jr]);
}

} // namespace

SingleModeTrajectory evolve_single_mode(const SingleModeState& initial,
                                        const OverlapFunction& overlap_fn,
                                        const CouplingConfig& coupling, double duration,
                                        const SingleModeEvolveOptions& opts) {
    if (!(duration > 0.0)) throw ConfigError("duration must be > 0");
    if (initial.frame != Frame::lab)
        throw ConfigError("evolve_single_mode expects a lab-frame initial state");
    overlap_fn.grid.validate();

    ModeWorkspace w = make_workspace(initial, overlap_fn, coupling);
    const std::size_t n = w.br.size();
    const double n0 = w.number();

    // Collective coupling and bandwidth set the step; the revival time caps
    // the usable duration for a given mode spacing.
    double g2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) g2 += w.cr[j] * w.cr[j] + w.ci[j] * w.ci[j];
    const double g_collective = std::sqrt(g2);
    double bandwidth = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        bandwidth = std::max(bandwidth, std::fabs(w.omega0 - w.domega[j]));

    if (opts.check_guards && n > 2) {
        const double spacing = resonant_mode_spacing(w);
        if (spacing > 0.0) {
            const double t_revival = 2.0 * pi / spacing;
            if (duration * opts.revival_safety > t_revival)
                throw NumericalGuardError(
                    "revival-time", "duration exceeds the discretized-continuum revival window; "
                                    "refine the mode spacing");
        }
    }

    double dt = opts.dt;
    if (dt <= 0.0) {
        if (opts.integrator == ModeIntegrator::rk4_rotating)
            dt = 0.1 / std::max(bandwidth, 1e-12);
        else
            dt = std::min(0.08 / std::max(g_collective, 1e-12),
                          0.55 / std::max(bandwidth, 1e-12));
        dt = std::min(dt, duration / 16.0);
    }
    const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / dt)));
    dt = duration / static_cast<double>(steps);

    const std::size_t samples = std::max<std::size_t>(2, std::min<std::size_t>(opts.samples, steps + 1));
    const std::size_t sample_stride = std::max<std::size_t>(1, steps / (samples - 1));

    // Snapshot times snapped to step boundaries.
    std::vector<std::size_t> snapshot_steps;
    for (double ts : opts.snapshot_times) {
        const auto k = static_cast<std::size_t>(std::llround(ts / dt));
        snapshot_steps.push_back(std::min(k, steps));
    }

    SingleModeTrajectory traj;
    traj.times.push_back(initial.time);
    traj.condensate_number.push_back(std::norm(w.alpha));
    traj.beam_number.push_back(w.number() - std::norm(w.alpha));

    // Precomputed per-step phase factors.
    std::vector<double> phr(n), phi(n);  // full-step beam phases e^{-i (omega_j - delta) dt}
    std::vector<double> hhr(n), hhi(n);  // half-step
    for (std::size_t j = 0; j < n; ++j) {
        phr[j] = std::cos(w.domega[j] * dt);
        phi[j] = -std::sin(w.domega[j] * dt);
        hhr[j] = std::cos(0.5 * w.domega[j] * dt);
        hhi[j] = -std::sin(0.5 * w.domega[j] * dt);
    }

    auto check_guards_now = [&](double t_now) {
        if (!opts.check_guards) return;
        const double drift = std::fabs(w.number() - n0) / std::max(n0, 1e-300);
        if (drift > opts.norm_drift_tolerance)
            throw DivergenceError("mode-model norm drift " + std::to_string(drift) + " at t = " +
                                  std::to_string(t_now));
        if (n > 2 * kBoundaryZone &&
            w.boundary_population() > opts.boundary_tolerance * n0)
            throw NumericalGuardError("grid-boundary",
                                      "beam population reached the q-grid edge; widen the grid");
    };

    auto record_snapshots = [&](std::size_t step, double t_now) {
        for (std::size_t si = 0; si < snapshot_steps.size(); ++si)
            if (snapshot_steps[si] == step) traj.snapshots.push_back(export_state(w, t_now));
    };
    record_snapshots(0, initial.time);

    if (opts.integrator == ModeIntegrator::split) {
        // Strang splitting with exact diagonal phases and the exact rotation
        // generated by the star-shaped coupling (both unitary). The march is
        // Ph (V Pf)^{n-1} V Ph; sampling of atom numbers is phase invariant,
        // so only full snapshots pay the extra half-phase materialization.
        const double gdt = g_collective * dt;
        double cg, s1, s2;
        if (gdt > 1e-6) {
            cg = std::cos(gdt);
            s1 = std::sin(gdt) / g_collective;
            s2 = (cg - 1.0) / (g_collective * g_collective);
        } else {
            cg = 1.0 - 0.5 * gdt * gdt;
            s1 = dt * (1.0 - gdt * gdt / 6.0);
            s2 = -0.5 * dt * dt;
        }

        double* br = w.br.data();
        double* bi = w.bi.data();
        const double* cr = w.cr.data();
        const double* ci = w.ci.data();

        // Enter the pre-coupling representation with one half phase.
        w.alpha *= std::polar(1.0, -w.omega0 * 0.5 * dt);
        for (std::size_t j = 0; j < n; ++j) {
            const double re = br[j] * hhr[j] - bi[j] * hhi[j];
            bi[j] = br[j] * hhi[j] + bi[j] * hhr[j];
            br[j] = re;
        }
        double sr = 0.0, si = 0.0; // S = sum c_j b_j on the current amplitudes
        for (std::size_t j = 0; j < n; ++j) {
            sr += cr[j] * br[j] - ci[j] * bi[j];
            si += cr[j] * bi[j] + ci[j] * br[j];
        }

        // Exports the physical state at an integer step: undo half a phase.
        auto physical_state = [&](double t_now) {
            ModeWorkspace copy = w;
            copy.alpha *= std::polar(1.0, w.omega0 * 0.5 * dt);
            for (std::size_t j = 0; j < n; ++j) {
                const std::complex<double> b(w.br[j], w.bi[j]);
                const std::complex<double> p(hhr[j], -hhi[j]);
                const std::complex<double> v = b * p;
                copy.br[j] = v.real();
                copy.bi[j] = v.imag();
            }
            return export_state(copy, t_now);
        };

        double t = initial.time;
        for (std::size_t step = 1; step <= steps; ++step) {
            const bool is_last = step == steps;
            // Coupling rotation on (alpha, b) followed by the diagonal phase,
            // fused with the collective-sum accumulation for the next step.
            const std::complex<double> S(sr, si);
            const std::complex<double> alpha_new =
                cg * w.alpha + std::complex<double>(0.0, 1.0) * s1 * S;
            const std::complex<double> z =
                std::complex<double>(0.0, 1.0) * s1 * w.alpha + s2 * S;
            const double zr = z.real(), zi = z.imag();
            const double* fr = is_last ? hhr.data() : phr.data();
            const double* fi = is_last ? hhi.data() : phi.data();
            double s0r = 0.0, s0i = 0.0, s1r = 0.0, s1i = 0.0;
            double s2r = 0.0, s2i = 0.0, s3r = 0.0, s3i = 0.0;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
#define ATOMLASER_SPLIT_LANE(o, accr, acci)                                  \
    {                                                                        \
        const double ur = br[j + o] + (cr[j + o] * zr + ci[j + o] * zi);     \
        const double ui = bi[j + o] + (cr[j + o] * zi - ci[j + o] * zr);     \
        const double nr = ur * fr[j + o] - ui * fi[j + o];                   \
        const double ni = ur * fi[j + o] + ui * fr[j + o];                   \
        br[j + o] = nr;                                                      \
        bi[j + o] = ni;                                                      \
        accr += cr[j + o] * nr - ci[j + o] * ni;                             \
        acci += cr[j + o] * ni + ci[j + o] * nr;                             \
    }
                ATOMLASER_SPLIT_LANE(0, s0r, s0i)
                ATOMLASER_SPLIT_LANE(1, s1r, s1i)
                ATOMLASER_SPLIT_LANE(2, s2r, s2i)
                ATOMLASER_SPLIT_LANE(3, s3r, s3i)
            }
            for (; j < n; ++j) {
                const double ur = br[j] + (cr[j] * zr + ci[j] * zi);
                const double ui = bi[j] + (cr[j] * zi - ci[j] * zr);
                const double nr = ur * fr[j] - ui * fi[j];
                const double ni = ur * fi[j] + ui * fr[j];
                br[j] = nr;
                bi[j] = ni;
                s0r += cr[j] * nr - ci[j] * ni;
                s0i += cr[j] * ni + ci[j] * nr;
            }
#undef ATOMLASER_SPLIT_LANE
            sr = (s0r + s1r) + (s2r + s3r);
            si = (s0i + s1i) + (s2i + s3i);
            w.alpha = alpha_new * std::polar(1.0, -w.omega0 * (is_last ? 0.5 * dt : dt));

            t = initial.time + dt * static_cast<double>(step);
            if (step % sample_stride == 0 || is_last) {
                traj.times.push_back(t);
                const double nc = std::norm(w.alpha);
                traj.condensate_number.push_back(nc);
                traj.beam_number.push_back(w.number() - nc);
                check_guards_now(t);
            }
            if (!is_last) {
                for (std::size_t si_idx = 0; si_idx < snapshot_steps.size(); ++si_idx)
                    if (snapshot_steps[si_idx] == step)
                        traj.snapshots.push_back(physical_state(t));
            } else {
                record_snapshots(step, t);
            }
        }
    } else {
        // Fixed-step RK4 on the rotating-frame equations; the explicit
        // e^{i dw t} phases are tracked with per-step incremental factors.
        std::vector<std::complex<double>> b(n), p(n), ph_half(n), k1(n), k2(n), k3(n), k4(n),
            btmp(n);
        std::complex<double> alpha = w.alpha; // rotating amplitude (t=0: equal)
        for (std::size_t j = 0; j < n; ++j) {
            b[j] = {w.br[j], w.bi[j]};
            const double dwj = w.omega0 - w.domega[j]; // detuning from resonance
            p[j] = std::polar(1.0, dwj * initial.time);
            ph_half[j] = std::polar(1.0, dwj * 0.5 * dt);
        }
        std::vector<std::complex<double>> c(n);
        for (std::size_t j = 0; j < n; ++j) c[j] = {w.cr[j], w.ci[j]};

        // RHS in the rotating frame at a phase vector p_stage:
        //   da = i sum_j c_j b_j p_j ; db_j = i conj(c_j) a conj(p_j)
        auto rhs = [&](const std::complex<double>& a_in, const std::vector<std::complex<double>>& b_in,
                       const std::vector<std::complex<double>>& p_stage,
                       std::complex<double>& da, std::vector<std::complex<double>>& db) {
            std::complex<double> acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += c[j] * b_in[j] * p_stage[j];
            da = std::complex<double>(0.0, 1.0) * acc;
            for (std::size_t j = 0; j < n; ++j)
                db[j] = std::complex<double>(0.0, 1.0) * std::conj(c[j] * p_stage[j]) * a_in;
        };

        std::vector<std::complex<double>> pm(n), pe(n);
        double t = initial.time;
        std::complex<double> da1, da2, da3, da4;
        for (std::size_t step = 1; step <= steps; ++step) {
            for (std::size_t j = 0; j < n; ++j) {
                pm[j] = p[j] * ph_half[j];
                pe[j] = pm[j] * ph_half[j];
            }
            rhs(alpha, b, p, da1, k1);
            for (std::size_t j = 0; j < n; ++j) btmp[j] = b[j] + 0.5 * dt * k1[j];
            rhs(alpha + 0.5 * dt * da1, btmp, pm, da2, k2);
            for (std::size_t j = 0; j < n; ++j) btmp[j] = b[j] + 0.5 * dt * k2[j];
            rhs(alpha + 0.5 * dt * da2, btmp, pm, da3, k3);
            for (std::size_t j = 0; j < n; ++j) btmp[j] = b[j] + dt * k3[j];
            rhs(alpha + dt * da3, btmp, pe, da4, k4);
            alpha += dt / 6.0 * (da1 + 2.0 * (da2 + da3) + da4);
            for (std::size_t j = 0; j < n; ++j)
                b[j] += dt / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
            p.swap(pe);
            if (step % 4096 == 0)
                for (std::size_t j = 0; j < n; ++j) p[j] /= std::abs(p[j]);

            t = initial.time + dt * static_cast<double>(step);
            const bool want_sample = (step % sample_stride == 0 || step == steps);
            bool want_snapshot = false;
            for (std::size_t s : snapshot_steps) want_snapshot |= (s == step);
            if (want_sample || want_snapshot) {
                // Map the rotating amplitudes back to the lab frame:
                // b_lab = b_rot * e^{-i (omega_j - delta) t}.
                w.alpha = alpha * std::polar(1.0, -w.omega0 * t);
                for (std::size_t j = 0; j < n; ++j) {
                    const std::complex<double> lab = b[j] * std::polar(1.0, -w.domega[j] * t);
                    w.br[j] = lab.real();
                    w.bi[j] = lab.imag();
                }
                if (want_sample) {
                    traj.times.push_back(t);
                    const double nc = std::norm(w.alpha);
                    traj.condensate_number.push_back(nc);
                    traj.beam_number.push_back(w.number() - nc);
                    check_guards_now(t);
                }
                record_snapshots(step, t);
            }
        }
        w.alpha = alpha * std::polar(1.0, -w.omega0 * t);
        for (std::size_t j = 0; j < n; ++j) {
            const std::complex<double> lab = b[j] * std::polar(1.0, -w.domega[j] * t);
            w.br[j] = lab.real();
            w.bi[j] = lab.imag();
        }
    }

    traj.final_state = export_state(w, initial.time + duration);
    return traj;
}

double golden_rule_rate(double rabi_magnitude, double overlap_at_resonance, double dq_domega) {
    if (!(dq_domega > 0.0) || !std::isfinite(dq_domega))
        throw NumericalGuardError("dispersion-slope", "dq/domega must be finite and positive");
    return 2.0 * pi * rabi_magnitude * rabi_magnitude * overlap_at_resonance *
           overlap_at_resonance * dq_domega;
}

double model_decay_rate(const OverlapFunction& overlap_fn, const CouplingConfig& coupling,
                        double omega0) {
    const BeamModeGrid& grid = overlap_fn.grid;
    const double target = omega0 + coupling.detuning;
    if (grid.free_space) {
        if (target <= 0.0)
            throw NumericalGuardError("no-propagating-mode",
                                      "omega0 + delta <= 0: no free-space mode is resonant");
        const double q0 = std::sqrt(2.0 * grid.mass * target / hbar);
        const double slope = grid.mass / (hbar * q0); // dq/domega
        double rate = 0.0;
        for (double root : {q0, -q0}) {
            if (root < grid.q.front() || root > grid.q.back()) continue;
            const double aval = overlap_fn.value_at(root);
            rate += golden_rule_rate(coupling.rabi_magnitude, aval, slope);
        }
        return rate;
    }
    // Scan the sampled dispersion for resonant crossings.
    double rate = 0.0;
    for (std::size_t j = 0; j + 1 < grid.q.size(); ++j) {
        const double f0 = grid.omega[j] - target;
        const double f1 = grid.omega[j + 1] - target;
        if (f0 == 0.0 || f0 * f1 < 0.0) {
            const double t = f0 / (f0 - f1);
            const double slope = std::fabs(grid.q[j + 1] - grid.q[j]) /
                                 std::fabs(grid.omega[j + 1] - grid.omega[j]);
            const double aval = std::abs(overlap_fn.a[j] + t * (overlap_fn.a[j + 1] - overlap_fn.a[j]));
            rate += golden_rule_rate(coupling.rabi_magnitude, aval, slope);
        }
    }
    if (rate == 0.0)
        throw NumericalGuardError("no-propagating-mode", "no resonant mode on the sampled dispersion");
    return rate;
}

double free_space_rate(double rabi_magnitude, double kick, const TrapConfig& trap,
                       const AtomSpecies& species) {
    if (kick == 0.0)
        throw ConfigError("free-space closed form diverges at k0 = 0; "
                          "use the golden-rule rate with the rf overlap");
    return std::sqrt(pi) * rabi_magnitude * rabi_magnitude *
           std::sqrt(species.mass / (hbar * trap.omega)) / std::fabs(kick);
}

double spectrum_F(double delta_omega, double t, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("spectrum_F needs gamma > 0");
    if (t < 0.0) throw ConfigError("spectrum_F needs t >= 0");
    const double num = 1.0 - 2.0 * std::cos(delta_omega * t) * std::exp(-0.5 * gamma * t) +
                       std::exp(-gamma * t);
    return num / (0.25 * gamma * gamma + delta_omega * delta_omega);
}

FluxBoundResult flux_linewidth_bound(double n0, double outcoupled, double duration,
                                     double measured_linewidth) {
    if (!(duration > 0.0)) throw ConfigError("flux bound needs duration > 0");
    if (measured_linewidth == 0.0) throw ConfigError("flux bound needs a nonzero linewidth");
    FluxBoundResult r;
    r.average_flux = outcoupled / duration;
    r.ratio = r.average_flux / (measured_linewidth * n0);
    r.satisfied = r.average_flux / measured_linewidth <= n0 * (1.0 + 1e-12);
    return r;
}

Spectrum beam_spectrum(const SingleModeState& state, const BeamModeGrid& grid) {
    Spectrum s;
    s.kind = SpectrumAxis::wavenumber;
    s.time = state.time;
    s.provenance = "single-mode";
    s.axis = grid.q;
    s.density.resize(state.beta.size());
    for (std::size_t j = 0; j < state.beta.size(); ++j) s.density[j] = std::norm(state.beta[j]);
    return s;
}

Spectrum beam_spectrum_omega(const SingleModeState& state, const BeamModeGrid& grid,
                             double detuning, double omega0) {
    Spectrum s;
    s.kind = SpectrumAxis::angular_frequency;
    s.time = state.time;
    s.provenance = "single-mode";
    for (std::size_t j = 0; j < grid.q.size(); ++j) {
        if (!(grid.q[j] > 0.0)) continue; // the omega axis is monotone only for q > 0
        const double slope = grid.domega_dq(grid.q[j]);
        if (!(slope > 0.0)) continue;
        s.axis.push_back(grid.omega[j] - detuning - omega0);
        s.density.push_back(std::norm(state.beta[j]) / slope);
    }
    return s;
}

} // namespace atomlaser
