#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "atomlaser/analysis.hpp"
#include "atomlaser/single_mode.hpp"

using namespace atomlaser;

namespace {

const AtomSpecies rb = AtomSpecies::rb87(0.0);

TrapConfig trap50() {
    TrapConfig t;
    t.omega = 50.0;
    return t;
}

CouplingConfig raman(double rabi, double k0, double delta) {
    CouplingConfig c;
    c.scheme = CouplingScheme::raman;
    c.rabi_magnitude = rabi;
    c.kick = k0;
    c.detuning = delta;
    return c;
}

// Grid and coupling resonant with the overlap peak at k0.
struct Setup {
    BeamModeGrid grid;
    OverlapFunction ov;
    CouplingConfig coupling;
    double omega0;
};

Setup make_setup(double rabi, double k0, std::size_t modes, double span_sigmas = 13.0) {
    const TrapConfig trap = trap50();
    const double sigma_k = std::sqrt(rb.mass * trap.omega / (2.0 * hbar));
    Setup s{BeamModeGrid::make_free_space(k0 - 0.5 * span_sigmas * sigma_k,
                                          k0 + 0.5 * span_sigmas * sigma_k, modes, rb.mass),
            {},
            raman(rabi, k0, hbar * k0 * k0 / (2.0 * rb.mass) - 0.5 * trap.omega),
            0.5 * trap.omega};
    s.ov = overlap(rb, trap, s.grid, s.coupling);
    return s;
}

} // namespace

TEST_CASE("overlap function") {
    const TrapConfig trap = trap50();
    const double k0 = 1e7;
    const double sigma_k = std::sqrt(rb.mass * trap.omega / (2.0 * hbar));

    SUBCASE("insufficient grid coverage is an error") {
        const auto grid = BeamModeGrid::make_free_space(k0 - 3.0 * sigma_k, k0 + 3.0 * sigma_k,
                                                        512, rb.mass);
        CHECK_THROWS_AS(overlap(rb, trap, grid, raman(10.0, k0, 0.0)), NumericalGuardError);
    }
    SUBCASE("Raman overlap peaks at the kick") {
        const Setup s = make_setup(10.0, k0, 4096);
        std::size_t imax = 0;
        for (std::size_t i = 1; i < s.ov.a.size(); ++i)
            if (std::abs(s.ov.a[i]) > std::abs(s.ov.a[imax])) imax = i;
        CHECK(std::fabs(s.grid.q[imax] - k0) <= s.grid.dq);
    }
    SUBCASE("rf overlap is the momentum-space Gaussian at q") {
        CouplingConfig rf;
        rf.scheme = CouplingScheme::rf;
        rf.rabi_magnitude = 10.0;
        const auto grid = BeamModeGrid::make_free_space(-7.0 * sigma_k, 7.0 * sigma_k, 2048,
                                                        rb.mass);
        const OverlapFunction ov = overlap(rb, trap, grid, rf);
        const double a0 = std::sqrt(hbar / (rb.mass * trap.omega));
        for (std::size_t i = 0; i < grid.q.size(); i += 97) {
            const double expected =
                std::pow(a0 * a0 / pi, 0.25) * std::exp(-0.5 * grid.q[i] * grid.q[i] * a0 * a0);
            CHECK(std::abs(ov.a[i]) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("quadrature: integral of |A|^2 dq is 1") {
        const Setup s = make_setup(10.0, k0, 8192);
        double sum = 0.0;
        for (const auto& a : s.ov.a) sum += std::norm(a);
        sum *= s.grid.dq;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("analytic decay rates") {
    const TrapConfig trap = trap50();

    SUBCASE("zero coupling, zero rate; quadratic in the coupling") {
        CHECK(golden_rule_rate(0.0, 0.3, 1e-3) == 0.0);
        CHECK(golden_rule_rate(2.0, 0.3, 1e-3) ==
              doctest::Approx(4.0 * golden_rule_rate(1.0, 0.3, 1e-3)).epsilon(1e-14));
    }
    SUBCASE("free-space closed form: reference values and scalings") {
        const double g = free_space_rate(25.0, 1e7, trap, rb);
        CHECK(g == doctest::Approx(0.5796).epsilon(1e-3)); // frozen scalar evaluation
        CHECK(free_space_rate(25.0, 5e6, trap, rb) == doctest::Approx(2.0 * g).epsilon(1e-12));
        CHECK(free_space_rate(100.0, 1e7, trap, rb) == doctest::Approx(16.0 * g).epsilon(1e-12));
        CHECK_THROWS_AS(free_space_rate(25.0, 0.0, trap, rb), ConfigError);
    }
    SUBCASE("model rate is twice the closed form for a kicked Gaussian source") {
        const Setup s = make_setup(25.0, 1e7, 4096);
        const double g_model = model_decay_rate(s.ov, s.coupling, s.omega0);
        CHECK(g_model == doctest::Approx(1.1591).epsilon(2e-3)); // frozen golden-rule value
        CHECK(g_model ==
              doctest::Approx(2.0 * free_space_rate(25.0, 1e7, trap, rb)).epsilon(1e-3));
    }
    SUBCASE("reference-table ratios") {
        const Setup a = make_setup(100.0, 1e7, 2048);
        const Setup b = make_setup(25.0, 1e7, 2048);
        const Setup c = make_setup(25.0, 5e6, 2048);
        const double ga = model_decay_rate(a.ov, a.coupling, a.omega0);
        const double gb = model_decay_rate(b.ov, b.coupling, b.omega0);
        const double gc = model_decay_rate(c.ov, c.coupling, c.omega0);
        CHECK(ga / gb == doctest::Approx(16.0).epsilon(1e-6));
        CHECK(gc / gb == doctest::Approx(2.0).epsilon(1e-6));
    }
    SUBCASE("no propagating mode below threshold") {
        const Setup s = make_setup(10.0, 1e7, 512);
        CouplingConfig bad = s.coupling;
        bad.detuning = -s.omega0 - 1.0; // omega0 + delta < 0
        CHECK_THROWS_AS(model_decay_rate(s.ov, bad, s.omega0), NumericalGuardError);
    }
}

TEST_CASE("spectrum_F") {
    SUBCASE("zero at t = 0") {
        for (double dw : {-3.0, 0.0, 0.7, 12.0})
            CHECK(spectrum_F(dw, 0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("long-time Lorentzian: F(0) = 4/gamma^2 and half max at gamma/2") {
        const double gamma = 2.3;
        const double t = 200.0 / gamma;
        CHECK(spectrum_F(0.0, t, gamma) == doctest::Approx(4.0 / (gamma * gamma)).epsilon(1e-6));
        CHECK(spectrum_F(0.5 * gamma, t, gamma) ==
              doctest::Approx(2.0 / (gamma * gamma)).epsilon(1e-2));
    }
}

TEST_CASE("two-mode truncation against the closed-form Rabi solution") {
    // One beam mode, resonant: |alpha|^2 oscillates at 2 g with g = |Omega A| sqrt(dq).
    const TrapConfig trap = trap50();
    const double k0 = 1e7;
    const double omega0 = 0.5 * trap.omega;

    BeamModeGrid grid;
    grid.free_space = true;
    grid.mass = rb.mass;
    grid.dq = 25.0;
    grid.q = {k0 - 25.0, k0, k0 + 25.0};
    grid.omega.resize(3);
    for (int i = 0; i < 3; ++i) grid.omega[i] = hbar * grid.q[i] * grid.q[i] / (2.0 * rb.mass);

    CouplingConfig c = raman(40.0, k0, grid.omega[1] - omega0);
    OverlapFunction ov;
    ov.grid = grid;
    ov.kick = k0;
    ov.source_width = std::sqrt(hbar / (rb.mass * trap.omega));
    // Couple only the central (resonant) mode.
    ov.a = {{0.0, 0.0}, {ov.value_at(k0), 0.0}, {0.0, 0.0}};

    const double g = c.rabi_magnitude * std::abs(ov.a[1]) * std::sqrt(grid.dq);
    const double period = pi / g; // full |alpha|^2 period at frequency 2g

    SingleModeState init = SingleModeState::vacuum_beam(1.0, grid, omega0);
    SingleModeEvolveOptions opts;
    opts.integrator = ModeIntegrator::rk4_rotating;
    opts.samples = 600;
    opts.check_guards = false; // two boundary modes are intentionally inert

    const auto traj = evolve_single_mode(init, ov, c, 2.2 * period, opts);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double expected = std::cos(g * traj.times[i]) * std::cos(g * traj.times[i]);
        CHECK(traj.condensate_number[i] == doctest::Approx(expected).epsilon(5e-5));
    }

    SUBCASE("detuned two-level oracle") {
        CouplingConfig det = c;
        det.detuning = c.detuning - 3.0 * g; // detune by Delta = 3 g
        const double delta_w = 3.0 * g;
        const double omega_r = std::sqrt(g * g + 0.25 * delta_w * delta_w);
        const auto traj2 = evolve_single_mode(init, ov, det, 1.7 * period, opts);
        for (std::size_t i = 0; i < traj2.times.size(); ++i) {
            const double t = traj2.times[i];
            const double transfer =
                g * g / (omega_r * omega_r) * std::sin(omega_r * t) * std::sin(omega_r * t);
            CHECK(traj2.condensate_number[i] == doctest::Approx(1.0 - transfer).epsilon(1e-4));
        }
    }
}

TEST_CASE("evolution basics") {
    SUBCASE("zero coupling leaves the condensate untouched") {
        Setup s = make_setup(0.0, 1e7, 256);
        SingleModeState init = SingleModeState::vacuum_beam(1e6, s.grid, s.omega0);
        const auto traj = evolve_single_mode(init, s.ov, s.coupling, 0.01);
        CHECK(traj.condensate_number.back() == doctest::Approx(1e6).epsilon(1e-12));
        CHECK(traj.beam_number.back() == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("revival guard refuses a too-long run") {
        Setup s = make_setup(10.0, 1e7, 256); // coarse grid, long revival-unsafe duration
        SingleModeState init = SingleModeState::vacuum_beam(1e6, s.grid, s.omega0);
        CHECK_THROWS_AS(evolve_single_mode(init, s.ov, s.coupling, 50.0), NumericalGuardError);
    }
    SUBCASE("boundary guard flags population at the grid edge") {
        Setup s = make_setup(10.0, 1e7, 1024);
        SingleModeState init = SingleModeState::vacuum_beam(1e6, s.grid, s.omega0);
        // Pre-populate a boundary mode beyond the 1e-6 N0 tolerance.
        init.beta[2] = std::sqrt(10.0 / s.grid.dq);
        CHECK_THROWS_AS(evolve_single_mode(init, s.ov, s.coupling, 1e-3), NumericalGuardError);
    }
}

TEST_CASE("weak-coupling decay and spectrum") {
    // gamma = 1.159 at (Omega=25, k0=1e7): fast enough for a unit test at gamma t = 3.
    const double k0 = 1e7;
    const double gamma_expected = 1.1591;
    const double duration = 3.0 / gamma_expected;

    const double sigma_k = std::sqrt(rb.mass * trap50().omega / (2.0 * hbar));
    const double v0 = hbar * k0 / rb.mass;
    const double dq = 2.0 * pi / (2.7 * duration * v0); // margin over the 2.5x revival guard
    const auto modes = static_cast<std::size_t>(std::ceil(13.0 * sigma_k / dq));
    Setup s = make_setup(25.0, k0, modes);

    SingleModeState init = SingleModeState::vacuum_beam(1e6, s.grid, s.omega0);
    SingleModeEvolveOptions opts;
    opts.integrator = ModeIntegrator::split;
    opts.samples = 300;
    const auto traj = evolve_single_mode(init, s.ov, s.coupling, duration, opts);

    SUBCASE("number conservation at machine level") {
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const double total = traj.condensate_number[i] + traj.beam_number[i];
            CHECK(std::fabs(total - 1e6) / 1e6 < 1e-10);
        }
    }
    SUBCASE("drain fit matches the golden-rule rate within 10%") {
        const DrainFit fit = fit_drain_time(traj.times, traj.condensate_number);
        CHECK(fit.gamma == doctest::Approx(gamma_expected).epsilon(0.10));
    }
    SUBCASE("beam spectrum matches |Omega A|^2 N0 F pointwise within 5% at gamma t = 3") {
        const double gamma = model_decay_rate(s.ov, s.coupling, s.omega0);
        const Spectrum sq = beam_spectrum(traj.final_state, s.grid);
        double peak = 0.0;
        for (double d : sq.density) peak = std::max(peak, d);
        std::size_t checked = 0;
        for (std::size_t i = 0; i < sq.axis.size(); ++i) {
            const double q = sq.axis[i];
            const double dw = s.omega0 - (hbar * q * q / (2.0 * rb.mass) - s.coupling.detuning);
            const double aval = s.ov.value_at(q);
            const double predicted = s.coupling.rabi_magnitude * s.coupling.rabi_magnitude *
                                     aval * aval * 1e6 * spectrum_F(dw, duration, gamma);
            if (predicted < 1e-3 * peak) continue;
            CHECK(sq.density[i] == doctest::Approx(predicted).epsilon(0.05));
            ++checked;
        }
        CHECK(checked > 50);
    }
    SUBCASE("split and rk4 integrators agree") {
        // Shorter run keeps rk4 at its phase-resolving step affordable.
        const double t_short = 0.2;
        SingleModeEvolveOptions rk;
        rk.integrator = ModeIntegrator::rk4_rotating;
        rk.samples = 50;
        SingleModeEvolveOptions sp;
        sp.integrator = ModeIntegrator::split;
        sp.samples = 50;
        Setup small = make_setup(25.0, k0, 3000);
        SingleModeState start = SingleModeState::vacuum_beam(1e6, small.grid, small.omega0);
        const auto a = evolve_single_mode(start, small.ov, small.coupling, t_short, rk);
        const auto b = evolve_single_mode(start, small.ov, small.coupling, t_short, sp);
        CHECK(a.condensate_number.back() ==
              doctest::Approx(b.condensate_number.back()).epsilon(1e-6));
        for (std::size_t j = 0; j < a.final_state.beta.size(); j += 151) {
            CHECK(std::abs(a.final_state.beta[j] - b.final_state.beta[j]) <
                  1e-5 * std::sqrt(1e6));
        }
    }
    SUBCASE("grid refinement changes the final population by < 1e-4 relative") {
        Setup fine = make_setup(25.0, k0, 2 * modes);
        const auto traj2 = evolve_single_mode(
            SingleModeState::vacuum_beam(1e6, fine.grid, fine.omega0), fine.ov, s.coupling,
            duration, opts);
        const double rel = std::fabs(traj2.condensate_number.back() -
                                     traj.condensate_number.back()) /
                           traj.condensate_number.back();
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("frame transforms round-trip and match lab evolution") {
    Setup s = make_setup(25.0, 1e7, 1024);
    SingleModeState init = SingleModeState::vacuum_beam(4.0, s.grid, s.omega0);
    const auto traj = evolve_single_mode(init, s.ov, s.coupling, 0.05,
                                         SingleModeEvolveOptions{});
    const SingleModeState& lab = traj.final_state;
    const SingleModeState rot = to_rotating(lab, s.grid, s.coupling.detuning);
    const SingleModeState back = to_lab(rot, s.grid, s.coupling.detuning);
    CHECK(std::abs(back.alpha0 - lab.alpha0) < 1e-10);
    for (std::size_t j = 0; j < lab.beta.size(); j += 37)
        CHECK(std::abs(back.beta[j] - lab.beta[j]) < 1e-10);
}

TEST_CASE("flux bound") {
    SUBCASE("saturation case") {
        const double n0 = 1e6, dt = 2.0;
        const FluxBoundResult r = flux_linewidth_bound(n0, n0, dt, 1.0 / dt);
        CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.satisfied);
    }
    SUBCASE("halving the duration doubles the flux") {
        const FluxBoundResult a = flux_linewidth_bound(1e6, 2e4, 1.0, 10.0);
        const FluxBoundResult b = flux_linewidth_bound(1e6, 2e4, 0.5, 10.0);
        CHECK(b.average_flux == doctest::Approx(2.0 * a.average_flux).epsilon(1e-12));
    }
    SUBCASE("zero linewidth rejected") {
        CHECK_THROWS_AS(flux_linewidth_bound(1e6, 1.0, 1.0, 0.0), ConfigError);
    }
}
