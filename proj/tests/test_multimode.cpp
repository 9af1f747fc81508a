#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "atomlaser/multimode.hpp"

#if defined(HAVE_EIGEN)
#include <Eigen/Dense>
#endif

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

double ground_resonant_delta(double k0, const TrapConfig& trap) {
    return hbar * k0 * k0 / (2.0 * rb.mass) - 0.5 * trap.omega;
}

} // namespace

TEST_CASE("hermite functions") {
    SUBCASE("known low-order values") {
        CHECK(hermite_function(0, 0.0) == doctest::Approx(std::pow(pi, -0.25)).epsilon(1e-14));
        CHECK(hermite_function(1, 0.0) == doctest::Approx(0.0).epsilon(1e-300));
        // h2(0) = -1/sqrt(2) * pi^{-1/4}
        CHECK(hermite_function(2, 0.0) ==
              doctest::Approx(-std::pow(pi, -0.25) / std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("stable and finite up to n = 200") {
        for (unsigned n : {50u, 120u, 200u}) {
            const double v = hermite_function(n, std::sqrt(2.0 * n + 1.0) * 0.7);
            CHECK(std::isfinite(v));
            CHECK(std::fabs(v) < 1.0);
        }
    }
    SUBCASE("orthonormality of the sampled basis (Gram deviation < 1e-8)") {
        const TrapModeBasis basis = TrapModeBasis::make(12, rb, trap50());
        const double a = basis.length;
        const std::size_t n = 4001;
        const double lo = -12.0 * a, hi = 12.0 * a;
        const double dx = (hi - lo) / (n - 1);
        for (unsigned p = 0; p < 12; ++p) {
            for (unsigned q = p; q < 12; ++q) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = lo + dx * i;
                    acc += basis.position_eigenfunction(p, x) *
                           basis.position_eigenfunction(q, x);
                }
                acc *= dx;
                const double expected = p == q ? 1.0 : 0.0;
                CHECK(std::fabs(acc - expected) < 1e-8);
            }
        }
    }
}

TEST_CASE("coupling matrix") {
    const TrapConfig trap = trap50();
    const double k0 = 1e6;
    const TrapModeBasis basis = TrapModeBasis::make(6, rb, trap);
    const double support = (std::sqrt(11.0) + 7.0) / basis.length;
    const auto grid =
        BeamModeGrid::make_free_space(k0 - support, k0 + support, 8192, rb.mass);
    const CouplingConfig c = raman(1.0, k0, ground_resonant_delta(k0, trap));
    const CouplingMatrix m = coupling_matrix(basis, grid, c);

    SUBCASE("odd modes vanish at k - k0 = 0") {
        // Find the sample nearest k0 and check odd rows there scale with the offset.
        std::size_t i0 = 0;
        for (std::size_t i = 1; i < grid.q.size(); ++i)
            if (std::fabs(grid.q[i] - k0) < std::fabs(grid.q[i0] - k0)) i0 = i;
        const double off = (grid.q[i0] - k0) * basis.length;
        CHECK(std::abs(m.at(1, i0)) < 2.0 * std::fabs(off) + 1e-12);
        CHECK(std::abs(basis.momentum_eigenfunction(1, 0.0)) == 0.0);
        CHECK(std::abs(basis.momentum_eigenfunction(3, 0.0)) == 0.0);
    }
    SUBCASE("row m=0 equals the single-mode overlap") {
        const OverlapFunction ov = overlap(rb, trap, grid, c);
        for (std::size_t i = 0; i < grid.q.size(); i += 313)
            CHECK(std::abs(m.at(0, i)) == doctest::Approx(std::abs(ov.a[i])).epsilon(1e-10));
    }
    SUBCASE("row norms: sum |A_mk|^2 dk = 1 for every mode") {
        for (unsigned mm = 0; mm < 6; ++mm) {
            double acc = 0.0;
            for (std::size_t i = 0; i < grid.q.size(); ++i) acc += std::norm(m.at(mm, i));
            acc *= grid.dq;
            CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("insufficient coverage raises") {
        const auto narrow = BeamModeGrid::make_free_space(k0 - 0.3 * support, k0 + 0.3 * support,
                                                          256, rb.mass);
        CHECK_THROWS_AS(coupling_matrix(basis, narrow, c), NumericalGuardError);
    }
    SUBCASE("rf parity symmetry: |A_mn| symmetric under k -> -k up to mode parity") {
        CouplingConfig rf;
        rf.scheme = CouplingScheme::rf;
        rf.rabi_magnitude = 1.0;
        const auto sym_grid = BeamModeGrid::make_free_space(-support, support, 4097, rb.mass);
        const CouplingMatrix ms = coupling_matrix(basis, sym_grid, rf);
        const std::size_t K = sym_grid.q.size();
        for (unsigned mm = 0; mm < 6; ++mm)
            for (std::size_t i = 0; i < K; i += 101)
                CHECK(std::abs(ms.at(mm, i)) ==
                      doctest::Approx(std::abs(ms.at(mm, K - 1 - i))).epsilon(1e-10));
    }
}

TEST_CASE("resonant momentum") {
    const TrapConfig trap = trap50();
    SUBCASE("ground mode exactly at zero for the ground-resonant detuning") {
        const double k0 = 1e7;
        const double kn = resonant_momentum(0, ground_resonant_delta(k0, trap), k0, rb, trap);
        CHECK(kn == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("large kick: resonant offsets shrink toward zero") {
        const double small = resonant_momentum(5, ground_resonant_delta(1e8, trap), 1e8, rb, trap);
        const double big = resonant_momentum(5, ground_resonant_delta(1e6, trap), 1e6, rb, trap);
        CHECK(std::fabs(small) < 0.02 * std::fabs(big));
    }
    SUBCASE("small kick: spacing approaches sqrt(2 m omega_t / hbar)") {
        const double k0 = 1e3;
        const double delta = ground_resonant_delta(k0, trap);
        const double k1 = resonant_momentum(1, delta, k0, rb, trap);
        const double k0r = resonant_momentum(0, delta, k0, rb, trap);
        const double expected = std::sqrt(2.0 * rb.mass * trap.omega / hbar);
        CHECK(k1 - k0r == doctest::Approx(expected).epsilon(5e-3));
    }
    SUBCASE("below threshold raises") {
        CHECK_THROWS_AS(resonant_momentum(0, -100.0, 1e5, rb, trap), NumericalGuardError);
    }
}

TEST_CASE("relative intensities reproduce the selection-rule regimes") {
    const TrapConfig trap = trap50();
    auto run = [&](double k0) {
        const TrapModeBasis basis = TrapModeBasis::make(20, rb, trap);
        std::vector<std::complex<double>> alpha(20, {1.0, 0.0});
        return relative_intensities(alpha, basis, ground_resonant_delta(k0, trap), k0);
    };

    SUBCASE("k0 = 1e5: strictly decreasing intensities") {
        const auto list = run(1e5);
        for (std::size_t i = 0; i + 1 < list.size(); ++i)
            CHECK(list[i + 1].intensity < list[i].intensity);
        CHECK(list[0].intensity == doctest::Approx(1.0));
    }
    SUBCASE("k0 = 1e8: parity suppression follows sin^2(n sqrt(2n+1) sigma / k0)") {
        const auto list = run(1e8);
        const double sigma = std::sqrt(rb.mass * trap.omega / hbar);
        for (std::size_t n = 1; n < 20; n += 2) {
            const double even = std::max(list[n - 1].intensity, list[n + 1 < 20 ? n + 1 : n - 1].intensity);
            const double ratio = list[n].intensity / even;
            const double phase = static_cast<double>(n) * std::sqrt(2.0 * n + 1.0) * sigma / 1e8;
            const double predicted = std::sin(phase) * std::sin(phase);
            CHECK(ratio < 4.0 * std::max(predicted, 1e-9));
            if (static_cast<double>(n) * std::sqrt(2.0 * n + 1.0) <= 0.01 * 1e8 / sigma)
                CHECK(ratio < 1e-4);
        }
        CHECK(list[1].intensity / list[0].intensity < 1e-4); // deep-suppression mode
    }
    SUBCASE("crossover near k0 = 4e5: the structured regime begins") {
        const auto list = run(4e5);
        bool monotone = true;
        for (std::size_t i = 0; i + 1 < list.size(); ++i)
            if (list[i + 1].intensity >= list[i].intensity) monotone = false;
        CHECK_FALSE(monotone); // no longer the small-kick staircase
        double max_odd = 0.0;
        for (std::size_t n = 1; n < 20; n += 2) max_odd = std::max(max_odd, list[n].intensity);
        CHECK(max_odd > 1e-3); // and odd modes are not yet parity-suppressed
    }
    SUBCASE("k0 = 1e6: structured, neither regime") {
        const auto list = run(1e6);
        bool monotone = true;
        for (std::size_t i = 0; i + 1 < list.size(); ++i)
            if (list[i + 1].intensity >= list[i].intensity) monotone = false;
        CHECK_FALSE(monotone);
        // Some odd modes survive at the percent level in the crossover regime.
        double max_odd = 0.0;
        for (std::size_t n = 1; n < 20; n += 2) max_odd = std::max(max_odd, list[n].intensity);
        CHECK(max_odd > 1e-2);
    }
    SUBCASE("non-resonant modes are flagged with zero intensity") {
        const TrapModeBasis basis = TrapModeBasis::make(3, rb, trap);
        std::vector<std::complex<double>> alpha(3, {1.0, 0.0});
        const auto list = relative_intensities(alpha, basis, -2.0 * trap.omega, 1e5);
        CHECK_FALSE(list[0].resonant);
        CHECK(list[0].intensity == 0.0);
        CHECK(list[2].resonant); // omega_2 = 2.5 omega_t > 2 omega_t
    }
}

TEST_CASE("multimode evolution") {
    const TrapConfig trap = trap50();
    const double k0 = 1e6;
    const double delta = ground_resonant_delta(k0, trap);

    SUBCASE("ground-state-only initial condition matches the single-mode model") {
        const TrapModeBasis basis = TrapModeBasis::make(1, rb, trap);
        const double support = (1.0 + 7.0) / basis.length;
        const auto grid = BeamModeGrid::make_free_space(k0 - support, k0 + support, 3001, rb.mass);
        const CouplingConfig c = raman(20.0, k0, delta);
        const CouplingMatrix m = coupling_matrix(basis, grid, c);

        MultimodeState init;
        init.alpha = {std::sqrt(1e4)};
        init.beta.assign(grid.q.size(), {0.0, 0.0});

        MultimodeEvolveOptions opts;
        opts.samples = 60;
        const double duration = 0.05;
        const auto multi = evolve_multimode(init, basis, grid, m, c, duration, opts);

        const OverlapFunction ov = overlap(rb, trap, grid, c);
        SingleModeState sm = SingleModeState::vacuum_beam(1e4, grid, basis.eigenfrequency(0));
        SingleModeEvolveOptions sopts;
        sopts.integrator = ModeIntegrator::rk4_rotating;
        sopts.samples = 60;
        const auto single = evolve_single_mode(sm, ov, c, duration, sopts);

        CHECK(multi.trap_number.back() ==
              doctest::Approx(single.condensate_number.back()).epsilon(1e-6));
        for (std::size_t j = 0; j < multi.final_state.beta.size(); j += 211) {
            const std::complex<double> from_single =
                single.final_state.beta[j] * std::sqrt(grid.dq);
            CHECK(std::abs(multi.final_state.beta[j] - from_single) < 1e-6 * 1e2);
        }
    }

    SUBCASE("weak coupling: output peaks at the resonant wavenumber") {
        const TrapModeBasis basis = TrapModeBasis::make(5, rb, trap);
        const double support = (3.0 + 7.0) / basis.length;
        const auto grid = BeamModeGrid::make_free_space(k0 - support, k0 + support, 2001, rb.mass);
        const CouplingConfig c = raman(5.0, k0, delta);
        const CouplingMatrix m = coupling_matrix(basis, grid, c);

        MultimodeState init;
        init.alpha.assign(5, {0.0, 0.0});
        init.alpha[2] = std::sqrt(1e4); // single populated even mode
        init.beta.assign(grid.q.size(), {0.0, 0.0});

        const auto traj = evolve_multimode(init, basis, grid, m, c, 0.35, {});
        const Spectrum s = beam_spectrum(traj.final_state, grid);
        std::size_t imax = 0;
        for (std::size_t i = 1; i < s.density.size(); ++i)
            if (s.density[i] > s.density[imax]) imax = i;
        const double k_res = resonant_momentum(2, delta, k0, rb, trap) + k0; // beam-side k
        CHECK(std::fabs(s.axis[imax] - k_res) < 5e3);
    }

    SUBCASE("basis enlargement beyond populated modes is inert at weak coupling") {
        auto run = [&](unsigned modes) {
            const TrapModeBasis basis = TrapModeBasis::make(modes, rb, trap);
            const double support = (std::sqrt(2.0 * 8 + 1.0) + 7.0) / basis.length;
            const auto grid =
                BeamModeGrid::make_free_space(k0 - support, k0 + support, 1201, rb.mass);
            const CouplingConfig c = raman(1e-3, k0, delta);
            const CouplingMatrix m = coupling_matrix(basis, grid, c);
            MultimodeState init;
            init.alpha.assign(modes, {0.0, 0.0});
            init.alpha[0] = 1.0;
            init.alpha[1] = 0.5;
            init.beta.assign(grid.q.size(), {0.0, 0.0});
            return evolve_multimode(init, basis, grid, m, c, 0.02, {});
        };
        const auto small = run(4);
        const auto large = run(8);
        CHECK(std::fabs(small.trap_number.back() - large.trap_number.back()) < 1e-10);
        for (std::size_t j = 0; j < small.final_state.beta.size(); j += 97)
            CHECK(std::abs(small.final_state.beta[j] - large.final_state.beta[j]) < 1e-10);
    }
}

#if defined(HAVE_EIGEN)
TEST_CASE("small-instance oracle: dense matrix exponential") {
    // 2 trap modes, 8 beam modes: propagate with the full linear Hamiltonian
    // via eigen-decomposition and compare amplitudes to 1e-8.
    const TrapConfig trap = trap50();
    const double k0 = 2e5;
    const double delta = ground_resonant_delta(k0, trap);
    const TrapModeBasis basis = TrapModeBasis::make(2, rb, trap);

    // A tiny beam grid: coverage guards off, couplings built directly.
    BeamModeGrid grid;
    grid.free_space = true;
    grid.mass = rb.mass;
    const std::size_t K = 8;
    const double qlo = 0.2e5, qhi = 4.4e5;
    grid.dq = (qhi - qlo) / (K - 1);
    for (std::size_t i = 0; i < K; ++i) {
        grid.q.push_back(qlo + grid.dq * i);
        grid.omega.push_back(hbar * grid.q[i] * grid.q[i] / (2.0 * rb.mass));
    }
    CouplingMatrix m;
    m.trap_modes = 2;
    m.beam_modes = K;
    for (unsigned mm = 0; mm < 2; ++mm)
        for (std::size_t i = 0; i < K; ++i)
            m.a.push_back(basis.momentum_eigenfunction(mm, grid.q[i] - k0));

    const CouplingConfig c = raman(35.0, k0, delta);

    MultimodeState init;
    init.alpha = {std::complex<double>(0.8, 0.1), std::complex<double>(-0.3, 0.45)};
    init.beta.assign(K, {0.0, 0.0});

    const double duration = 0.08;
    MultimodeEvolveOptions opts;
    opts.check_guards = false; // 8 modes: boundary zones overlap the physics
    opts.dt = 1e-5;
    const auto traj = evolve_multimode(init, basis, grid, m, c, duration, opts);

    // Dense Hamiltonian in the lab frame (units of rad/s).
    const std::size_t dim = 2 + K;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (unsigned mm = 0; mm < 2; ++mm) h(mm, mm) = basis.eigenfrequency(mm);
    for (std::size_t i = 0; i < K; ++i) h(2 + i, 2 + i) = grid.omega[i] - delta;
    const std::complex<double> rabi = c.rabi();
    for (unsigned mm = 0; mm < 2; ++mm)
        for (std::size_t i = 0; i < K; ++i) {
            const std::complex<double> g = -rabi * m.at(mm, i) * std::sqrt(grid.dq);
            h(mm, 2 + i) = g;
            h(2 + i, mm) = std::conj(g);
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    Eigen::VectorXcd y0(dim);
    y0(0) = init.alpha[0];
    y0(1) = init.alpha[1];
    for (std::size_t i = 0; i < K; ++i) y0(2 + i) = 0.0;
    Eigen::VectorXcd coeffs = es.eigenvectors().adjoint() * y0;
    for (std::size_t j = 0; j < dim; ++j)
        coeffs(j) *= std::exp(std::complex<double>(0.0, -es.eigenvalues()(j) * duration));
    const Eigen::VectorXcd y = es.eigenvectors() * coeffs;

    CHECK(std::abs(traj.final_state.alpha[0] - y(0)) < 1e-8);
    CHECK(std::abs(traj.final_state.alpha[1] - y(1)) < 1e-8);
    for (std::size_t i = 0; i < K; ++i)
        CHECK(std::abs(traj.final_state.beta[i] - y(2 + i)) < 1e-8);
}
#endif
