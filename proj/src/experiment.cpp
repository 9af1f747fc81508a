#include "atomlaser/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "atomlaser/snapshot_io.hpp"
#include "atomlaser/version.hpp"

namespace atomlaser {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not a number: '" + raw + "'");
    }
}

} // namespace

std::string ConfigMap::get_string(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : parse_double(key, it->second);
}

std::size_t ConfigMap::get_size(const std::string& key, std::size_t fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const double v = parse_double(key, it->second);
    if (v < 0.0 || v != std::floor(v)) throw ConfigError("key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string v = it->second;
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("key '" + key + "' must be a boolean");
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) const {
    const std::string raw = get_string(key);
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw ConfigError("key '" + key + "' holds an empty list");
    return out;
}

std::vector<double> ConfigMap::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
    return has(key) ? get_double_list(key) : fallback;
}

std::string ConfigMap::canonical() const {
    std::string out;
    for (const auto& [k, v] : values) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap cfg;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("malformed section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("empty section name at line " + std::to_string(lineno));
            continue;
        }
        const auto pos = line.find('=');
        if (pos == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, pos));
        const std::string value = trim(line.substr(pos + 1));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
        if (section.empty()) throw ConfigError("key outside any [section] at line " + std::to_string(lineno));
        cfg.values[section + "." + key] = value;
    }
    return cfg;
}

ConfigMap parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::uint64_t config_hash(const ConfigMap& cfg) {
    const std::string s = cfg.canonical();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash_hex(const ConfigMap& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::table1: return "table1";
        case ExperimentKind::spectrum: return "spectrum";
        case ExperimentKind::modes: return "modes";
        case ExperimentKind::gpe: return "gpe";
        case ExperimentKind::chirp: return "chirp";
        case ExperimentKind::weak_sweep: return "weak-sweep";
        case ExperimentKind::interferometer: return "interferometer";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "table1") return ExperimentKind::table1;
    if (s == "spectrum") return ExperimentKind::spectrum;
    if (s == "modes") return ExperimentKind::modes;
    if (s == "gpe") return ExperimentKind::gpe;
    if (s == "chirp") return ExperimentKind::chirp;
    if (s == "weak-sweep") return ExperimentKind::weak_sweep;
    if (s == "interferometer") return ExperimentKind::interferometer;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

namespace {

AtomSpecies species_from_config(const ConfigMap& cfg) {
    AtomSpecies sp;
    const std::string preset = cfg.get_string("system.species", "custom");
    if (preset == "rb87") {
        sp = AtomSpecies::rb87(cfg.get_double("system.scattering_length", 0.0));
    } else if (preset == "custom") {
        sp.mass = cfg.get_double("system.mass");
        const double a = cfg.get_double("system.scattering_length", 0.0);
        sp.a_tt = sp.a_uu = sp.a_tu = a;
    } else {
        throw ConfigError("unknown species preset '" + preset + "'");
    }
    sp.a_tt = cfg.get_double("system.a_tt", sp.a_tt);
    sp.a_uu = cfg.get_double("system.a_uu", sp.a_uu);
    sp.a_tu = cfg.get_double("system.a_tu", sp.a_tu);
    sp.validate();
    return sp;
}

TrapConfig trap_from_config(const ConfigMap& cfg) {
    TrapConfig trap;
    trap.omega = cfg.get_double("system.omega_t");
    trap.gravity = cfg.get_bool("system.gravity", false);
    trap.validate();
    return trap;
}

CouplingConfig coupling_from_config(const ConfigMap& cfg, const AtomSpecies& species,
                                    const TrapConfig& trap, ExperimentKind kind) {
    CouplingConfig c;
    const std::string scheme = cfg.get_string("coupling.scheme", "raman");
    if (scheme == "raman")
        c.scheme = CouplingScheme::raman;
    else if (scheme == "rf")
        c.scheme = CouplingScheme::rf;
    else
        throw ConfigError("unknown coupling scheme '" + scheme + "'");
    c.rabi_magnitude = cfg.get_double("coupling.rabi");
    c.rabi_phase = cfg.get_double("coupling.rabi_phase", 0.0);
    c.kick = cfg.get_double("coupling.k0", 0.0);

    const std::string delta = cfg.get_string("coupling.delta", "resonant");
    if (delta == "resonant") {
        const double recoil = hbar * c.kick * c.kick / (2.0 * species.mass);
        // Linear mode models measure trap energies from the ground state
        // (omega_t/2); the GPE resonance sits at the condensate center.
        const bool mode_model = kind == ExperimentKind::table1 ||
                                kind == ExperimentKind::spectrum ||
                                kind == ExperimentKind::modes;
        c.detuning = mode_model ? recoil - 0.5 * trap.omega : recoil;
    } else {
        c.detuning = parse_double("coupling.delta", delta);
    }
    c.validate();
    return c;
}

double transverse_area_from_config(const ConfigMap& cfg, const AtomSpecies& species,
                                   const TrapConfig& trap, double n0) {
    const std::string raw = cfg.get_string("system.transverse_area", "default");
    if (raw == "default") return default_transverse_area(species, trap);
    if (raw == "matched") return matched_transverse_area(n0, species, trap);
    return parse_double("system.transverse_area", raw);
}

} // namespace

ParsedExperiment load_experiment_from_text(const std::string& text) {
    ParsedExperiment exp;
    exp.raw = parse_config_text(text);
    exp.kind = experiment_kind_from_string(exp.raw.get_string("experiment.kind"));
    exp.label = exp.raw.get_string("experiment.label");
    exp.hash_hex = config_hash_hex(exp.raw);
    exp.species = species_from_config(exp.raw);
    exp.trap = trap_from_config(exp.raw);
    return exp;
}

ParsedExperiment load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return load_experiment_from_text(buf.str());
}

// ---- single-mode decay runs -------------------------------------------------

namespace {

struct SingleModeRunSpec {
    AtomSpecies species;
    TrapConfig trap;
    CouplingConfig coupling;
    double n0 = 1e6;
    double gamma_periods = 5.0;
    double revival_safety = 2.5;
    std::size_t min_modes = 1024;
    std::size_t max_modes = 400000;
    ModeIntegrator integrator = ModeIntegrator::split;
    std::size_t samples = 400;
};

struct SingleModeRunOutput {
    double gamma_analytic = 0.0;
    double duration = 0.0;
    double detuning = 0.0;
    double omega0 = 0.0;
    BeamModeGrid grid;
    OverlapFunction overlap_fn;
    SingleModeTrajectory traj;
};

SingleModeRunOutput run_single_mode_decay(const SingleModeRunSpec& spec) {
    const double m = spec.species.mass;
    const double w = spec.trap.omega;
    const double k0 = spec.coupling.kick;
    const double omega0 = 0.5 * w;
    const double sigma_k = std::sqrt(m * w / (2.0 * hbar));

    // Golden-rule estimate fixes the run duration and the mode spacing the
    // revival guard requires.
    const double gamma_est = 2.0 * std::sqrt(pi) * spec.coupling.rabi_magnitude *
                             spec.coupling.rabi_magnitude * std::sqrt(m / (hbar * w)) / k0;
    const double duration = spec.gamma_periods / gamma_est;
    const double v0 = hbar * k0 / m;
    // 6% margin over the revival guard threshold.
    const double dq_revival = 2.0 * pi / (1.06 * spec.revival_safety * duration * v0);
    const double span = 12.2 * sigma_k;
    std::size_t modes = std::max<std::size_t>(spec.min_modes,
                                              static_cast<std::size_t>(std::ceil(span / dq_revival)));
    if (modes > spec.max_modes)
        throw NumericalGuardError("mode-count", "revival guard requires more than max_modes modes");

    SingleModeRunOutput out;
    out.grid = BeamModeGrid::make_free_space(k0 - 6.1 * sigma_k, k0 + 6.1 * sigma_k, modes, m);
    out.overlap_fn = overlap(spec.species, spec.trap, out.grid, spec.coupling);
    out.gamma_analytic = model_decay_rate(out.overlap_fn, spec.coupling, omega0);
    out.duration = duration;
    out.detuning = spec.coupling.detuning;
    out.omega0 = omega0;

    SingleModeState init = SingleModeState::vacuum_beam(spec.n0, out.grid, omega0);
    SingleModeEvolveOptions opts;
    opts.integrator = spec.integrator;
    opts.samples = spec.samples;
    opts.revival_safety = spec.revival_safety;
    out.traj = evolve_single_mode(init, out.overlap_fn, spec.coupling, duration, opts);
    return out;
}

// Width of the final omega-offset spectrum over a window around the line
// (the Gaussian overlap envelope skews a full-band measurement). When the
// finite-time line shape fits cleanly its width parameter is unbiased at
// moderate gamma T (a pure Lorentzian fit reads ~17% high at gamma T = 5);
// strong-coupling lines that the model cannot describe fall back to the
// direct FWHM, then to the ripple-robust integral width.
LineMeasurement fit_line_omega(const SingleModeRunOutput& run, double gamma_hint) {
    Spectrum sw = beam_spectrum_omega(run.traj.final_state, run.grid, run.detuning, run.omega0);
    const double lo_avail = sw.axis.front();
    const double hi_avail = sw.axis.back();
    const double half_window = 25.0 * gamma_hint;
    const double lo = std::max(-half_window, 0.9 * lo_avail);
    const double hi = std::min(half_window, 0.9 * hi_avail);
    Spectrum windowed = restrict_axis(sw, lo, hi);
    try {
        const LineMeasurement fit = fit_decay_spectrum(windowed, run.duration);
        if (fit.residual < 0.05) return fit;
    } catch (const AnalysisError&) {
    }
    try {
        return measure_fwhm(windowed);
    } catch (const AnalysisError&) {
    }
    LineMeasurement m;
    m.fwhm = lorentzian_equivalent_width(windowed);
    m.center = spectral_centroid(windowed);
    m.residual = 0.0;
    m.method = "equivalent-width";
    return m;
}

} // namespace

std::vector<Table1Row> run_table1(const ParsedExperiment& exp, unsigned threads) {
    if (exp.kind != ExperimentKind::table1) throw ConfigError("config is not a table1 experiment");
    const ConfigMap& cfg = exp.raw;

    struct RowSpec {
        double k0;
        double rabi;
        bool asterisk;
    };
    std::vector<RowSpec> rows;
    {
        std::stringstream ss(cfg.get_string("table.rows"));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            bool aster = false;
            if (item.back() == '*') {
                aster = true;
                item.pop_back();
            }
            const auto pos = item.find(':');
            if (pos == std::string::npos)
                throw ConfigError("table.rows entries must look like k0:omega");
            rows.push_back({parse_double("table.rows", item.substr(0, pos)),
                            parse_double("table.rows", item.substr(pos + 1)), aster});
        }
        if (rows.empty()) throw ConfigError("table.rows holds no entries");
    }

    SingleModeRunSpec base;
    base.species = exp.species;
    base.trap = exp.trap;
    base.n0 = cfg.get_double("table.n0", 1e6);
    base.gamma_periods = cfg.get_double("table.gamma_periods", 5.0);
    base.revival_safety = cfg.get_double("table.revival_safety", 2.5);
    base.min_modes = cfg.get_size("table.min_modes", 1024);
    base.samples = cfg.get_size("table.samples", 400);
    const std::string integ = cfg.get_string("table.integrator", "split");
    base.integrator = integ == "rk4" ? ModeIntegrator::rk4_rotating : ModeIntegrator::split;

    auto run_row = [&](const RowSpec& r) {
        SingleModeRunSpec spec = base;
        spec.coupling.scheme = CouplingScheme::raman;
        spec.coupling.rabi_magnitude = r.rabi;
        spec.coupling.kick = r.k0;
        spec.coupling.detuning =
            hbar * r.k0 * r.k0 / (2.0 * exp.species.mass) - 0.5 * exp.trap.omega;
        const SingleModeRunOutput out = run_single_mode_decay(spec);

        Table1Row row;
        row.k0 = r.k0;
        row.rabi = r.rabi;
        row.asterisk = r.asterisk;
        row.gamma_analytic = out.gamma_analytic;
        row.duration = out.duration;
        row.n0 = base.n0;
        row.n_out = out.traj.beam_number.back();
        try {
            row.inv_tau = fit_drain_time(out.traj.times, out.traj.condensate_number).gamma;
            row.drain_fit_ok = true;
        } catch (const AnalysisError&) {
            row.inv_tau = inv_drain_time_crossing(out.traj.times, out.traj.condensate_number);
            row.drain_fit_ok = false;
        }
        row.gamma_numeric = fit_line_omega(out, out.gamma_analytic).fwhm;
        return row;
    };

    std::vector<Table1Row> result(rows.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) result[i] = run_row(rows[i]);
    } else {
        std::vector<std::future<Table1Row>> futures;
        futures.reserve(rows.size());
        for (const auto& r : rows)
            futures.push_back(std::async(std::launch::async, run_row, r));
        for (std::size_t i = 0; i < rows.size(); ++i) result[i] = futures[i].get();
    }
    return result;
}

SpectrumRunResult run_spectrum_experiment(const ParsedExperiment& exp) {
    if (exp.kind != ExperimentKind::spectrum)
        throw ConfigError("config is not a spectrum experiment");
    const ConfigMap& cfg = exp.raw;

    SingleModeRunSpec spec;
    spec.species = exp.species;
    spec.trap = exp.trap;
    spec.coupling = coupling_from_config(cfg, exp.species, exp.trap, exp.kind);
    spec.n0 = cfg.get_double("numerics.n0", 1e6);
    spec.gamma_periods = cfg.get_double("numerics.gamma_periods", 5.0);
    spec.revival_safety = cfg.get_double("numerics.revival_safety", 2.5);
    spec.min_modes = cfg.get_size("numerics.min_modes", 1024);
    spec.samples = cfg.get_size("numerics.samples", 400);
    const std::string integ = cfg.get_string("numerics.integrator", "split");
    spec.integrator = integ == "rk4" ? ModeIntegrator::rk4_rotating : ModeIntegrator::split;

    const SingleModeRunOutput out = run_single_mode_decay(spec);

    SpectrumRunResult res;
    res.gamma_analytic = out.gamma_analytic;
    res.duration = out.duration;
    res.n0 = spec.n0;
    res.detuning = out.detuning;
    res.omega0 = out.omega0;
    res.grid = out.grid;
    res.overlap_fn = out.overlap_fn;
    res.traj = out.traj;
    res.spectrum_k = beam_spectrum(out.traj.final_state, out.grid);
    res.spectrum_omega = beam_spectrum_omega(out.traj.final_state, out.grid, out.detuning, out.omega0);
    {
        const double half_window = 25.0 * out.gamma_analytic;
        const double lo = std::max(-half_window, 0.9 * res.spectrum_omega.axis.front());
        const double hi = std::min(half_window, 0.9 * res.spectrum_omega.axis.back());
        res.line = fit_lorentzian(restrict_axis(res.spectrum_omega, lo, hi));
    }
    return res;
}

ModesResult run_modes(const ParsedExperiment& exp) {
    if (exp.kind != ExperimentKind::modes) throw ConfigError("config is not a modes experiment");
    const ConfigMap& cfg = exp.raw;
    const CouplingConfig coupling = coupling_from_config(cfg, exp.species, exp.trap, exp.kind);
    const unsigned count = static_cast<unsigned>(cfg.get_size("modes.count", 20));
    const TrapModeBasis basis = TrapModeBasis::make(count, exp.species, exp.trap);
    std::vector<std::complex<double>> alpha(count, {1.0, 0.0}); // equal superposition

    ModesResult res;
    res.k0 = coupling.kick;
    res.detuning = coupling.detuning;
    res.intensities = relative_intensities(alpha, basis, coupling.detuning, coupling.kick);
    return res;
}

// ---- GPE experiment assembly -------------------------------------------------

namespace {

struct GpeSetup {
    GpeSystem system;
    CouplingConfig coupling;
    DetuningSchedule schedule;
    SpatialGrid grid;
    double n0 = 0.0;
    GpeEvolveOptions opts;
    double duration = 0.0;
    unsigned pad = 1;
    double window_lo = 0.0, window_hi = 0.0;
    bool mask = false;       // measure spectra on the escaped beam only
    double mask_cut = 0.0;   // absolute x below which psi_u is tapered away
    double mask_taper = 0.0;
};

GpeSetup gpe_setup_from_config(const ParsedExperiment& exp, bool swept_schedule) {
    const ConfigMap& cfg = exp.raw;
    GpeSetup setup;
    setup.n0 = cfg.get_double("system.n0");
    const double area = transverse_area_from_config(cfg, exp.species, exp.trap, setup.n0);
    setup.system.species = exp.species;
    setup.system.trap = exp.trap;
    setup.system.couplings = NonlinearCouplings::from_species(exp.species, area);
    setup.system.trap_center = cfg.get_double("numerics.trap_center", 0.0);

    setup.coupling = coupling_from_config(cfg, exp.species, exp.trap, ExperimentKind::gpe);

    const std::string sched = swept_schedule
                                  ? std::string("chirp-compensated")
                                  : cfg.get_string("coupling.schedule", "constant");
    if (sched == "constant") {
        setup.schedule = DetuningSchedule::constant(setup.coupling.detuning);
    } else if (sched == "chirp-compensated") {
        const std::string model = cfg.get_string("coupling.mu_model", "tf1d");
        const MuModel mu_model = model == "tf3d" ? MuModel::tf_3d : MuModel::tf_1d;
        const double coupling_for_model = mu_model == MuModel::tf_1d
                                              ? setup.system.reduced_tt()
                                              : setup.system.couplings.u_tt;
        double r0;
        if (cfg.has("coupling.r0")) {
            r0 = cfg.get_double("coupling.r0");
        } else {
            const double frac = cfg.get_double("coupling.r0_fraction", 0.5);
            const double mu0 = mu_model == MuModel::tf_1d
                                   ? chemical_potential_1d(setup.n0, exp.species, exp.trap,
                                                           coupling_for_model)
                                   : chemical_potential(setup.n0, exp.species, exp.trap,
                                                        coupling_for_model);
            r0 = frac * thomas_fermi_radius(mu0, exp.species, exp.trap);
        }
        setup.schedule = DetuningSchedule::chirp_compensated(
            exp.species, exp.trap, coupling_for_model, mu_model, setup.n0, r0,
            setup.coupling.kick);
    } else {
        throw ConfigError("unknown detuning schedule '" + sched + "'");
    }

    const std::size_t points = cfg.get_size("numerics.grid_points", 8192);
    const double box = cfg.get_double("numerics.box_length");
    setup.grid = SpatialGrid::centered(points, box, 0.0);
    setup.duration = cfg.get_double("numerics.duration");

    setup.opts.dt = cfg.get_double("numerics.dt", 0.0);
    setup.opts.samples = cfg.get_size("numerics.samples", 400);
    setup.opts.snapshot_times = cfg.get_double_list("numerics.snapshots");
    setup.opts.absorber.enabled = cfg.get_bool("numerics.absorber", false);
    setup.opts.absorber.fraction = cfg.get_double("numerics.absorber_fraction", 0.10);
    setup.opts.absorber.strength = cfg.get_double("numerics.absorber_strength", 0.0);

    setup.pad = static_cast<unsigned>(cfg.get_size("numerics.spectrum_pad", 1));
    const double k0 = setup.coupling.kick;
    const double k_cent = initial_line_center(setup.n0, k0, exp.species, exp.trap,
                                              setup.system.couplings.u_tt);
    setup.window_lo = cfg.get_double("numerics.spectrum_window_lo", 0.5 * k0);
    setup.window_hi = cfg.get_double("numerics.spectrum_window_hi", 2.0 * k_cent);

    // Beam spectra are measured on the escaped beam by default: atoms still
    // crossing the mean-field hill carry transient momenta between k0 and the
    // asymptotic line and would floor any width measure.
    const double u1 = setup.system.reduced_tt();
    setup.mask = cfg.get_bool("numerics.beam_mask", u1 > 0.0);
    if (setup.mask) {
        if (cfg.has("numerics.beam_mask_cut")) {
            setup.mask_cut = cfg.get_double("numerics.beam_mask_cut");
            setup.mask_taper = cfg.get_double("numerics.beam_mask_taper", 0.1 * std::fabs(setup.mask_cut) + 1e-6);
        } else {
            if (!(u1 > 0.0))
                throw ConfigError("beam_mask needs interactions or an explicit beam_mask_cut");
            const ThomasFermi1D tf = ThomasFermi1D::make(setup.n0, exp.species, exp.trap, u1);
            const double radii = cfg.get_double("numerics.beam_mask_radii", 2.0);
            setup.mask_cut = setup.system.trap_center + radii * tf.radius;
            setup.mask_taper = 0.5 * tf.radius;
        }
    }
    return setup;
}

GpeRunResult run_gpe_setup(const ParsedExperiment& exp, const GpeSetup& setup) {
    GpeRunResult res;
    res.system = setup.system;
    res.coupling = setup.coupling;
    res.schedule = setup.schedule;
    res.n0 = setup.n0;
    res.k_cent = initial_line_center(setup.n0, setup.coupling.kick, exp.species, exp.trap,
                                     setup.system.couplings.u_tt);
    res.grid_bin = setup.grid.dk();
    res.spectrum_window_lo = setup.window_lo;
    res.spectrum_window_hi = setup.window_hi;
    res.spectrum_pad = setup.pad;

    const FieldState ground = ground_state(setup.grid, setup.system, setup.n0);
    res.evolution = evolve_gpe(ground, setup.system, setup.coupling, setup.schedule,
                               setup.duration, setup.opts);

    for (const FieldState& snap : res.evolution.snapshots) {
        Spectrum full = setup.mask
                            ? beam_momentum_spectrum_masked(snap, setup.pad, setup.mask_cut,
                                                            setup.mask_taper)
                            : beam_momentum_spectrum(snap, setup.pad);
        Spectrum windowed = restrict_axis(full, setup.window_lo, setup.window_hi);
        GpeSnapshotMeasurement m;
        m.time = snap.time;
        m.centroid = spectral_centroid(windowed);
        m.peak = spectral_peak_position(windowed);
        m.support = support_interval(windowed, 0.95);
        try {
            m.direct = measure_fwhm(windowed);
        } catch (const AnalysisError&) {
            m.direct = std::nullopt;
        }
        res.beam_spectra.push_back(std::move(windowed));
        res.measurements.push_back(m);
    }
    return res;
}

} // namespace

GpeRunResult run_gpe_experiment(const ParsedExperiment& exp) {
    if (exp.kind != ExperimentKind::gpe && exp.kind != ExperimentKind::weak_sweep)
        throw ConfigError("config is not a gpe experiment");
    return run_gpe_setup(exp, gpe_setup_from_config(exp, false));
}

WeakSweepResult run_weak_sweep(const ParsedExperiment& exp) {
    if (exp.kind != ExperimentKind::weak_sweep)
        throw ConfigError("config is not a weak-sweep experiment");
    WeakSweepResult res;
    res.run = run_gpe_experiment(exp);

    const auto window = exp.raw.get_double_list("weak.slope_window");
    if (window.size() != 2) throw ConfigError("weak.slope_window needs lo,hi");
    res.slope_window_lo = window[0];
    res.slope_window_hi = window[1];

    const double m = exp.species.mass;
    for (std::size_t i = 0; i < res.run.beam_spectra.size(); ++i) {
        const Spectrum& s = res.run.beam_spectra[i];
        const LineMeasurement lm = measure_fwhm(s);
        const double v = hbar * lm.center / m; // group velocity at the line
        res.times.push_back(s.time);
        res.fwhm_omega.push_back(lm.fwhm * v);
    }

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < res.times.size(); ++i) {
        if (res.times[i] < res.slope_window_lo || res.times[i] > res.slope_window_hi) continue;
        const double x = std::log(res.times[i]);
        const double y = std::log(res.fwhm_omega[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 3) throw ConfigError("slope window keeps fewer than 3 measurements");
    const double denom = count * sxx - sx * sx;
    res.slope = (count * sxy - sx * sy) / denom;
    return res;
}

ChirpPairResult run_chirp_pair(const ParsedExperiment& exp) {
    if (exp.kind != ExperimentKind::chirp) throw ConfigError("config is not a chirp experiment");

    GpeSetup fixed_setup = gpe_setup_from_config(exp, false);
    fixed_setup.schedule = DetuningSchedule::constant(fixed_setup.coupling.detuning);
    GpeSetup swept_setup = gpe_setup_from_config(exp, true);

    ChirpPairResult res;
    res.fixed = run_gpe_setup(exp, fixed_setup);
    res.swept = run_gpe_setup(exp, swept_setup);

    const auto final_fraction = [](const GpeRunResult& r) {
        return r.evolution.final_state.outcoupled_fraction();
    };
    const double default_fraction =
        0.9 * std::min(final_fraction(res.fixed), final_fraction(res.swept));
    res.compare_fraction = exp.raw.get_double("chirp.compare_fraction", default_fraction);

    // Linewidth of a clean single-peak line is its FWHM; a chirp-structured
    // spectrum with no resolvable half-max interval is measured by its
    // 95%-support width instead.
    auto width_at_fraction = [&](const GpeRunResult& r, std::string& method) {
        std::size_t pick = r.measurements.size() - 1;
        for (std::size_t i = 0; i < r.evolution.snapshots.size(); ++i) {
            if (r.evolution.snapshots[i].outcoupled_fraction() >= res.compare_fraction) {
                pick = i;
                break;
            }
        }
        const GpeSnapshotMeasurement& m = r.measurements[pick];
        if (m.direct) {
            method = m.direct->method;
            return m.direct->fwhm;
        }
        method = "support-95";
        return m.support.width();
    };
    res.width_fixed = width_at_fraction(res.fixed, res.width_fixed_method);
    res.width_swept = width_at_fraction(res.swept, res.width_swept_method);
    res.improvement_ratio = res.width_fixed / res.width_swept;

    double e0 = 0.0, worst = 0.0;
    bool first = true;
    for (const GpeSample& s : res.swept.evolution.samples) {
        if (first) {
            e0 = s.e_out;
            first = false;
        } else {
            worst = std::max(worst, std::fabs(s.e_out - e0) / std::fabs(e0));
        }
    }
    res.e_out_rel_variation = worst;
    return res;
}

std::vector<InterferometerRow> run_interferometer(const ParsedExperiment& exp) {
    if (exp.kind != ExperimentKind::interferometer)
        throw ConfigError("config is not an interferometer experiment");
    const ConfigMap& cfg = exp.raw;

    StepProbe base;
    base.mass = exp.species.mass;
    base.k = cfg.get_double("probe.k");
    base.dk = cfg.get_double("probe.dk");
    base.width = cfg.get_double("probe.length");
    const double recoil_energy = hbar * hbar * base.k * base.k / (2.0 * base.mass);
    base.barrier = cfg.get_double("probe.v0_fraction", 0.25) * recoil_energy;

    const std::string sweep = cfg.get_string("probe.sweep", "dk");
    const double lo = cfg.get_double("probe.sweep_lo");
    const double hi = cfg.get_double("probe.sweep_hi");
    const std::size_t count = cfg.get_size("probe.sweep_count", 25);
    const bool log_scale = cfg.get_bool("probe.sweep_log", true);
    if (count < 2) throw ConfigError("probe.sweep_count must be >= 2");

    std::vector<InterferometerRow> rows;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        const double v = log_scale ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo);
        StepProbe p = base;
        if (sweep == "dk")
            p.dk = v;
        else if (sweep == "v0")
            p.barrier = v * recoil_energy;
        else if (sweep == "length")
            p.width = v;
        else
            throw ConfigError("probe.sweep must be dk, v0 or length");
        InterferometerRow row;
        row.probe = p;
        row.dphi = phase_uncertainty(p);
        row.dphi_exact = phase_uncertainty_exact(p);
        row.dphi_fixed_position = phase_uncertainty_fixed_position(p);
        rows.push_back(row);
    }
    return rows;
}

// ---- CSV output ---------------------------------------------------------------

namespace {

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const ParsedExperiment& exp,
              const std::string& columns) {
        out_.open(path);
        if (!out_) throw ConfigError("cannot open output file: " + path.string());
        out_ << "# atomlaser-version = " << version << "\n";
        out_ << "# kind = " << to_string(exp.kind) << "\n";
        out_ << "# label = " << exp.label << "\n";
        out_ << "# config-hash = " << exp.hash_hex << "\n";
        out_ << "# columns = " << columns << "\n";
        out_ << columns << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_gpe_outputs(const std::filesystem::path& dir, const ParsedExperiment& exp,
                       const GpeRunResult& r, bool write_snaps, bool write_spectra) {
    {
        CsvWriter w(dir / "trajectory.csv", exp,
                    "t,n_trapped,n_beam,n_absorbed,delta,mu,e_out");
        for (const GpeSample& s : r.evolution.samples)
            w.row({fmt(s.time), fmt(s.n_trapped), fmt(s.n_beam), fmt(s.n_absorbed),
                   fmt(s.detuning), fmt(s.mu), fmt(s.e_out)});
    }
    {
        CsvWriter w(dir / "lines.csv", exp, "t,center,fwhm_k,fwhm_E,method,residual");
        const double m = r.system.species.mass;
        for (const GpeSnapshotMeasurement& ms : r.measurements) {
            if (ms.direct) {
                const double jac = hbar * hbar * ms.direct->center / m; // dE/dk
                w.row({fmt(ms.time), fmt(ms.direct->center), fmt(ms.direct->fwhm),
                       fmt(ms.direct->fwhm * jac), ms.direct->method, fmt(ms.direct->residual)});
            } else {
                w.row({fmt(ms.time), "nan", "nan", "nan", "gap", "nan"});
            }
        }
    }
    {
        CsvWriter w(dir / "beam_track.csv", exp,
                    "t,centroid_k,peak_k,support_lo,support_hi,support_width,outcoupled_fraction");
        for (std::size_t i = 0; i < r.measurements.size(); ++i) {
            const GpeSnapshotMeasurement& ms = r.measurements[i];
            const double frac = r.evolution.snapshots[i].outcoupled_fraction();
            w.row({fmt(ms.time), fmt(ms.centroid), fmt(ms.peak), fmt(ms.support.lo),
                   fmt(ms.support.hi), fmt(ms.support.width()), fmt(frac)});
        }
    }
    if (write_spectra) {
        for (std::size_t i = 0; i < r.beam_spectra.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "spectrum_%03zu.csv", i);
            CsvWriter w(dir / name, exp, "k,density");
            const Spectrum& s = r.beam_spectra[i];
            for (std::size_t j = 0; j < s.axis.size(); ++j)
                w.row({fmt(s.axis[j]), fmt(s.density[j])});
        }
    }
    if (write_snaps) {
        for (std::size_t i = 0; i < r.evolution.snapshots.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "snapshot_%03zu.bin", i);
            write_snapshot((dir / name).string(), r.evolution.snapshots[i]);
        }
    }
}

void write_summary(const std::filesystem::path& dir, const ParsedExperiment& exp,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
    CsvWriter w(dir / "summary.csv", exp, "key,value");
    for (const auto& [k, v] : entries) w.row({k, v});
}

} // namespace

RunOutcome run_experiment(const std::filesystem::path& config_path, const RunOptions& opts) {
    const ParsedExperiment exp = load_experiment(config_path);

    std::filesystem::path root = opts.output_root;
    if (root.empty()) root = exp.raw.get_string("output.directory", ".");
    const std::filesystem::path dir = root / exp.label;
    std::filesystem::create_directories(dir);

    const bool write_snaps =
        opts.write_snapshots || exp.raw.get_bool("output.write_snapshots", false);
    const bool write_spectra = exp.raw.get_bool("output.write_spectra", false);

    switch (exp.kind) {
        case ExperimentKind::table1: {
            const auto rows = run_table1(exp, opts.threads);
            CsvWriter w(dir / "table1.csv", exp,
                        "k0,omega,inv_tau,gamma_numeric,gamma_analytic,asterisk_flag");
            for (const Table1Row& r : rows)
                w.row({fmt(r.k0), fmt(r.rabi), fmt(r.inv_tau), fmt(r.gamma_numeric),
                       fmt(r.gamma_analytic), r.asterisk ? "1" : "0"});
            break;
        }
        case ExperimentKind::spectrum: {
            const SpectrumRunResult res = run_spectrum_experiment(exp);
            {
                CsvWriter w(dir / "trajectory.csv", exp, "t,n_condensate,n_beam");
                for (std::size_t i = 0; i < res.traj.times.size(); ++i)
                    w.row({fmt(res.traj.times[i]), fmt(res.traj.condensate_number[i]),
                           fmt(res.traj.beam_number[i])});
            }
            {
                CsvWriter w(dir / "spectrum.csv", exp, "q,density_q");
                for (std::size_t i = 0; i < res.spectrum_k.axis.size(); ++i)
                    w.row({fmt(res.spectrum_k.axis[i]), fmt(res.spectrum_k.density[i])});
            }
            {
                CsvWriter w(dir / "spectrum_omega.csv", exp, "domega,density_omega");
                for (std::size_t i = 0; i < res.spectrum_omega.axis.size(); ++i)
                    w.row({fmt(res.spectrum_omega.axis[i]), fmt(res.spectrum_omega.density[i])});
            }
            {
                CsvWriter w(dir / "lines.csv", exp, "t,center,fwhm_k,fwhm_E,method,residual");
                // Line measured on the omega axis; convert to the k axis at the line.
                const LineMeasurement km = measure_fwhm(res.spectrum_k);
                const double jac = hbar * hbar * km.center / exp.species.mass;
                w.row({fmt(res.duration), fmt(km.center), fmt(km.fwhm), fmt(km.fwhm * jac),
                       km.method, fmt(km.residual)});
            }
            write_summary(dir, exp,
                          {{"gamma_analytic", fmt(res.gamma_analytic)},
                           {"gamma_fit", fmt(res.line.fwhm)},
                           {"fit_residual", fmt(res.line.residual)},
                           {"duration", fmt(res.duration)},
                           {"n_out", fmt(res.traj.beam_number.back())}});
            break;
        }
        case ExperimentKind::modes: {
            const ModesResult res = run_modes(exp);
            CsvWriter w(dir / "modes.csv", exp, "n,k_res,intensity,resonant_flag");
            for (const ModeIntensity& mi : res.intensities)
                w.row({fmt(mi.n), fmt(mi.k_res), fmt(mi.intensity), mi.resonant ? "1" : "0"});
            break;
        }
        case ExperimentKind::gpe: {
            const GpeRunResult res = run_gpe_experiment(exp);
            write_gpe_outputs(dir, exp, res, write_snaps, write_spectra);
            write_summary(dir, exp,
                          {{"k_cent", fmt(res.k_cent)},
                           {"grid_bin", fmt(res.grid_bin)},
                           {"final_outcoupled_fraction",
                            fmt(res.evolution.final_state.outcoupled_fraction())}});
            break;
        }
        case ExperimentKind::weak_sweep: {
            const WeakSweepResult res = run_weak_sweep(exp);
            write_gpe_outputs(dir, exp, res.run, write_snaps, write_spectra);
            {
                CsvWriter w(dir / "narrowing.csv", exp, "t,fwhm_omega");
                for (std::size_t i = 0; i < res.times.size(); ++i)
                    w.row({fmt(res.times[i]), fmt(res.fwhm_omega[i])});
            }
            write_summary(dir, exp,
                          {{"slope", fmt(res.slope)},
                           {"slope_window_lo", fmt(res.slope_window_lo)},
                           {"slope_window_hi", fmt(res.slope_window_hi)}});
            break;
        }
        case ExperimentKind::chirp: {
            const ChirpPairResult res = run_chirp_pair(exp);
            std::filesystem::create_directories(dir / "fixed");
            std::filesystem::create_directories(dir / "swept");
            write_gpe_outputs(dir / "fixed", exp, res.fixed, write_snaps, write_spectra);
            write_gpe_outputs(dir / "swept", exp, res.swept, write_snaps, write_spectra);
            {
                CsvWriter w(dir / "comparison.csv", exp,
                            "t,width_fixed,width_swept,fraction_fixed,fraction_swept");
                const std::size_t count =
                    std::min(res.fixed.measurements.size(), res.swept.measurements.size());
                for (std::size_t i = 0; i < count; ++i)
                    w.row({fmt(res.fixed.measurements[i].time),
                           fmt(res.fixed.measurements[i].support.width()),
                           fmt(res.swept.measurements[i].support.width()),
                           fmt(res.fixed.evolution.snapshots[i].outcoupled_fraction()),
                           fmt(res.swept.evolution.snapshots[i].outcoupled_fraction())});
            }
            write_summary(dir, exp,
                          {{"compare_fraction", fmt(res.compare_fraction)},
                           {"width_fixed", fmt(res.width_fixed)},
                           {"width_fixed_method", res.width_fixed_method},
                           {"width_swept", fmt(res.width_swept)},
                           {"width_swept_method", res.width_swept_method},
                           {"improvement_ratio", fmt(res.improvement_ratio)},
                           {"e_out_rel_variation", fmt(res.e_out_rel_variation)}});
            break;
        }
        case ExperimentKind::interferometer: {
            const auto rows = run_interferometer(exp);
            CsvWriter w(dir / "interferometer.csv", exp,
                        "k,dk,v0,length,dphi,dphi_exact,dphi_fixed_position");
            for (const InterferometerRow& r : rows)
                w.row({fmt(r.probe.k), fmt(r.probe.dk), fmt(r.probe.barrier), fmt(r.probe.width),
                       fmt(r.dphi), fmt(r.dphi_exact), fmt(r.dphi_fixed_position)});
            break;
        }
    }

    RunOutcome outcome;
    outcome.out_dir = dir;
    outcome.kind = exp.kind;
    outcome.hash_hex = exp.hash_hex;
    return outcome;
}

namespace {

struct LinesFile {
    std::string kind;
    std::vector<double> times;
    std::vector<double> fwhm_k;
};

LinesFile read_lines_csv(const std::filesystem::path& dir) {
    std::ifstream in(dir / "lines.csv");
    if (!in) throw ConfigError("no lines.csv in " + dir.string());
    LinesFile f;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# kind = ", 0) == 0) {
            f.kind = trim(line.substr(9));
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("t,", 0) == 0) continue; // column header
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3) continue;
        f.times.push_back(std::strtod(cells[0].c_str(), nullptr));
        f.fwhm_k.push_back(std::strtod(cells[2].c_str(), nullptr));
    }
    return f;
}

} // namespace

CompareOutcome compare_runs(const std::filesystem::path& dir_a,
                            const std::filesystem::path& dir_b,
                            const std::filesystem::path& out_dir) {
    const LinesFile a = read_lines_csv(dir_a);
    const LinesFile b = read_lines_csv(dir_b);
    if (a.kind != b.kind)
        throw ConfigError("alignment: runs have different kinds ('" + a.kind + "' vs '" + b.kind +
                          "')");
    if (a.times.size() != b.times.size())
        throw ConfigError("alignment: snapshot schedules have different lengths");
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        const double scale = std::max({std::fabs(a.times[i]), std::fabs(b.times[i]), 1e-12});
        if (std::fabs(a.times[i] - b.times[i]) > 1e-9 * scale)
            throw ConfigError("alignment: snapshot times disagree at row " + std::to_string(i));
    }

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path report = out_dir / "comparison.csv";
    std::ofstream out(report);
    if (!out) throw ConfigError("cannot open " + report.string());
    out << "# atomlaser-version = " << version << "\n";
    out << "# columns = t,fwhm_k_a,fwhm_k_b,ratio\n";
    out << "t,fwhm_k_a,fwhm_k_b,ratio\n";
    CompareOutcome res;
    res.report_path = report;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        const double ratio = a.fwhm_k[i] / b.fwhm_k[i];
        out << fmt(a.times[i]) << ',' << fmt(a.fwhm_k[i]) << ',' << fmt(b.fwhm_k[i]) << ','
            << fmt(ratio) << '\n';
        if (std::isfinite(ratio)) {
            res.final_ratio = ratio;
            ++res.aligned_rows;
        }
    }
    return res;
}

std::vector<ExperimentInfo> list_experiments(const std::filesystem::path& dir) {
    std::vector<ExperimentInfo> out;
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("experiment directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".cfg") continue;
        try {
            const ConfigMap cfg = parse_config_file(entry.path());
            ExperimentInfo info;
            info.path = entry.path();
            info.kind = cfg.get_string("experiment.kind", "?");
            info.label = cfg.get_string("experiment.label", "?");
            out.push_back(info);
        } catch (const ConfigError&) {
            // Unparseable files are skipped, not fatal for a listing.
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ExperimentInfo& x, const ExperimentInfo& y) { return x.path < y.path; });
    return out;
}

} // namespace atomlaser
