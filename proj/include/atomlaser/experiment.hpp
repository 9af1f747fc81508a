// Reproducible experiment runner: flat key=value configs with section
// headers, typed per-kind runners, deterministic CSV outputs carrying a
// config hash, and paired-run comparison.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atomlaser/gpe.hpp"
#include "atomlaser/interferometry.hpp"
#include "atomlaser/multimode.hpp"
#include "atomlaser/single_mode.hpp"

namespace atomlaser {

struct ConfigMap {
    // Keys are "section.key"; values are raw strings.
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    // Canonical serialization (sorted keys) used for hashing.
    std::string canonical() const;
};

ConfigMap parse_config_file(const std::filesystem::path& path);
ConfigMap parse_config_text(const std::string& text);

// FNV-1a 64-bit over the canonical serialization.
std::uint64_t config_hash(const ConfigMap& cfg);
std::string config_hash_hex(const ConfigMap& cfg);

enum class ExperimentKind { table1, spectrum, modes, gpe, chirp, weak_sweep, interferometer };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

// Typed view of a parsed experiment config. Building it performs all
// validation: missing keys, bad numbers and violated numerical guards throw
// ConfigError before any work starts.
struct ParsedExperiment {
    ExperimentKind kind = ExperimentKind::table1;
    std::string label;
    ConfigMap raw;
    std::string hash_hex;

    AtomSpecies species;
    TrapConfig trap;
};

ParsedExperiment load_experiment(const std::filesystem::path& path);
ParsedExperiment load_experiment_from_text(const std::string& text);

// ---- table1 -------------------------------------------------------------

struct Table1Row {
    double k0 = 0.0;
    double rabi = 0.0;
    bool asterisk = false;
    double inv_tau = 0.0;        // drain rate (1/s)
    double gamma_numeric = 0.0;  // fitted spectral FWHM (rad/s)
    double gamma_analytic = 0.0; // golden-rule rate (rad/s)
    double n_out = 0.0;
    double duration = 0.0;
    double n0 = 0.0;
    bool drain_fit_ok = true;
};

std::vector<Table1Row> run_table1(const ParsedExperiment& exp, unsigned threads = 1);

// ---- single-mode spectrum run --------------------------------------------

struct SpectrumRunResult {
    double gamma_analytic = 0.0;
    double duration = 0.0;
    double n0 = 0.0;
    double detuning = 0.0;
    double omega0 = 0.0;
    BeamModeGrid grid;
    OverlapFunction overlap_fn;
    SingleModeTrajectory traj;
    Spectrum spectrum_k;      // final |beta(q)|^2
    Spectrum spectrum_omega;  // against omega(q) - delta - omega0
    LineMeasurement line;     // lorentzian fit of spectrum_omega
};

SpectrumRunResult run_spectrum_experiment(const ParsedExperiment& exp);

// ---- multimode intensities ------------------------------------------------

struct ModesResult {
    double k0 = 0.0;
    double detuning = 0.0;
    std::vector<ModeIntensity> intensities;
};

ModesResult run_modes(const ParsedExperiment& exp);

// ---- GPE runs --------------------------------------------------------------

struct GpeSnapshotMeasurement {
    double time = 0.0;
    double centroid = 0.0;
    double peak = 0.0;
    SupportInterval support;
    std::optional<LineMeasurement> direct; // absent when multi-peaked/clipped
};

struct GpeRunResult {
    GpeSystem system;
    CouplingConfig coupling;
    DetuningSchedule schedule;
    double n0 = 0.0;
    double k_cent = 0.0;   // 3D-mu line-center prediction
    double grid_bin = 0.0; // spectral bin 2 pi / L of the run
    double spectrum_window_lo = 0.0;
    double spectrum_window_hi = 0.0;
    unsigned spectrum_pad = 1;
    GpeResult evolution;
    std::vector<Spectrum> beam_spectra; // per snapshot, restricted to the window
    std::vector<GpeSnapshotMeasurement> measurements;
};

GpeRunResult run_gpe_experiment(const ParsedExperiment& exp);

struct WeakSweepResult {
    GpeRunResult run;
    std::vector<double> times;
    std::vector<double> fwhm_omega; // rad/s
    double slope = 0.0;             // log-log linewidth vs time
    double slope_window_lo = 0.0;
    double slope_window_hi = 0.0;
};

WeakSweepResult run_weak_sweep(const ParsedExperiment& exp);

struct ChirpPairResult {
    GpeRunResult fixed;
    GpeRunResult swept;
    double compare_fraction = 0.0; // outcoupled fraction at which widths are read
    // Linewidth per run: direct FWHM when the line is a clean single peak,
    // otherwise the 95%-support width of the structured spectrum.
    double width_fixed = 0.0; // 1/m
    double width_swept = 0.0;
    std::string width_fixed_method;
    std::string width_swept_method;
    double improvement_ratio = 0.0;
    double e_out_rel_variation = 0.0; // swept run, max |E_out - E_out(0)| / E_out(0)
};

ChirpPairResult run_chirp_pair(const ParsedExperiment& exp);

// ---- interferometer sweep ---------------------------------------------------

struct InterferometerRow {
    StepProbe probe;
    double dphi = 0.0;
    double dphi_exact = 0.0;
    double dphi_fixed_position = 0.0;
};

std::vector<InterferometerRow> run_interferometer(const ParsedExperiment& exp);

// ---- dispatcher and file outputs --------------------------------------------

struct RunOptions {
    std::filesystem::path output_root; // empty = config's output.directory or cwd
    unsigned threads = 1;
    bool write_snapshots = false; // in addition to the config's own setting
};

struct RunOutcome {
    std::filesystem::path out_dir;
    ExperimentKind kind;
    std::string hash_hex;
};

// Parses, runs and writes all output files for one experiment config.
RunOutcome run_experiment(const std::filesystem::path& config_path, const RunOptions& opts = {});

struct CompareOutcome {
    std::filesystem::path report_path;
    double final_ratio = 0.0; // width ratio A/B at the last aligned time
    std::size_t aligned_rows = 0;
};

// Aligns the lines.csv of two completed runs by time stamp and writes a
// paired-comparison CSV plus a summary ratio.
CompareOutcome compare_runs(const std::filesystem::path& dir_a,
                            const std::filesystem::path& dir_b,
                            const std::filesystem::path& out_dir);

struct ExperimentInfo {
    std::filesystem::path path;
    std::string kind;
    std::string label;
};

std::vector<ExperimentInfo> list_experiments(const std::filesystem::path& dir);

// Environment variable names honored by the CLI and the runner.
inline constexpr const char* kOutputRootEnv = "ATOMLASER_OUTPUT_ROOT";
inline constexpr const char* kThreadsEnv = "ATOMLASER_THREADS";

} // namespace atomlaser
