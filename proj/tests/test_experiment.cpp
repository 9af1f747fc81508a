#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "atomlaser/experiment.hpp"

using namespace atomlaser;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "atomlaser_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << text;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kModesCfg = R"(
[experiment]
kind = modes
label = modes-test

[system]
species = rb87
omega_t = 50

[coupling]
scheme = raman
rabi = 1
k0 = 1e8
delta = resonant

[modes]
count = 20
)";

const char* kInterferometerCfg = R"(
[experiment]
kind = interferometer
label = ifm-test

[system]
species = rb87
omega_t = 50

[probe]
k = 1e7
dk = 1e3
length = 1e-4
v0_fraction = 0.25
sweep = dk
sweep_lo = 1e1
sweep_hi = 1e4
sweep_count = 7
)";

} // namespace

TEST_CASE("config parsing and hashing") {
    SUBCASE("sections and keys") {
        const ConfigMap cfg = parse_config_text("[a]\nx = 1.5\ny = hello\n[b]\nx = 2\n");
        CHECK(cfg.get_double("a.x") == 1.5);
        CHECK(cfg.get_string("a.y") == "hello");
        CHECK(cfg.get_double("b.x") == 2.0);
        CHECK_THROWS_AS(cfg.get_string("a.missing"), ConfigError);
    }
    SUBCASE("comments and blank lines are skipped") {
        const ConfigMap cfg = parse_config_text("# top\n[s]\n# c\n\nk = 3\n");
        CHECK(cfg.get_double("s.k") == 3.0);
    }
    SUBCASE("key outside a section is an error") {
        CHECK_THROWS_AS(parse_config_text("k = 3\n"), ConfigError);
    }
    SUBCASE("bad numbers are reported with their key") {
        const ConfigMap cfg = parse_config_text("[s]\nk = abc\n");
        CHECK_THROWS_WITH_AS(cfg.get_double("s.k"),
                             doctest::Contains("s.k"), ConfigError);
    }
    SUBCASE("any parameter change moves the hash") {
        const ConfigMap a = parse_config_text("[s]\nk = 1\nl = 2\n");
        const ConfigMap b = parse_config_text("[s]\nk = 1\nl = 3\n");
        const ConfigMap c = parse_config_text("[s]\nl = 2\nk = 1\n"); // order must not matter
        CHECK(config_hash(a) != config_hash(b));
        CHECK(config_hash(a) == config_hash(c));
        CHECK(config_hash_hex(a).size() == 16);
    }
    SUBCASE("double lists") {
        const ConfigMap cfg = parse_config_text("[s]\nv = 1, 2.5, 3e-2\n");
        const auto v = cfg.get_double_list("s.v");
        REQUIRE(v.size() == 3);
        CHECK(v[1] == 2.5);
    }
}

TEST_CASE("experiment validation errors") {
    SUBCASE("missing omega_t") {
        const char* cfg = "[experiment]\nkind = modes\nlabel = x\n[system]\nspecies = rb87\n";
        CHECK_THROWS_WITH_AS(load_experiment_from_text(cfg),
                             doctest::Contains("omega_t"), ConfigError);
    }
    SUBCASE("unknown kind") {
        const char* cfg = "[experiment]\nkind = nope\nlabel = x\n[system]\nspecies = rb87\nomega_t = 50\n";
        CHECK_THROWS_AS(load_experiment_from_text(cfg), ConfigError);
    }
    SUBCASE("missing kind") {
        CHECK_THROWS_AS(load_experiment_from_text("[system]\nomega_t = 50\n"), ConfigError);
    }
}

TEST_CASE("modes experiment runs and writes its table") {
    const fs::path dir = scratch_dir("modes");
    const std::string cfg_path = write_file(dir, "modes.cfg", kModesCfg);

    RunOptions opts;
    opts.output_root = dir / "out";
    const RunOutcome outcome = run_experiment(cfg_path, opts);
    CHECK(outcome.kind == ExperimentKind::modes);
    CHECK(fs::exists(outcome.out_dir / "modes.csv"));

    const std::string text = slurp(outcome.out_dir / "modes.csv");
    CHECK(text.find("# config-hash = " + outcome.hash_hex) != std::string::npos);
    CHECK(text.find("n,k_res,intensity,resonant_flag") != std::string::npos);

    SUBCASE("reruns are byte-identical") {
        const std::string first = text;
        run_experiment(cfg_path, opts);
        CHECK(slurp(outcome.out_dir / "modes.csv") == first);
    }
}

TEST_CASE("table experiment writes the pinned CSV schema") {
    const char* cfg = R"(
[experiment]
kind = table1
label = table-mini

[system]
species = rb87
scattering_length = 0
omega_t = 50

[table]
rows = 1e6:25,1e6:10
n0 = 1e6
gamma_periods = 4
min_modes = 512
)";
    const fs::path dir = scratch_dir("table-mini");
    const std::string cfg_path = write_file(dir, "t.cfg", cfg);
    RunOptions opts;
    opts.output_root = dir / "out";
    const RunOutcome outcome = run_experiment(cfg_path, opts);
    const std::string text = slurp(outcome.out_dir / "table1.csv");
    CHECK(text.find("k0,omega,inv_tau,gamma_numeric,gamma_analytic,asterisk_flag") !=
          std::string::npos);
    // Two data rows follow five metadata lines and the column header.
    CHECK(std::count(text.begin(), text.end(), '\n') == 8);
}

TEST_CASE("interferometer experiment") {
    const fs::path dir = scratch_dir("ifm");
    const std::string cfg_path = write_file(dir, "ifm.cfg", kInterferometerCfg);
    const ParsedExperiment exp = load_experiment(cfg_path);
    const auto rows = run_interferometer(exp);
    REQUIRE(rows.size() == 7);
    // Linearity in dk along the sweep.
    const double ratio = rows.back().dphi / rows.front().dphi;
    CHECK(ratio == doctest::Approx(1e4 / 1e1).epsilon(1e-9));

    RunOptions opts;
    opts.output_root = dir / "out";
    const RunOutcome outcome = run_experiment(cfg_path, opts);
    CHECK(fs::exists(outcome.out_dir / "interferometer.csv"));
}

TEST_CASE("compare aligns runs and reports ratios") {
    const fs::path dir = scratch_dir("compare");
    auto write_lines = [&](const fs::path& sub, const char* kind, double width) {
        fs::create_directories(dir / sub);
        std::ofstream out(dir / sub / "lines.csv");
        out << "# kind = " << kind << "\n";
        out << "t,center,fwhm_k,fwhm_E,method,residual\n";
        for (int i = 0; i < 4; ++i)
            out << 0.01 * i << ",1e6," << width << "," << width * 2 << ",direct-fwhm,0\n";
    };
    write_lines("a", "gpe", 10.0);
    write_lines("b", "gpe", 10.0);

    SUBCASE("identical runs give ratio exactly 1") {
        const CompareOutcome res = compare_runs(dir / "a", dir / "b", dir / "report");
        CHECK(res.aligned_rows == 4);
        CHECK(res.final_ratio == 1.0);
        CHECK(fs::exists(res.report_path));
    }
    SUBCASE("mismatched kinds raise an alignment error") {
        write_lines("c", "weak-sweep", 5.0);
        CHECK_THROWS_WITH_AS(compare_runs(dir / "a", dir / "c", dir / "report2"),
                             doctest::Contains("alignment"), ConfigError);
    }
    SUBCASE("mismatched schedules raise an alignment error") {
        fs::create_directories(dir / "d");
        std::ofstream out(dir / "d" / "lines.csv");
        out << "# kind = gpe\n";
        out << "t,center,fwhm_k,fwhm_E,method,residual\n";
        out << "0.0,1e6,10,20,direct-fwhm,0\n";
        out.close();
        CHECK_THROWS_WITH_AS(compare_runs(dir / "a", dir / "d", dir / "report3"),
                             doctest::Contains("alignment"), ConfigError);
    }
}

TEST_CASE("experiment listing") {
    const fs::path dir = scratch_dir("list");
    write_file(dir, "one.cfg", kModesCfg);
    write_file(dir, "two.cfg", kInterferometerCfg);
    write_file(dir, "junk.txt", "not a config");
    const auto infos = list_experiments(dir);
    REQUIRE(infos.size() == 2);
    CHECK(infos[0].kind == "modes");
    CHECK(infos[1].kind == "interferometer");
}
