// Command line front end: run / compare / validate / list-experiments.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "atomlaser/experiment.hpp"
#include "atomlaser/version.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 numerical-guard error, 4 divergence.
constexpr int kConfigExit = 2;
constexpr int kGuardExit = 3;
constexpr int kDivergenceExit = 4;

int report(const char* category, const std::exception& e, int code) {
    std::cerr << "error: " << category << ": " << e.what() << "\n";
    return code;
}

unsigned threads_from_env() {
    const char* raw = std::getenv(atomlaser::kThreadsEnv);
    if (!raw) return 1;
    const long v = std::strtol(raw, nullptr, 10);
    return v > 1 ? static_cast<unsigned>(v) : 1u;
}

std::string output_root_from_env() {
    const char* raw = std::getenv(atomlaser::kOutputRootEnv);
    return raw ? raw : "";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"atom laser linewidth toolkit"};
    app.set_version_flag("--version", std::string(atomlaser::version));
    app.require_subcommand(1);

    std::string config_path;
    std::string output_root = output_root_from_env();
    unsigned threads = threads_from_env();
    bool write_snapshots = false;
    auto* run_cmd = app.add_subcommand("run", "run one experiment config");
    run_cmd->add_option("config", config_path, "experiment config file")->required();
    run_cmd->add_option("--output-root", output_root, "directory that receives the run directory");
    run_cmd->add_option("--threads", threads, "worker threads for independent sweep points");
    run_cmd->add_flag("--snapshots", write_snapshots, "also write binary field snapshots");

    std::string dir_a, dir_b, compare_out = "compare";
    auto* cmp_cmd = app.add_subcommand("compare", "paired comparison of two completed runs");
    cmp_cmd->add_option("run_a", dir_a, "first run directory")->required();
    cmp_cmd->add_option("run_b", dir_b, "second run directory")->required();
    cmp_cmd->add_option("--out", compare_out, "report directory");

    std::string validate_path;
    auto* val_cmd = app.add_subcommand("validate", "check a config without running it");
    val_cmd->add_option("config", validate_path, "experiment config file")->required();

    std::string list_dir = "experiments";
    auto* list_cmd = app.add_subcommand("list-experiments", "list bundled experiment configs");
    list_cmd->add_option("--dir", list_dir, "directory holding .cfg files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            atomlaser::RunOptions opts;
            opts.output_root = output_root;
            opts.threads = threads;
            opts.write_snapshots = write_snapshots;
            const auto outcome = atomlaser::run_experiment(config_path, opts);
            std::cout << "run complete: " << outcome.out_dir.string() << " (kind "
                      << atomlaser::to_string(outcome.kind) << ", config " << outcome.hash_hex
                      << ")\n";
        } else if (cmp_cmd->parsed()) {
            const auto outcome = atomlaser::compare_runs(dir_a, dir_b, compare_out);
            std::cout << "compared " << outcome.aligned_rows
                      << " rows; final width ratio = " << outcome.final_ratio << "\n"
                      << "report: " << outcome.report_path.string() << "\n";
        } else if (val_cmd->parsed()) {
            const auto exp = atomlaser::load_experiment(validate_path);
            std::cout << "valid: kind " << atomlaser::to_string(exp.kind) << ", label "
                      << exp.label << ", config " << exp.hash_hex << "\n";
        } else if (list_cmd->parsed()) {
            for (const auto& info : atomlaser::list_experiments(list_dir))
                std::cout << info.kind << "\t" << info.label << "\t" << info.path.string()
                          << "\n";
        }
    } catch (const atomlaser::ConfigError& e) {
        return report("config", e, kConfigExit);
    } catch (const atomlaser::NumericalGuardError& e) {
        return report("guard", e, kGuardExit);
    } catch (const atomlaser::DivergenceError& e) {
        return report("divergence", e, kDivergenceExit);
    } catch (const std::exception& e) {
        return report("internal", e, 1);
    }
    return 0;
}
