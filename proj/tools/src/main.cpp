#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "specstab_cli/run.hpp"

int main(int argc, char** argv) {
    using namespace specstab::cli;

    CLI::App app{"specstab: spectral stability diagnostics for small MLPs"};
    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    std::string names;
    for (const auto& s : subcommands())
        names += (names.empty() ? "" : ", ") + s;
    app.set_version_flag("--version", SPECSTAB_VERSION);
    app.add_option("subcommand", subcommand, "one of: " + names)->required();
    app.add_option("--config", config_path, "INI config or a run manifest to replay");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return validation_failure;
    }

    RunConfig cfg;
    if (!config_path.empty()) {
        try {
            cfg = load_run_config(config_path);
        } catch (const ConfigError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return validation_failure;
        } catch (const std::exception& e) {
            std::cerr << "I/O error: " << e.what() << "\n";
            return io_failure;
        }
    }
    Overrides ov;
    if (*out_opt)
        ov.out_dir = out_dir;
    if (*seed_opt)
        ov.seed = seed;
    if (*threads_opt)
        ov.threads = threads;
    return run(subcommand, std::move(cfg), ov, std::cout, std::cerr);
}
