#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <thread>

#include "swan/experiment.hpp"

namespace ex = swan::experiment;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw swan::Error("cannot open config '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ex::Config parse(const std::string& text)
{
    std::istringstream in(text);
    return ex::parse_config(in);
}

}  // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("swan"));
    spdlog::cfg::load_env_levels();

    CLI::App app{"SWAN ISAC experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    bool literal = false;

    auto* run = app.add_subcommand("run", "run the sweep described by a config file");
    run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "override [experiment] seed");
    run->add_option("--out", out_path, "output CSV path, '-' for stdout (overrides [experiment] output)");
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--literal-floors", literal, "derive per-slot SNR floors without the 1/K rate factor");

    auto* def = app.add_subcommand("default-config", "print a commented config with every key");

    auto* val = app.add_subcommand("validate", "parse and check a config file");
    val->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (def->parsed())
        {
            std::cout << ex::default_config_text();
            return 0;
        }
        const std::string text = read_file(config_path);
        ex::Config cfg = parse(text);
        if (val->parsed())
        {
            const auto tasks = ex::build_tasks(cfg);
            std::cout << "ok: " << ex::to_string(cfg.kind) << ", " << tasks.size() << " sweep units\n";
            return 0;
        }

        if (seed) cfg.seed = *seed;
        if (literal) cfg.floors = swan::FloorConvention::literal;
        if (!out_path.empty()) cfg.output = out_path;

        const auto t0 = std::chrono::steady_clock::now();
        const ex::Table table = ex::run(cfg, threads);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string csv = table.to_csv();

        if (cfg.output.empty() || cfg.output == "-")
        {
            std::cout << csv;
        }
        else
        {
            std::ofstream out(cfg.output, std::ios::binary);
            if (!out) throw swan::Error("cannot write '" + cfg.output + "'");
            out << csv;
            std::ofstream man(cfg.output + ".manifest.json");
            man << ex::manifest(cfg, text, csv, wall, threads).dump(2) << "\n";
            spdlog::info("wrote {} rows to {} in {:.1f} s", table.rows.size(), cfg.output, wall);
        }
        return 0;
    }
    catch (const swan::Error& e)
    {
        spdlog::error("{}", e.what());
        return 2;
    }
    catch (const std::exception& e)
    {
        spdlog::error("unexpected failure: {}", e.what());
        return 1;
    }
}
