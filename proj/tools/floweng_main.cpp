#include "floweng/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

namespace {

nlohmann::json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw floweng::ConfigError("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw floweng::ConfigError(std::string("config is not valid JSON: ") + err.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"floweng: effective Hamiltonians for two-frequency drives"};
    app.require_subcommand(1);

    std::string run_path, validate_path;
    CLI::App* cmd_run = app.add_subcommand("run", "validate a config, run it, write artifacts");
    cmd_run->add_option("config", run_path, "JSON config file")->required();
    CLI::App* cmd_validate =
        app.add_subcommand("validate", "check a config and print the resolved form");
    cmd_validate->add_option("config", validate_path, "JSON config file")->required();
    CLI::App* cmd_schema = app.add_subcommand("schema", "print the accepted config layout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_schema->parsed()) {
            std::cout << floweng::schema_text();
            return 0;
        }
        if (cmd_validate->parsed()) {
            const auto resolved = floweng::validate_config(load_config(validate_path));
            std::cout << resolved.dump(2) << '\n';
            return 0;
        }
        const auto config = load_config(run_path);
        floweng::validate_config(config);  // fail fast with exit 2 before any work
        const auto outcome = floweng::run_experiment(config);
        std::cout << "wrote " << outcome.output_dir.string() << '\n';
        for (const auto& name : outcome.manifest.at("results").at("outputs"))
            std::cout << "  " << name.get<std::string>() << '\n';
        std::cout << "  manifest.json\n";
        return 0;
    } catch (const floweng::ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    }
}
