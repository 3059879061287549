#include "commands.hpp"

#include "spva/error.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace spva::cli;

    CLI::App app{"Shape-prior variational non-rigid structure from motion"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_file;
    std::vector<std::string> overrides;
    bool dump = false;
    app.add_option("-c,--config", config_file, "JSON run configuration");
    app.add_option("-s,--set", overrides, "Override a leaf key, e.g. solver.gamma=1e3")
        ->allow_extra_args(false);
    app.add_flag("--dump-config", dump, "Print the resolved configuration and exit");

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&);
    };
    const Command commands[] = {
        {"synth", "Generate a synthetic sheet scene with an occluder", cmd_synth},
        {"occlusion", "Occlusion tensor, total intensity and clean window from frames and flows", cmd_occlusion},
        {"prior", "Shape prior from the clean window", cmd_prior},
        {"solve", "Reconstruct shapes and cameras", cmd_solve},
        {"eval", "Mean RMS error against a reference", cmd_eval},
        {"bench", "Run the synthetic benchmark", cmd_bench},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const Command& c : commands)
        subs.emplace_back(app.add_subcommand(c.name, c.help), &c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(spva::ErrorKind::validation);
    }

    try {
        apply_thread_override();
        const RunConfig config = load_config(config_file, overrides);
        if (dump) {
            std::cout << to_json(config).dump(2) << "\n";
            return 0;
        }
        for (const auto& [sub, cmd] : subs)
            if (sub->parsed())
                return cmd->run(config);
    } catch (const spva::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(spva::ErrorKind::format);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
