#include <clocale>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bioage/bioage.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (TOML-style or JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides output.dir)");
    cmd->add_option("--seed", args.seed, "RNG seed (overrides numerics.seed)");
    cmd->add_flag("--quiet", args.quiet, "suppress progress and summary output");
}

int run(bioage::Scenario scenario, const CommonArgs& args) {
    bioage::RunSpec spec =
        bioage::parse_config(bioage::read_file(args.config_path), scenario);
    if (!args.out_dir.empty()) spec.out_dir = args.out_dir;
    if (!args.seed.empty()) {
        char* end = nullptr;
        spec.numerics.seed = std::strtoull(args.seed.c_str(), &end, 10);
        if (end == args.seed.c_str() || *end != '\0') {
            std::cerr << "error: --seed must be a nonnegative integer\n";
            return 2;
        }
    }
    spec.quiet = spec.quiet || args.quiet;
    bioage::execute(spec);
    if (!spec.quiet)
        std::cout << scenario_name(scenario) << ": outputs written to " << spec.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");  // decimal formatting must not drift with locale
    CLI::App app{"Biological-age transport model laboratory: stochastic individual-based "
                 "simulation, density PDE solver, and moments cascade, with cross-checks"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        bioage::Scenario scenario;
        CommonArgs args;
        CLI::App* cmd = nullptr;
    };
    Sub subs[] = {
        {"ibm", "individual-based stochastic simulation", bioage::Scenario::Ibm, {}, nullptr},
        {"pde", "density transport solver", bioage::Scenario::Pde, {}, nullptr},
        {"moments", "moments cascade integration", bioage::Scenario::Moments, {}, nullptr},
        {"compare", "cross-validate ibm / pde / moments", bioage::Scenario::Compare, {}, nullptr},
        {"analyze-chi", "moment-rate curve, case classification, k0", bioage::Scenario::AnalyzeChi,
         {}, nullptr},
    };
    for (auto& sub : subs) {
        sub.cmd = app.add_subcommand(sub.name, sub.help);
        add_common(sub.cmd, sub.args);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto& sub : subs) {
            if (sub.cmd->parsed()) return run(sub.scenario, sub.args);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
