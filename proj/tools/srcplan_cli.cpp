// srcplan: command-line driver for the source-planning pipeline.
//
//   srcplan <stage> --config run.conf [--run-dir DIR] [--set key=value ...]
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srcplan/config.hpp"
#include "srcplan/error.hpp"
#include "srcplan/log.hpp"
#include "srcplan/pipeline.hpp"

namespace {

struct Options {
    std::string config_path;
    std::string run_dir;
    std::vector<std::string> overrides;
    std::string headline;
    bool quiet = false;
};

srcplan::RunContext context(const Options& o) {
    srcplan::Config cfg = o.config_path.empty() ? srcplan::Config{} : srcplan::Config::load(o.config_path);
    for (const auto& kv : o.overrides) cfg.set_override(kv);
    if (!o.run_dir.empty()) cfg.set("run_dir", o.run_dir);
    return srcplan::make_run_context(cfg);
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("-c,--config", o.config_path, "Run configuration (key = value lines)");
    cmd->add_option("-r,--run-dir", o.run_dir, "Run directory (overrides run_dir)");
    cmd->add_option("-s,--set", o.overrides, "Override a config key: key=value");
    cmd->add_flag("-q,--quiet", o.quiet, "Suppress progress and warnings");
}

int run(int argc, char** argv) {
    CLI::App app{"Compare source-planning schemata by how well they explain news documents"};
    app.require_subcommand(1);
    Options o;
    std::string chosen;

    for (auto stage : srcplan::stage_names()) {
        std::string name(stage);
        auto* cmd = app.add_subcommand(name, "Run the " + name + " stage");
        add_common(cmd, o);
        if (name == "predict")
            cmd->add_option("--headline", o.headline, "Predict the schema for this headline with a trained predictor");
        cmd->callback([&chosen, name] { chosen = name; });
    }
    auto* all = app.add_subcommand("pipeline", "Run synth (unless corpus is set) and every stage but stm");
    add_common(all, o);
    all->callback([&chosen] { chosen = "pipeline"; });
    auto* keys = app.add_subcommand("config-keys", "List the recognized config keys");
    keys->callback([&chosen] { chosen = "config-keys"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    srcplan::set_quiet(o.quiet);
    if (chosen == "config-keys") {
        for (auto k : srcplan::known_config_keys()) std::cout << k << '\n';
        return 0;
    }
    auto ctx = context(o);
    if (chosen == "pipeline") {
        srcplan::run_pipeline(ctx);
    } else if (chosen == "predict" && !o.headline.empty()) {
        std::cout << srcplan::predict_headline(ctx, o.headline) << '\n';
    } else {
        srcplan::run_stage(chosen, ctx);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const srcplan::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const srcplan::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
