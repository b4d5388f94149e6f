// pcconf — batch pipeline driver.
//
//   pcconf <command> [--config FILE] [--seed N] [--threads N] [--out DIR]
//                    [section.key=value ...]
//
// Commands: simulate, pairscore, train, eval-covariate, eval-fusion, rank,
// report. Output directory resolution: --out, then an explicit run.out from
// the config, then $PCCONF_OUT, then "./out". Errors print one JSON line on
// stderr; exit 1 = bad config, 2 = missing prerequisite, 3 = numerical.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcconf/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string seed;
    std::string threads;
    std::string out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "config file (flat section.key = value)");
    sub->add_option("--seed", args.seed, "override run.seed");
    sub->add_option("--threads", args.threads, "override run.threads");
    sub->add_option("--out", args.out, "output directory for run artifacts");
    sub->allow_extras();
}

int fail(const char* kind, const std::string& message, int code) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"predictive-confidence pipeline over a synthetic recognizability world"};
    app.set_version_flag("--version", pcconf::kToolVersion);
    app.require_subcommand(1);

    using Command = void (*)(const pcconf::RunConfig&, const std::filesystem::path&);
    static const std::pair<const char*, Command> kCommands[] = {
        {"simulate", pcconf::cmd_simulate},       {"pairscore", pcconf::cmd_pairscore},
        {"train", pcconf::cmd_train},             {"eval-covariate", pcconf::cmd_eval_covariate},
        {"eval-fusion", pcconf::cmd_eval_fusion}, {"rank", pcconf::cmd_rank},
        {"report", pcconf::cmd_report},
    };
    static const char* kDescriptions[] = {
        "generate the synthetic embedding world and its evaluation split",
        "fit per-fold recognizers and score all mated pairs",
        "train the confidence model on the pair corpus",
        "pairwise verification: reject curves, confidence bins, rank correlation",
        "set-based verification with uniform / learned / oracle weighting",
        "rank evaluation images by predicted confidence",
        "render tables from the evaluation artifacts",
    };

    CommonArgs args;
    for (std::size_t i = 0; i < std::size(kCommands); ++i)
        add_common(app.add_subcommand(kCommands[i].first, kDescriptions[i]), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        std::ostringstream devnull;
        app.exit(e, devnull, devnull);
        return fail("config", e.what(), 1);
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        std::vector<std::string> overrides = sub->remaining();
        if (!args.seed.empty()) overrides.push_back("run.seed=" + args.seed);
        if (!args.threads.empty()) overrides.push_back("run.threads=" + args.threads);

        std::string file_text;
        std::string source = "<defaults>";
        if (!args.config_path.empty()) {
            std::ifstream in(args.config_path);
            if (!in) throw pcconf::ConfigError("cannot open config file: " + args.config_path);
            std::ostringstream buf;
            buf << in.rdbuf();
            file_text = buf.str();
            source = args.config_path;
        }
        pcconf::RunConfig cfg = pcconf::load_config(file_text, source, overrides);

        std::filesystem::path out_dir;
        if (!args.out.empty()) {
            out_dir = args.out;
            cfg.out_dir = args.out; // manifest snapshot shows the effective dir
            cfg.out_dir_explicit = true;
        } else if (cfg.out_dir_explicit) {
            out_dir = cfg.out_dir;
        } else if (const char* env = std::getenv("PCCONF_OUT"); env && *env) {
            out_dir = env;
            cfg.out_dir = env;
        } else {
            out_dir = cfg.out_dir;
        }
        std::filesystem::create_directories(out_dir);

        for (const auto& [name, fn] : kCommands)
            if (sub->get_name() == name) {
                fn(cfg, out_dir);
                return 0;
            }
        throw pcconf::ConfigError("unknown command: " + sub->get_name());
    } catch (const pcconf::ConfigError& e) {
        return fail("config", e.what(), 1);
    } catch (const std::invalid_argument& e) {
        return fail("config", e.what(), 1);
    } catch (const pcconf::MissingArtifactError& e) {
        return fail("missing-artifact", e.what(), 2);
    } catch (const pcconf::NumericalError& e) {
        return fail("numerical", e.what(), 3);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 3);
    }
}
