#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pamk/errors.hpp"
#include "pamk/experiment.hpp"

namespace {

struct Args {
    std::string config;
    std::string dataset;
    std::string out;
    std::string models_dir;
};

void add_common(CLI::App* sub, Args& args, bool with_dataset, bool with_models) {
    sub->add_option("--config", args.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (default: config output_dir)");
    if (with_dataset)
        sub->add_option("--dataset", args.dataset,
                        "dataset CSV (default: <out>/dataset.csv; sidecar JSON alongside)");
    if (with_models)
        sub->add_option("--models", args.models_dir,
                        "directory holding model files (default: <out>)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pa-modelkit: behavioral modeling of nonlinear power amplifiers at desk scale"};
    app.require_subcommand(1);

    Args args;
    CLI::App* gen = app.add_subcommand("generate", "synthesize an aligned input/output dataset");
    add_common(gen, args, false, false);
    CLI::App* train = app.add_subcommand("train", "train the configured models on the 3:2 split");
    add_common(train, args, true, false);
    CLI::App* eval = app.add_subcommand("evaluate", "evaluate saved models on the test split");
    add_common(eval, args, true, true);
    CLI::App* all = app.add_subcommand("all", "generate, train and evaluate in one run");
    add_common(all, args, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const pamk::experiment::ExperimentConfig cfg = pamk::experiment::load_config(args.config);
        const std::string out = args.out.empty() ? cfg.output_dir : args.out;
        const std::string dataset = args.dataset.empty() ? out + "/dataset.csv" : args.dataset;
        const std::string models_dir = args.models_dir.empty() ? out : args.models_dir;

        if (gen->parsed()) {
            pamk::experiment::cmd_generate(cfg, out, std::cout);
        } else if (train->parsed()) {
            pamk::experiment::cmd_train(cfg, dataset, out, std::cout);
        } else if (eval->parsed()) {
            pamk::experiment::cmd_evaluate(cfg, dataset, models_dir, out, std::cout);
        } else if (all->parsed()) {
            pamk::experiment::cmd_generate(cfg, out, std::cout);
            pamk::experiment::cmd_train(cfg, out + "/dataset.csv", out, std::cout);
            pamk::experiment::cmd_evaluate(cfg, out + "/dataset.csv", out, out, std::cout);
        }
        return 0;
    } catch (const pamk::UnsupportedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const pamk::TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const pamk::PipelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const pamk::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
