#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "stgnp/cli/commands.hpp"
#include "stgnp/core/malloc_tuning.hpp"

using namespace stgnp;

int main(int argc, char** argv) {
    stgnp::tune_allocator();
    CLI::App app{"stgnp - graph-latent ODE process for spatiotemporal time series"};
    app.require_subcommand(1);

    // generate
    cli::GenerateOpts gen;
    auto* generate = app.add_subcommand("generate", "simulate a benchmark dataset");
    generate->add_option("--system", gen.system, "pendulum | lorenz | kuramoto")->required();
    generate->add_option("--n", gen.n, "number of trajectories");
    generate->add_option("--seed", gen.seed, "generator seed");
    generate->add_option("--out", gen.out, "dataset directory to write")->required();
    generate->add_option("--spring", gen.spring, "pendulum coupling spring constant");
    generate->add_option("--label", gen.label, "assign this class label to every sample");
    generate->add_flag("--lorenz-conventional-y", gen.lorenz_conventional_y,
                       "use the conventional -y term in the Lorenz y-equation");

    // train
    std::string train_config;
    std::vector<std::string> train_overrides;
    bool train_quiet = false;
    auto* tr = app.add_subcommand("train", "train a model from a run configuration file");
    tr->add_option("--config", train_config, "run configuration file")->required();
    tr->add_option("--set", train_overrides, "override config entries: section.key=value");
    tr->add_flag("--quiet", train_quiet, "suppress per-epoch output");

    // eval
    cli::EvalOpts ev;
    auto* evc = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    evc->add_option("--checkpoint", ev.checkpoint, "checkpoint stem (without extension)")
        ->required();
    evc->add_option("--dataset", ev.dataset, "dataset directory")->required();
    evc->add_option("--task", ev.task, "reconstruction | extrapolation");
    evc->add_option("--split", ev.split, "train | val | test | all");
    evc->add_option("--metrics-out", ev.metrics_out, "metrics CSV path");
    evc->add_option("--trajectories-out", ev.trajectories_out, "per-sample trajectory CSV path");
    evc->add_option("--batch-size", ev.batch_size, "evaluation batch size");

    // baselines
    cli::BaselineOpts bl;
    auto* blc = app.add_subcommand("baselines", "classical forecasts on the extrapolation task");
    blc->add_option("--dataset", bl.dataset, "dataset directory")->required();
    blc->add_option("--horizon", bl.horizon, "forecast steps (default: stored horizon)");
    blc->add_option("--split", bl.split, "train | val | test | all");
    blc->add_option("--split-seed", bl.split_seed, "seed of the sample split");
    blc->add_option("--metrics-out", bl.metrics_out, "metrics CSV path");
    blc->add_option("--orders-out", bl.orders_out, "per-series ARIMA order CSV path");

    // export-latents
    cli::ExportLatentsOpts ex;
    auto* exc = app.add_subcommand("export-latents", "write flattened (l0, d0) per sample");
    exc->add_option("--checkpoint", ex.checkpoint, "checkpoint stem")->required();
    exc->add_option("--dataset", ex.dataset, "dataset directory")->required();
    exc->add_option("--out", ex.out, "output CSV path")->required();
    exc->add_option("--split", ex.split, "train | val | test | all");

    // classify
    cli::ClassifyOpts cl;
    auto* clc = app.add_subcommand("classify", "k-NN cross-validation on exported latents");
    clc->add_option("--latents", cl.latents, "latents CSV from export-latents")->required();
    clc->add_option("--k", cl.k, "number of neighbours");
    clc->add_option("--weighting", cl.weighting, "uniform | distance");
    clc->add_option("--p", cl.p_norm, "Minkowski norm order (1 or 2)");
    clc->add_option("--folds", cl.folds, "cross-validation folds");
    clc->add_option("--seed", cl.seed, "fold shuffle seed");
    clc->add_option("--out", cl.out, "accuracy report CSV path");

    // inspect
    std::string inspect_path;
    auto* insp = app.add_subcommand("inspect", "print a dataset manifest");
    insp->add_option("--dataset", inspect_path, "dataset directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (*generate) cli::cmd_generate(gen);
        if (*tr) cli::cmd_train(train_config, train_overrides, train_quiet);
        if (*evc) cli::cmd_eval(ev);
        if (*blc) cli::cmd_baselines(bl);
        if (*exc) cli::cmd_export_latents(ex);
        if (*clc) cli::cmd_classify(cl);
        if (*insp) cli::cmd_inspect(inspect_path);
    } catch (const contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
