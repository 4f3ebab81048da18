#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ikc/data.hpp"
#include "ikc/errors.hpp"
#include "ikc/experiments.hpp"
#include "ikc/rng.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Born-rule coherent aggregation for binary classification: "
                 "experiment harness"};
    app.require_subcommand(1);

    // run ------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run an experiment (e1..e5)");
    std::string experiment, config_path, out_dir, dataset, data_path,
        schema_path, external_preds;
    std::size_t n_seeds = 0, budget = 0;
    std::uint64_t base_seed = 0;
    bool have_base_seed = false;
    run->add_option("--experiment", experiment, "e1|e2|e3|e4|e5");
    run->add_option("--config", config_path, "key=value config file");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--dataset", dataset, "xor|adult|bank");
    run->add_option("--data-path", data_path, "tabular CSV path");
    run->add_option("--schema", schema_path, "schema file (overrides builtin)");
    run->add_option("--external-preds", external_preds,
                    "row_id,p1 CSV of external baseline predictions");
    run->add_option("--seeds", n_seeds, "number of seeds");
    run->add_option("--budget", budget, "HPO trials per model");
    run->add_option("--base-seed", base_seed, "master seed")
        ->each([&](const std::string&) { have_base_seed = true; });

    // report ---------------------------------------------------------------
    auto* report = app.add_subcommand(
        "report", "Regenerate stats tables from an existing result bundle");
    std::string report_dir;
    bool holm = false, p_all = false;
    report->add_option("--in", report_dir, "bundle directory")->required();
    report->add_flag("--holm", holm, "Holm-Bonferroni across noise levels");
    report->add_flag("--p-all", p_all, "sign-flip p for every metric");

    // export-matrix ---------------------------------------------------------
    auto* exp = app.add_subcommand(
        "export-matrix",
        "Write the processed feature matrix (row_id,f1..fd,label) for one seed");
    std::string exp_dataset = "xor", exp_data_path, exp_schema, exp_out;
    std::size_t exp_seed = 0, exp_xor_n = 20000;
    std::uint64_t exp_base_seed = 1;
    exp->add_option("--dataset", exp_dataset, "xor|adult|bank")->required();
    exp->add_option("--data-path", exp_data_path, "tabular CSV path");
    exp->add_option("--schema", exp_schema, "schema file");
    exp->add_option("--seed", exp_seed, "seed index (selects the split)");
    exp->add_option("--base-seed", exp_base_seed, "master seed");
    exp->add_option("--xor-n", exp_xor_n, "rows for the xor generator");
    exp->add_option("--out", exp_out, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ikc::ExperimentConfig cfg;
            if (!config_path.empty()) {
                cfg = ikc::load_config_file(config_path);
                if (!experiment.empty() && experiment != cfg.experiment)
                    throw ikc::Error("--experiment disagrees with config file");
            } else {
                if (experiment.empty())
                    throw ikc::Error("need --experiment or --config");
                cfg = ikc::default_config(experiment,
                                          dataset.empty() ? "xor" : dataset);
            }
            if (!dataset.empty()) cfg.dataset = dataset;
            if (!data_path.empty()) cfg.data_path = data_path;
            if (!schema_path.empty()) cfg.schema_path = schema_path;
            if (!external_preds.empty()) cfg.external_preds = external_preds;
            if (n_seeds > 0) cfg.n_seeds = n_seeds;
            if (budget > 0) cfg.hpo.budget = budget;
            if (have_base_seed) cfg.base_seed = base_seed;
            cfg.out_dir = out_dir;
            ikc::run_experiment(cfg);
            std::cout << "wrote bundle to " << out_dir << "\n";
        } else if (*report) {
            ikc::regenerate_report(report_dir, holm, p_all);
            std::cout << "regenerated report in " << report_dir << "\n";
        } else if (*exp) {
            ikc::Dataset full;
            if (exp_dataset == "xor") {
                full = ikc::gen_xor(exp_xor_n,
                                    ikc::experiment_data_seed(exp_base_seed));
            } else {
                const ikc::Schema schema =
                    exp_schema.empty() ? ikc::Schema::by_name(exp_dataset)
                                       : ikc::Schema::from_file(exp_schema);
                if (exp_data_path.empty())
                    throw ikc::Error("export-matrix: --data-path required");
                const ikc::SplitSpec spec =
                    ikc::experiment_split_spec(exp_base_seed, exp_seed);
                full = ikc::load_tabular(exp_data_path, schema, spec).full;
            }
            std::ofstream os(exp_out);
            if (!os) throw ikc::Error("cannot write " + exp_out);
            ikc::write_processed_csv(os, full);
            std::cout << "wrote " << exp_out << " (" << full.n() << " rows, "
                      << full.d() << " features)\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
