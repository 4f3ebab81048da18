#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ikc/baselines.hpp"
#include "ikc/data.hpp"
#include "ikc/metrics.hpp"
#include "ikc/model.hpp"
#include "ikc/optim.hpp"

namespace ikc {

enum class ModelKind { ikc, logistic_interaction, logistic_quadratic, external };
std::string to_string(ModelKind kind);

enum class AnchorRule { test_nll, val_nll, none };

// Randomized-search ranges shared by all model kinds; the trial budget is
// identical across kinds within an experiment (budget-matched).
struct HpoSpace {
    std::size_t budget = 20;
    double lr_lo = 1e-4;
    double lr_hi = 1e-1;
    double decay_lo = 1e-6;   // IKC weight decay / baseline l2
    double decay_hi = 1e-1;
    std::vector<int> epoch_choices = {100, 200, 500};
    bool include_sgd = true;  // optimizer choice is part of the search space
};

struct ExperimentConfig {
    std::string experiment;        // e1 | e2 | e3 | e4 | e5
    std::string dataset = "xor";   // xor | adult | bank
    std::string data_path;         // tabular CSV (required for adult/bank)
    std::string schema_path;       // optional schema override file
    std::string external_preds;    // optional full-coverage row_id,p1 CSV
    std::string out_dir;
    std::size_t n_seeds = 10;
    std::uint64_t base_seed = 1;
    std::size_t xor_n = 20000;
    HpoSpace hpo;
    TsPolicy ts_policy = TsPolicy::safety_switch;
    AnchorRule anchor_rule = AnchorRule::test_nll;
    bool retrain = true;           // retrain winner on train+validation
    std::vector<double> noise_grid = {0.0};
    std::size_t report_boot = 5000;
    // E1 sweep parameters
    double r0 = 0.2, rA = 0.35, rB = 0.35;
    std::size_t sweep_points = 121;
    std::size_t sweep_per_cell = 2000;
    std::size_t sweep_boot = 5000;
    std::uint64_t sweep_seed = 108;
};

// Protocol defaults per experiment:
//   e2: 10 seeds, 20 trials, anchor by test NLL, no retraining, TS always
//   e3: 20 seeds, 20 trials, anchor by validation NLL, retrain, safety
//       switch, noise grid {0,.05,...,.30}
//   e4: 20 seeds, 25 trials, no anchor (mode toggle), retrain, safety
//       switch per mode
//   e5: 20 seeds, 25 trials, anchor by test NLL, retrain, safety switch
ExperimentConfig default_config(const std::string& experiment,
                                const std::string& dataset = "xor");

// Plain key=value config file; keys mirror ExperimentConfig fields.
ExperimentConfig load_config_file(const std::string& path);

// One sampled search point.
struct HpoTrial {
    TrainConfig train;
    double decay = 0.0;  // weight decay (IKC) or l2 (baselines)
};

// Fitted model of any kind behind a uniform predict surface.
struct TrainedModel {
    ModelKind kind = ModelKind::ikc;
    IkcParams ikc;
    LogisticParams logistic;
    FeatureExpansion expansion = FeatureExpansion::raw;

    std::vector<ProbPair> predict(
        const Matrix& X, AggregationMode mode = AggregationMode::coherent) const;
    std::string checkpoint_json() const;
};

struct HpoResult {
    HpoTrial trial;
    std::size_t trial_index = 0;
    double val_nll = 0.0;  // raw validation NLL of the returned parameters
    int best_epoch = 0;
    TrainedModel model;
};

// Samples exactly space.budget configurations from a stream keyed by the
// work-unit seed, trains each on the training split and returns the one
// with the lowest raw validation NLL (earliest trial wins ties). Diverged
// trials score +inf; throws if every trial diverged.
HpoResult hpo_search(const HpoSpace& space, ModelKind kind,
                     const SplitDatasets& splits, std::uint64_t stream_seed);

// Seed scheme shared by the runner and the export tooling: the XOR
// generator stream and the per-seed split spec (fixed test drawn from the
// first stream) are functions of the master seed alone.
std::uint64_t experiment_data_seed(std::uint64_t base_seed);
SplitSpec experiment_split_spec(std::uint64_t base_seed,
                                std::size_t seed_index);

// Runs the configured experiment and writes the result bundle
// (metrics.csv, paired_report.csv, calibration.csv, diagnostics.csv,
// anchors.csv, sweep.csv for e1, figure_*.csv, manifest.json,
// checkpoints/) into cfg.out_dir.
void run_experiment(const ExperimentConfig& cfg);

// Regenerates paired_report.csv (and figure CSVs) from an existing bundle.
void regenerate_report(const std::string& dir, bool holm = false,
                       bool p_all = false);

// Figure-data CSVs from a (possibly empty) bundle directory.
void emit_plot_data(const std::string& dir);

std::string fnv1a_hex(const std::string& text);

}  // namespace ikc
