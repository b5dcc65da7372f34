#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "sadvi/sampling.hpp"

namespace sadvi {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every hyperparameter of a run, parseable from a declarative text config
// ("key = value" lines, optional [section] headers, '#' comments). Unknown
// keys are rejected. Defaults reproduce the benchmark setup: 1024 samples,
// batches of 32, 40 epochs, 20 replicates, cubic splines with H = 6
// interior knots (9 for the mixture case).
struct RunConfig {
    // [case]
    int case_id = 1;
    int case_n = 1024;
    bool case5_as_variance = true;

    // [spline]  (h = 0 resolves per case: 6 for cases 1-4, 9 for case 5)
    int spline_h = 0;
    int spline_degree = 3;

    // [latent]
    int latent_j = 1;

    // [train]
    int train_epochs = 40;
    int train_batch = 32;
    int train_replicates = 20;
    int train_jobs = 0;  // 0 = hardware concurrency

    // [seed]
    std::uint64_t seed_base = 1;

    // [anneal]
    AnnealKind anneal_kind = AnnealKind::exponential;
    double anneal_lambda0 = 1.0;
    double anneal_lambda1 = 0.05;
    double anneal_rate = 4.0;

    // [obj]
    int obj_t = 10;
    double obj_lambda = 1e-4;
    double obj_kappa = 0.0;

    // [baseline]
    std::string baseline_kind = "truncated-gaussian";

    // [opt]
    double opt_lr = 0.01;
    double opt_decay = 0.95;  // per-epoch learning-rate multiplier

    // [net]
    int net_hidden = 20;
    std::uint64_t net_seed = 0;  // 0 = derive from the replicate seed

    // [mh]
    int mh_burn_in = 50;
    int mh_thin = 5;

    // [eval]
    int eval_grid_n = 4096;

    static RunConfig parse(const std::string& text);
    static RunConfig parse_file(const std::string& path);

    // Canonical form: every key in a fixed order; parse(serialize()) is the
    // identity on resolved configs.
    std::string serialize() const;

    // Materializes the per-case defaults (spline_h) and validates ranges.
    RunConfig resolved() const;

    AnnealingSchedule annealing() const;

    // FNV-1a over the serialized canonical form.
    std::string content_hash() const;
};

}  // namespace sadvi
