#pragma once

#include "leakhmm/hmm.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace leakhmm::trainer {

// Encoded observation sequences (output indices), one record per shot.
using Dataset = std::vector<std::vector<int>>;

struct FitOptions {
    int restarts = 15;
    int batch_size = 15000;          // records per likelihood evaluation
    int max_iterations = 200;
    double gradient_tolerance = 1e-6; // projected infinity norm, mean-NLL scale
    std::uint64_t seed = 1;
    double init_low = 1e-3;          // log-uniform restart initialization range
    double init_high = 0.3;
    int workers = 0;                 // 0: LEAKHMM_WORKERS, else hardware
};

struct RestartResult {
    int index = 0;
    std::vector<double> initial;     // full parameter vector at the start
    std::vector<double> final_params;
    double log_likelihood = 0.0;     // full-dataset total at the final point
    double batch_objective = 0.0;    // mean NLL per record on the restart's batch
    int iterations = 0;
    bool converged = false;
    bool rejected = false;
    std::string note;                // rejection reason, empty otherwise
};

struct FitReport {
    hmm::HmmSpec spec;               // input spec with fitted parameter values
    std::vector<RestartResult> restarts;
    int best_restart = -1;
    int rejected_count = 0;
    double total_log_likelihood = 0.0;
    double aic = 0.0;
    // Projected gradient of the optimized objective (mean NLL over the best
    // restart's batch) at the returned parameters; components pinned at a
    // bound and pushing outward count as zero.
    double gradient_norm = 0.0;
    std::uint64_t dataset_fingerprint = 0;
    std::size_t n_records = 0;
};

// FNV-1a over record lengths and symbols; used to refuse cross-dataset
// model comparisons.
std::uint64_t dataset_fingerprint(const Dataset& data);

// Total log P(data | spec) over all records; deterministic pairwise-block
// reduction, independent of the worker count.
double total_log_likelihood(const hmm::HmmSpec& spec, const Dataset& data, int workers = 0);

// 2 * n_free - 2 * total log-likelihood.  Meaningful when spec is at its
// fitted optimum for this dataset (caller's responsibility); lower wins.
double aic(const hmm::HmmSpec& spec, const Dataset& data, int workers = 0);

// Multi-restart maximum likelihood.  Restart 0 starts from the spec's own
// parameter values, later restarts draw log-uniformly from the init range.
// Each restart optimizes mean NLL over its own seeded subsample (trust-region
// Newton with conjugate-gradient subproblems, parameters mapped through a
// sigmoid onto their admissible box); the report re-evaluates every kept
// restart on the full dataset and returns the best.
FitReport fit(const hmm::HmmSpec& spec, const Dataset& data, const FitOptions& opts = {});

// A(b) - A(a); positive prefers a.  Throws SpecError when the reports were
// fitted on different datasets.
double compare_models(const FitReport& a, const FitReport& b);

} // namespace leakhmm::trainer
