#pragma once

#include "leakhmm/hmm.hpp"
#include "leakhmm/models.hpp"
#include "leakhmm/sim.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace leakhmm::analysis {

// Rejects a record when the model's computational likelihood over its
// trailing window falls below `threshold`; ties are kept.
struct Mitigation {
    models::ModelId model = models::ModelId::simple_zz_d;
    hmm::HmmSpec spec;
    double threshold = 0.0;
};

struct DecodeStrategy {
    // first: declare parities from the opening outcomes and never revise.
    // final: re-declare from the last two (ZZ) or three (ZZXX) outcomes.
    // no_error: keep the opening declaration but accept only runs whose
    // syndrome never fired.
    enum class Kind { first, final, no_error };
    Kind kind = Kind::final;
    std::vector<Mitigation> mitigation;
};

DecodeStrategy::Kind strategy_from_string(const std::string& name);
std::string to_string(DecodeStrategy::Kind kind);

struct Decoded {
    bool accepted = true;
    // Corrections are relative to the record's declared frame: a z-flip
    // negates the z-comparison target, an x-flip the x one.
    bool flip_x = false;
    bool flip_z = false;
};

Decoded decode(const sim::ShotRecord& record, const DecodeStrategy& strategy);

struct CurvePoint {
    int rounds = 0;
    long shots = 0;
    long accepted = 0;
    double f_post = 1.0;
    double xx = 0.0, yy = 0.0, zz = 0.0, fidelity = 0.0;
    double sem_xx = 0.0, sem_yy = 0.0, sem_zz = 0.0, sem_fidelity = 0.0;
};

// Each group holds independently simulated runs of one length; depolarized
// shots contribute zero to every correlator but still count as accepted.
// Throws when a group is empty, mixes lengths or protocols, or ends up with
// zero accepted shots.
std::vector<CurvePoint> curves(const std::vector<std::vector<sim::ShotRecord>>& groups,
                               const DecodeStrategy& strategy, int workers = 0);

struct DecayFit {
    double amplitude = 0.0;
    double upsilon = 0.0;   // decay constant in rounds, always > 0
    double offset = 0.0;
    double se_amplitude = 0.0;
    double se_upsilon = 0.0;
    double se_offset = 0.0;
    bool converged = false;
    bool unidentifiable = false;   // flat data: amplitude ~ 0, upsilon meaningless
    double rss = 0.0;
    int iterations = 0;
};

// Least squares for y = a * exp(-m / upsilon) + b with standard errors from
// the fit covariance.  Needs at least 4 points.
DecayFit fit_decay(std::span<const double> rounds, std::span<const double> values);

// Weighted straight-line fit with known per-point sigmas; used for flatness
// checks (|slope| <= 2 * se_slope).
struct LineFit {
    double intercept = 0.0, slope = 0.0;
    double se_intercept = 0.0, se_slope = 0.0;
};
LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma);

// Computational likelihood of every record under the model.
std::vector<double> comp_scores(const std::vector<sim::ShotRecord>& records,
                                const hmm::HmmSpec& spec, models::ModelId id, int workers = 0);

// Ground truth for detection: the tracked qubit (either data qubit for data
// models, the ancilla otherwise) was leaked during any of the model's
// trailing window rounds.
bool truth_leaked(const sim::ShotRecord& record, models::ModelId id);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};
struct RocCurve {
    std::vector<RocPoint> points;   // staircase from (0,0) to (1,1)
    double auc = 0.0;
};

// Classifier: flag leakage when score < threshold.  Sweeps all observed
// scores; requires both classes to be present.
RocCurve roc_from_scores(std::span<const double> scores, const std::vector<bool>& positive);
RocCurve roc(const std::vector<sim::ShotRecord>& records, const hmm::HmmSpec& spec,
             models::ModelId id, int workers = 0);

struct ThresholdChoice {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

// Smallest threshold whose true-positive rate reaches `target_tpr` on the
// labeled tuning set.  Tune on a split disjoint from the evaluation data.
ThresholdChoice tune_threshold(const std::vector<sim::ShotRecord>& tuning,
                               const hmm::HmmSpec& spec, models::ModelId id, double target_tpr,
                               int workers = 0);

struct Postselected {
    std::vector<sim::ShotRecord> kept;
    double f_post = 1.0;
};

// Drops every record scoring below threshold for any mitigation entry.
Postselected postselect(const std::vector<sim::ShotRecord>& records,
                        const std::vector<Mitigation>& mitigation, int workers = 0);

struct CalibrationBin {
    double lo = 0.0, hi = 0.0;
    long n_exp = 0;
    long n_model = 0;
    long n_unleaked = 0;
    double mean_score = 0.0;      // mean score of the experimental shots in the bin
    double unleaked_frac = 0.0;   // NaN when the bin holds no experimental shots
    bool empty = true;
};
struct CalibrationTable {
    std::vector<CalibrationBin> bins;
    // total-variation distance between the normalized experimental and
    // model-sampled score histograms
    double total_variation = 0.0;
};

// Core binning: `exp_scores`/`exp_unleaked` describe the dataset under test,
// `model_scores` the reference histogram sampled from the model itself.
// A well-calibrated model has unleaked_frac tracking mean_score bin by bin.
CalibrationTable calibration_from_scores(std::span<const double> exp_scores,
                                         const std::vector<bool>& exp_unleaked,
                                         std::span<const double> model_scores, int bins);

// Bins records by computational likelihood and overlays a same-size dataset
// sampled from the model itself (seeded per record for determinism).
CalibrationTable calibration(const std::vector<sim::ShotRecord>& records,
                             const hmm::HmmSpec& spec, models::ModelId id, int bins,
                             std::uint64_t model_seed = 1, int workers = 0);

} // namespace leakhmm::analysis
