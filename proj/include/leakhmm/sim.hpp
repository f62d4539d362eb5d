#pragma once

#include "leakhmm/models.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace leakhmm::sim {

// Per-round probabilities.  Pauli rates are per data qubit; leak/seep rates
// are per qubit.  ancilla_flip is indexed by (previous level)*2 + (level the
// ideal update expects), matching the ancilla detection models.
struct Rates {
    double data_x = 0.015;
    double data_y = 0.010;
    double data_z = 0.012;
    std::array<double, 4> ancilla_flip{0.028, 0.028, 0.028, 0.028};
    double readout_flip = 0.010;
    double data_leak = 0.0032;
    double data_seep = 0.108;
    double anc_leak = 0.0040;
    double anc_seep = 0.101;
};

struct ExperimentConfig {
    models::Protocol protocol = models::Protocol::zz;
    int rounds = 25;
    long shots = 10000;
    std::uint64_t seed = 1;
    Rates rates;
    bool echo_enabled = true;
};

// Protocol-appropriate default rates (the ZZXX ancilla flip is strongly
// asymmetric, the ZZ one is not).
ExperimentConfig default_config(models::Protocol protocol);

void validate(const ExperimentConfig& config); // throws SpecError

struct ShotRecord {
    models::Protocol protocol = models::Protocol::zz;
    std::vector<int> m_a;          // reported check outcomes, +1/-1
    std::vector<bool> dh_leaked;   // truth: leaked during round m's check
    std::vector<bool> dl_leaked;
    std::vector<bool> anc_leaked;
    int frame_x = 1;               // final X(x)X eigenvalue relative to the declared frame
    int frame_z = 1;
    bool depolarized = false;      // any qubit leaked at the final round
    int first_projection = 1;      // true Z-parity projected by the first check
};

// Debug hooks: force a leak (and optionally the recovery) at a fixed round,
// bypassing the random draws.  Data hooks act on qubit DH.
struct ForcedEvents {
    int data_leak_round = -1;
    int data_seep_round = -1;
    int anc_leak_round = -1;
    int anc_seep_round = -1;
};

ShotRecord simulate_run(const ExperimentConfig& config, std::uint64_t seed,
                        const ForcedEvents& forced = {});

// Shot i uses the stream (config.seed, i), so the dataset is identical for
// any worker count.
std::vector<ShotRecord> simulate_shots(const ExperimentConfig& config, int workers = 0);

struct DatasetSummary {
    long shots = 0;
    std::vector<double> data_leak_fraction; // per round: either data qubit leaked
    std::vector<double> anc_leak_fraction;
    double even_projection_fraction = 0.0;  // reported m_a[0] == +1
    double depolarized_fraction = 0.0;
};

DatasetSummary summarize(const std::vector<ShotRecord>& records);

// Bell pair idling under data Pauli errors only; entry m holds the
// correlator after m rounds, with <YY> = -<x z> per shot.
struct IdlingCurve {
    std::vector<double> xx;
    std::vector<double> zz;
    std::vector<double> yy;
};

IdlingCurve simulate_idling(const ExperimentConfig& config, int workers = 0);

// Toy leakage-onset study: one qubit leaks at round 1 with probability
// p_leak (or never); n_a neighboring checks err at rate p when unleaked and
// are fair coins when leaked.  The exact two-hypothesis filter yields a
// leaked-shot log-odds that falls linearly at rate
// lambda = n_a * log(1 / (2 sqrt(p (1-p)))), the decay constant of the
// analytic envelope amplitude * exp(-lambda m).
struct OnsetToy {
    std::vector<double> mean_log_odds; // over leaked shots, entry m = after m rounds
    std::vector<double> mean_l;        // mean computational likelihood, leaked shots
    std::vector<double> analytic;      // amplitude * exp(-lambda m)
    double lambda = 0.0;
    double amplitude = 0.0;            // (1 - p_leak) / p_leak
    double fitted_slope = 0.0;         // least-squares slope of mean_log_odds vs m
    long leaked_shots = 0;
};

OnsetToy leakage_onset_toy(double p, int n_a, double p_leak, int rounds, long shots,
                           std::uint64_t seed);

} // namespace leakhmm::sim
