#pragma once

#include "leakhmm/hmm.hpp"

#include <span>
#include <string>
#include <vector>

namespace leakhmm::models {

enum class Protocol { zz, zzxx, idling_dd };
enum class Role { data, ancilla };

// The five model families of the library, as eight buildable variants: the
// two-state model per (protocol, role) plus the four detailed models.
enum class ModelId {
    simple_zz_d,
    simple_zz_a,
    simple_zzxx_d,
    simple_zzxx_a,
    zz_d,
    zz_a,
    zzxx_d,
    zzxx_a,
};

std::string to_string(ModelId id);
ModelId model_id_from_string(const std::string& name);
std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& name);

Role role_of(ModelId id);
Protocol protocol_of(ModelId id);
bool is_simple(ModelId id);

// Number of trailing rounds that must be unleaked for the run to count as
// computational: 1 for data/ZZ, 2 for data/ZZXX and ancilla/ZZ, 3 for
// ancilla/ZZXX.
int lcomp_window(ModelId id);

// Builds the model with fitted reference rates as defaults.  Ancilla-model
// p_leak is frozen at 0.0040 per round (calibrated externally in the source
// experiment); callers may unfreeze or override via the spec.
hmm::HmmSpec build_model(ModelId id);

// Freezes all leakage-related parameters at zero, yielding the
// leakage-stripped variant used for model comparison.  Stripped parameters
// stop counting toward AIC complexity.
hmm::HmmSpec strip_leakage(const hmm::HmmSpec& spec, ModelId id);

struct SyndromeSequence {
    Protocol protocol = Protocol::zz;
    int start = 0;              // first defined measurement index m
    std::vector<int> values;    // +-1, values[i] = s_D[start + i]
};

// s_D[m] = M_A[m] * M_A[m-2] for ZZ (defined from m = 2) and the product of
// four consecutive outcomes for ZZXX (defined from m = 3).  Entries of m_a
// must be +-1.  Throws SpecError if the sequence is shorter than the
// protocol minimum (3 for ZZ, 5 for ZZXX).
SyndromeSequence syndrome_from_measurements(Protocol protocol, std::span<const int> m_a);

// Observation index sequence fed to a model for a run with outcomes m_a:
// data-role models observe the syndrome, ancilla-role models observe m_a
// itself; +1 maps to index 0, -1 to index 1.
std::vector<int> encode_observations(ModelId id, std::span<const int> m_a);

// Probability that the tracked qubit was computational over the model's
// trailing window, given all observations: the unleaked posterior mass at the
// final round, extended over the last `window` rounds by constrained
// propagation and normalized by the unconstrained sum.  The window is clipped
// to the sequence length.
double computational_likelihood(const hmm::HmmSpec& spec, int window, std::span<const int> obs);
double computational_likelihood(const hmm::HmmSpec& spec, ModelId id, std::span<const int> obs);

// Same quantity from pre-assembled matrices, for tight loops.
double computational_likelihood(const hmm::Assembled& m, const hmm::Vector& prior,
                                const std::vector<bool>& leaked, int window,
                                std::span<const int> obs);

struct TwoStateRates {
    double p_leak = 0.0;
    double p_seep = 0.0;
    double p01 = 0.0;   // P(error signal | computational)
    double p10 = 0.0;   // P(no error signal | leaked)
};

// Scalar posterior update of the two-state model: obs is the output index
// (0 = no error signal, 1 = error signal).  Equals component 0 of a
// forward_step on the equivalent two-state spec.
inline double online_two_state_update(double post0, int obs, const TwoStateRates& r) {
    const double prior0 = (1.0 - r.p_leak - r.p_seep) * post0 + r.p_seep;
    const double b0 = obs == 0 ? 1.0 - r.p01 : r.p01;       // emission from computational
    const double b1 = obs == 0 ? r.p10 : 1.0 - r.p10;       // emission from leaked
    return prior0 * b0 / (b1 + prior0 * (b0 - b1));
}

// p_leak / (p_leak + p_seep); throws SpecError when both rates vanish.
double steady_state_leakage(double p_leak, double p_seep);

} // namespace leakhmm::models
