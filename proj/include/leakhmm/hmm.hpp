#pragma once

#include "leakhmm/errors.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace leakhmm::hmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Param {
    std::string name;
    double value = 0.0;
    double lower = 0.0;
    double upper = 1.0;
    bool frozen = false;
};

enum class Side { transition, output };

// One generator per parameter: the assembled matrices are
//   A = A0 + sum_i p_i * D_i   (transition side)
//   B = B0 + sum_i p_i * D_i   (output side)
// Every column of a generator sums to zero, so column stochasticity of the
// base matrices is preserved for any parameter values; entry-wise
// admissibility still has to be checked after assembly.
struct Generator {
    std::string name;
    Side side = Side::transition;
    Matrix d;
};

// Discrete hidden Markov model with linearly parametrized matrices.
// Convention: columns index the previous state, A(h, h') = P(new = h | old = h'),
// B(o, h) = P(obs = o | state = h).  `prior` is the distribution of the hidden
// state at the first observed round.
struct HmmSpec {
    std::string name;
    std::vector<std::string> state_labels;
    std::vector<std::string> output_labels;
    Matrix a0;
    Matrix b0;
    std::vector<Param> params;      // params[i] scales generators[i]
    std::vector<Generator> generators;
    Vector prior;
    std::vector<bool> leaked;       // per-state flag, used by computational likelihoods

    int n_states() const { return static_cast<int>(state_labels.size()); }
    int n_outputs() const { return static_cast<int>(output_labels.size()); }
    int n_free_params() const;
    std::vector<int> free_param_indices() const;

    int param_index(const std::string& name) const;      // -1 if absent
    double param_value(const std::string& name) const;   // throws SpecError if absent
    void set_param(const std::string& name, double value);
    void set_frozen(const std::string& name, bool frozen);
};

struct Assembled {
    Matrix a;
    Matrix b;
};

// Builds A and B at the spec's current parameter values and validates
// admissibility: every parameter within its bounds, every assembled entry in
// [-1e-12, 1+1e-12], every column summing to 1 within 1e-12.  Throws
// SpecError naming the offending entry and the generator contributing most
// to it.
Assembled assemble(const HmmSpec& spec);

// Structural validation independent of parameter values (shapes, column sums
// of base matrices and generators, prior normalization).  Called by assemble.
void validate_structure(const HmmSpec& spec);

struct FilterState {
    int round = 0;              // observations incorporated so far
    Vector posterior;           // at round 0: the prior of the first round
    double log_likelihood = 0.0;
};

FilterState initial_state(const HmmSpec& spec);

// One filtering update.  For round >= 1 the posterior is propagated through A
// first; the step from round 0 applies only the Bayes update, so the prior is
// used directly at the first round.  Observations are output indices.
// Throws NumericError if the normalizer falls below 1e-300.
void forward_step_inplace(const Assembled& m, FilterState& state, int obs);
FilterState forward_step(const HmmSpec& spec, const FilterState& state, int obs);

// Total log P(o_1..o_M) via the normalized forward recursion.
double sequence_log_likelihood(const HmmSpec& spec, std::span<const int> obs);
double sequence_log_likelihood(const Assembled& m, const Vector& prior, std::span<const int> obs);

// Samples (hidden states, observations) of the given length.  Deterministic
// in (spec parameters, seed).
std::pair<std::vector<int>, std::vector<int>>
sample_sequence(const HmmSpec& spec, int length, std::uint64_t seed);

// Log-likelihood with analytic first and second derivatives with respect to
// the non-frozen parameters, in spec order.  Derivatives are propagated
// alongside the normalized forward recursion; the Hessian is exact, not a
// Gauss-Newton surrogate.  Requires every free parameter strictly inside its
// bounds (throws SpecError otherwise: the one-sided derivative at a bound is
// not the quantity any caller wants).
struct Derivatives {
    double log_likelihood = 0.0;
    Vector gradient;            // size = number of free params
    Matrix hessian;             // symmetric, same order
    std::vector<int> free_params; // indices into spec.params
};

Derivatives log_likelihood_derivatives(const HmmSpec& spec, std::span<const int> obs);

// Reusable engine for tight loops (fitting): matrices assembled once,
// workspaces reused across records.
class DerivativeEngine {
  public:
    explicit DerivativeEngine(const HmmSpec& spec);

    // Accumulate nothing; returns the per-sequence result in-place through
    // the out parameters (gradient/hessian sized to free params).
    double evaluate(std::span<const int> obs, Vector* grad, Matrix* hess);

    const std::vector<int>& free_params() const { return free_; }
    const Assembled& matrices() const { return m_; }

  private:
    Assembled m_;
    Vector prior_;
    std::vector<int> free_;
    std::vector<const Matrix*> da_; // per free param, nullptr if not transition side
    std::vector<const Matrix*> db_; // per free param, nullptr if not output side
    // workspaces
    Vector pi_, u_, v_;
    Matrix dpi_, du_, dv_;          // n_states x k
    std::vector<Vector> d2pi_, d2u_, d2v_; // packed upper triangle, k(k+1)/2 entries
};

} // namespace leakhmm::hmm
