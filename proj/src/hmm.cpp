#include "leakhmm/hmm.hpp"

#include "leakhmm/errors.hpp"
#include "leakhmm/rng.hpp"

#include <cmath>
#include <sstream>

namespace leakhmm::hmm {

namespace {

constexpr double kEntryTol = 1e-12;
constexpr double kNormalizerFloor = 1e-300;

int tri_index(int i, int j) { // i <= j, packed upper triangle, column-major
    return j * (j + 1) / 2 + i;
}

std::string offending_generator(const HmmSpec& spec, Side side, int row, int col) {
    // Report the generator with the largest absolute contribution to the
    // offending entry; ties go to the first.
    int best = -1;
    double best_mag = 0.0;
    for (std::size_t i = 0; i < spec.generators.size(); ++i) {
        const auto& g = spec.generators[i];
        if (g.side != side) continue;
        const double c = std::abs(spec.params[i].value * g.d(row, col));
        if (c > best_mag) {
            best_mag = c;
            best = static_cast<int>(i);
        }
    }
    return best >= 0 ? spec.generators[static_cast<std::size_t>(best)].name : "(base matrix)";
}

void check_assembled(const HmmSpec& spec, const Matrix& m, Side side, const char* which) {
    for (int c = 0; c < m.cols(); ++c) {
        double colsum = 0.0;
        for (int r = 0; r < m.rows(); ++r) {
            const double v = m(r, c);
            colsum += v;
            if (v < -kEntryTol || v > 1.0 + kEntryTol) {
                std::ostringstream os;
                os << "invalid parametrization: " << which << "(" << r << "," << c << ") = " << v
                   << " outside [0,1]; dominant generator: " << offending_generator(spec, side, r, c);
                throw SpecError(os.str());
            }
        }
        if (std::abs(colsum - 1.0) > kEntryTol * static_cast<double>(m.rows())) {
            std::ostringstream os;
            os << "invalid parametrization: column " << c << " of " << which << " sums to " << colsum;
            throw SpecError(os.str());
        }
    }
}

} // namespace

int HmmSpec::n_free_params() const {
    int k = 0;
    for (const auto& p : params)
        if (!p.frozen) ++k;
    return k;
}

std::vector<int> HmmSpec::free_param_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i].frozen) out.push_back(static_cast<int>(i));
    return out;
}

int HmmSpec::param_index(const std::string& pname) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == pname) return static_cast<int>(i);
    return -1;
}

double HmmSpec::param_value(const std::string& pname) const {
    const int i = param_index(pname);
    if (i < 0) throw SpecError("unknown parameter: " + pname);
    return params[static_cast<std::size_t>(i)].value;
}

void HmmSpec::set_param(const std::string& pname, double value) {
    const int i = param_index(pname);
    if (i < 0) throw SpecError("unknown parameter: " + pname);
    params[static_cast<std::size_t>(i)].value = value;
}

void HmmSpec::set_frozen(const std::string& pname, bool frozen) {
    const int i = param_index(pname);
    if (i < 0) throw SpecError("unknown parameter: " + pname);
    params[static_cast<std::size_t>(i)].frozen = frozen;
}

void validate_structure(const HmmSpec& spec) {
    const int n = spec.n_states();
    const int no = spec.n_outputs();
    if (n <= 0 || no <= 0) throw SpecError("model must have at least one state and one output");
    if (spec.a0.rows() != n || spec.a0.cols() != n) throw SpecError("A0 shape mismatch");
    if (spec.b0.rows() != no || spec.b0.cols() != n) throw SpecError("B0 shape mismatch");
    if (spec.prior.size() != n) throw SpecError("prior length mismatch");
    if (spec.leaked.size() != static_cast<std::size_t>(n)) throw SpecError("leaked mask length mismatch");
    if (spec.params.size() != spec.generators.size())
        throw SpecError("params and generators must pair one to one");
    if (std::abs(spec.prior.sum() - 1.0) > 1e-9 || spec.prior.minCoeff() < -kEntryTol)
        throw SpecError("prior is not a probability vector");
    if (std::find(spec.leaked.begin(), spec.leaked.end(), false) == spec.leaked.end())
        throw SpecError("leaked mask marks every state leaked");
    for (const auto* base : {&spec.a0, &spec.b0}) {
        for (int c = 0; c < base->cols(); ++c) {
            if (std::abs(base->col(c).sum() - 1.0) > 1e-9 || base->col(c).minCoeff() < -kEntryTol)
                throw SpecError(std::string(base == &spec.a0 ? "A0" : "B0") + " column " +
                                std::to_string(c) + " is not a probability distribution");
        }
    }
    for (const auto& g : spec.generators) {
        const Matrix& d = g.d;
        if (g.side == Side::transition) {
            if (d.rows() != n || d.cols() != n) throw SpecError("generator " + g.name + " shape mismatch");
        } else {
            if (d.rows() != no || d.cols() != n) throw SpecError("generator " + g.name + " shape mismatch");
        }
        for (int c = 0; c < d.cols(); ++c) {
            if (std::abs(d.col(c).sum()) > kEntryTol * static_cast<double>(d.rows()))
                throw SpecError("generator " + g.name + " column " + std::to_string(c) +
                                " does not sum to zero");
        }
    }
}

Assembled assemble(const HmmSpec& spec) {
    validate_structure(spec);
    for (const auto& p : spec.params) {
        if (!(p.value >= p.lower && p.value <= p.upper)) {
            std::ostringstream os;
            os << "invalid parametrization: " << p.name << " = " << p.value << " outside ["
               << p.lower << ", " << p.upper << "]";
            throw SpecError(os.str());
        }
    }
    Assembled out{spec.a0, spec.b0};
    for (std::size_t i = 0; i < spec.generators.size(); ++i) {
        const auto& g = spec.generators[i];
        const double p = spec.params[i].value;
        if (p == 0.0) continue;
        (g.side == Side::transition ? out.a : out.b) += p * g.d;
    }
    check_assembled(spec, out.a, Side::transition, "A");
    check_assembled(spec, out.b, Side::output, "B");
    return out;
}

FilterState initial_state(const HmmSpec& spec) {
    FilterState s;
    s.round = 0;
    s.posterior = spec.prior;
    s.log_likelihood = 0.0;
    return s;
}

void forward_step_inplace(const Assembled& m, FilterState& state, int obs) {
    if (obs < 0 || obs >= m.b.rows()) throw SpecError("observation index out of range");
    if (state.round > 0) state.posterior = m.a * state.posterior;
    state.posterior.array() *= m.b.row(obs).transpose().array();
    const double c = state.posterior.sum();
    if (!(c >= kNormalizerFloor)) {
        throw NumericError("zero-likelihood observation " + std::to_string(obs) + " at round " +
                           std::to_string(state.round + 1));
    }
    state.posterior /= c;
    state.log_likelihood += std::log(c);
    ++state.round;
}

FilterState forward_step(const HmmSpec& spec, const FilterState& state, int obs) {
    const Assembled m = assemble(spec);
    FilterState next = state;
    forward_step_inplace(m, next, obs);
    return next;
}

double sequence_log_likelihood(const Assembled& m, const Vector& prior, std::span<const int> obs) {
    FilterState s;
    s.round = 0;
    s.posterior = prior;
    s.log_likelihood = 0.0;
    for (const int o : obs) forward_step_inplace(m, s, o);
    return s.log_likelihood;
}

double sequence_log_likelihood(const HmmSpec& spec, std::span<const int> obs) {
    return sequence_log_likelihood(assemble(spec), spec.prior, obs);
}

std::pair<std::vector<int>, std::vector<int>>
sample_sequence(const HmmSpec& spec, int length, std::uint64_t seed) {
    if (length < 0) throw SpecError("sequence length must be nonnegative");
    const Assembled m = assemble(spec);
    util::Rng rng(seed);
    const int n = spec.n_states();
    const int no = spec.n_outputs();
    auto draw = [&](const double* col, int size) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (int i = 0; i < size; ++i) {
            acc += col[i];
            if (u < acc) return i;
        }
        return size - 1;
    };
    std::vector<int> hidden, observed;
    hidden.reserve(static_cast<std::size_t>(length));
    observed.reserve(static_cast<std::size_t>(length));
    int h = draw(spec.prior.data(), n);
    for (int t = 0; t < length; ++t) {
        if (t > 0) h = draw(m.a.col(h).data(), n);
        hidden.push_back(h);
        observed.push_back(draw(m.b.col(h).data(), no));
    }
    return {std::move(hidden), std::move(observed)};
}

DerivativeEngine::DerivativeEngine(const HmmSpec& spec) : m_(assemble(spec)), prior_(spec.prior) {
    free_ = spec.free_param_indices();
    for (const int i : free_) {
        const auto& p = spec.params[static_cast<std::size_t>(i)];
        if (!(p.value > p.lower && p.value < p.upper))
            throw SpecError("derivative at bound: parameter " + p.name + " = " + std::to_string(p.value));
        const auto& g = spec.generators[static_cast<std::size_t>(i)];
        da_.push_back(g.side == Side::transition ? &g.d : nullptr);
        db_.push_back(g.side == Side::output ? &g.d : nullptr);
    }
    const int n = spec.n_states();
    const auto k = static_cast<int>(free_.size());
    const int kk = k * (k + 1) / 2;
    pi_.resize(n);
    u_.resize(n);
    v_.resize(n);
    dpi_.resize(n, k);
    du_.resize(n, k);
    dv_.resize(n, k);
    d2pi_.assign(static_cast<std::size_t>(kk), Vector(n));
    d2u_.assign(static_cast<std::size_t>(kk), Vector(n));
    d2v_.assign(static_cast<std::size_t>(kk), Vector(n));
}

double DerivativeEngine::evaluate(std::span<const int> obs, Vector* grad, Matrix* hess) {
    const auto k = static_cast<int>(free_.size());
    const bool want_grad = grad != nullptr;
    const bool want_hess = hess != nullptr;
    if (want_hess && !want_grad) throw SpecError("hessian requested without gradient");
    if (want_grad) grad->setZero(k);
    if (want_hess) hess->setZero(k, k);

    double ll = 0.0;
    int round = 0;
    for (const int o : obs) {
        if (o < 0 || o >= m_.b.rows()) throw SpecError("observation index out of range");
        // Predict: u = A pi (prior at the first round), with derivatives.
        if (round == 0) {
            u_ = prior_;
            if (want_grad) du_.setZero();
            if (want_hess)
                for (auto& d2 : d2u_) d2.setZero();
        } else {
            u_.noalias() = m_.a * pi_;
            if (want_grad) {
                for (int i = 0; i < k; ++i) {
                    du_.col(i).noalias() = m_.a * dpi_.col(i);
                    if (da_[static_cast<std::size_t>(i)])
                        du_.col(i).noalias() += *da_[static_cast<std::size_t>(i)] * pi_;
                }
            }
            if (want_hess) {
                for (int j = 0; j < k; ++j) {
                    for (int i = 0; i <= j; ++i) {
                        auto& d2u = d2u_[static_cast<std::size_t>(tri_index(i, j))];
                        d2u.noalias() = m_.a * d2pi_[static_cast<std::size_t>(tri_index(i, j))];
                        if (da_[static_cast<std::size_t>(i)])
                            d2u.noalias() += *da_[static_cast<std::size_t>(i)] * dpi_.col(j);
                        if (da_[static_cast<std::size_t>(j)])
                            d2u.noalias() += *da_[static_cast<std::size_t>(j)] * dpi_.col(i);
                    }
                }
            }
        }
        // Weight by the emission row, with derivatives (B is linear in p).
        const Eigen::ArrayXd brow = m_.b.row(o).transpose();
        v_ = (u_.array() * brow).matrix();
        if (want_grad) {
            for (int i = 0; i < k; ++i) {
                dv_.col(i) = (du_.col(i).array() * brow).matrix();
                if (db_[static_cast<std::size_t>(i)])
                    dv_.col(i).array() +=
                        db_[static_cast<std::size_t>(i)]->row(o).transpose().array() * u_.array();
            }
        }
        if (want_hess) {
            for (int j = 0; j < k; ++j) {
                for (int i = 0; i <= j; ++i) {
                    auto& d2v = d2v_[static_cast<std::size_t>(tri_index(i, j))];
                    d2v = (d2u_[static_cast<std::size_t>(tri_index(i, j))].array() * brow).matrix();
                    if (db_[static_cast<std::size_t>(i)])
                        d2v.array() +=
                            db_[static_cast<std::size_t>(i)]->row(o).transpose().array() * du_.col(j).array();
                    if (db_[static_cast<std::size_t>(j)])
                        d2v.array() +=
                            db_[static_cast<std::size_t>(j)]->row(o).transpose().array() * du_.col(i).array();
                }
            }
        }
        const double c = v_.sum();
        if (!(c >= kNormalizerFloor))
            throw NumericError("zero-likelihood observation " + std::to_string(o) + " at round " +
                               std::to_string(round + 1));
        ll += std::log(c);
        pi_ = v_ / c;
        if (want_grad) {
            Eigen::VectorXd dc(k);
            for (int i = 0; i < k; ++i) dc(i) = dv_.col(i).sum();
            if (want_hess) {
                for (int j = 0; j < k; ++j) {
                    for (int i = 0; i <= j; ++i) {
                        const double d2c = d2v_[static_cast<std::size_t>(tri_index(i, j))].sum();
                        const double hij = d2c / c - dc(i) * dc(j) / (c * c);
                        (*hess)(i, j) += hij;
                        if (i != j) (*hess)(j, i) += hij;
                        // d2pi before dpi is overwritten.
                        d2pi_[static_cast<std::size_t>(tri_index(i, j))] =
                            d2v_[static_cast<std::size_t>(tri_index(i, j))] / c -
                            dv_.col(i) * (dc(j) / (c * c)) - dv_.col(j) * (dc(i) / (c * c)) -
                            pi_ * (d2c / c) + pi_ * (2.0 * dc(i) * dc(j) / (c * c));
                    }
                }
            }
            for (int i = 0; i < k; ++i) {
                (*grad)(i) += dc(i) / c;
                dpi_.col(i) = dv_.col(i) / c - pi_ * (dc(i) / c);
            }
        }
        ++round;
    }
    return ll;
}

Derivatives log_likelihood_derivatives(const HmmSpec& spec, std::span<const int> obs) {
    DerivativeEngine engine(spec);
    Derivatives out;
    out.free_params = engine.free_params();
    const auto k = static_cast<int>(out.free_params.size());
    out.gradient.resize(k);
    out.hessian.resize(k, k);
    out.log_likelihood = engine.evaluate(obs, &out.gradient, &out.hessian);
    return out;
}

} // namespace leakhmm::hmm
