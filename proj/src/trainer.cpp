#include "leakhmm/trainer.hpp"

#include "leakhmm/errors.hpp"
#include "leakhmm/parallel.hpp"
#include "leakhmm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>
#include <utility>

namespace leakhmm::trainer {
namespace {

using hmm::HmmSpec;
using hmm::Matrix;
using hmm::Vector;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sigmoid clamp: keeps mapped parameters strictly inside their box so the
// derivative engine never sees a free parameter sitting on a bound.
constexpr double kTClamp = 36.0;

// Runs fn(block, slot) over all blocks; each OS thread owns one slot in
// [0, workers).  The first exception wins and is rethrown on the caller.
template <typename Fn>
void for_blocks(long nblocks, int workers, Fn&& fn) {
    if (nblocks <= 0) return;
    if (workers <= 1 || nblocks == 1) {
        for (long b = 0; b < nblocks; ++b) fn(b, 0);
        return;
    }
    std::atomic<long> cursor{0};
    std::exception_ptr err;
    std::mutex err_mx;
    auto run = [&](int slot) {
        try {
            for (;;) {
                const long b = cursor.fetch_add(1);
                if (b >= nblocks) return;
                fn(b, slot);
            }
        } catch (...) {
            const std::lock_guard<std::mutex> lock(err_mx);
            if (!err) err = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct BatchStats {
    double f = kInf;  // mean NLL per record
    Vector g;         // df/dp over free params, same order as free_param_indices
    Matrix h;
    bool ok = false;
};

// Mean negative log-likelihood over a fixed subsample, with derivatives on
// demand.  Inadmissible parameters and zero-likelihood records yield
// f = +inf instead of throwing so the optimizer can back off.
class Objective {
  public:
    Objective(HmmSpec spec, const Dataset& data, std::vector<long> batch, int workers)
        : spec_(std::move(spec)),
          data_(&data),
          batch_(std::move(batch)),
          free_(spec_.free_param_indices()),
          workers_(util::resolve_workers(workers)) {}

    const HmmSpec& spec() const { return spec_; }
    const std::vector<int>& free_indices() const { return free_; }

    BatchStats eval(const Vector& p, bool derivs) {
        for (std::size_t i = 0; i < free_.size(); ++i)
            spec_.params[static_cast<std::size_t>(free_[i])].value = p[static_cast<long>(i)];
        const int k = static_cast<int>(free_.size());
        BatchStats out;
        out.g = Vector::Zero(k);
        out.h = Matrix::Zero(k, k);
        const long n = static_cast<long>(batch_.size());
        if (n == 0) return out;
        constexpr long kBlock = 256;
        const long nblocks = (n + kBlock - 1) / kBlock;
        std::atomic<bool> bad{false};

        if (!derivs) {
            hmm::Assembled m;
            try {
                m = hmm::assemble(spec_);
            } catch (const SpecError&) {
                return out;
            }
            std::vector<double> sums(static_cast<std::size_t>(nblocks), 0.0);
            for_blocks(nblocks, workers_, [&](long b, int) {
                if (bad.load(std::memory_order_relaxed)) return;
                double acc = 0.0;
                const long lo = b * kBlock, hi = std::min(n, lo + kBlock);
                for (long i = lo; i < hi; ++i) {
                    try {
                        acc += hmm::sequence_log_likelihood(m, spec_.prior, (*data_)[static_cast<std::size_t>(batch_[i])]);
                    } catch (const NumericError&) {
                        bad.store(true, std::memory_order_relaxed);
                        return;
                    }
                }
                sums[static_cast<std::size_t>(b)] = acc;
            });
            if (bad.load()) return out;
            const double total = util::pairwise_reduce<double>(
                0, nblocks, [&](long b) { return sums[static_cast<std::size_t>(b)]; }, std::plus<>());
            out.f = -total / static_cast<double>(n);
            out.ok = std::isfinite(out.f);
            return out;
        }

        std::vector<std::unique_ptr<hmm::DerivativeEngine>> engines;
        try {
            for (int w = 0; w < workers_; ++w)
                engines.push_back(std::make_unique<hmm::DerivativeEngine>(spec_));
        } catch (const SpecError&) {
            return out;
        }
        struct Block {
            double ll = 0.0;
            Vector g;
            Matrix h;
        };
        std::vector<Block> blocks(static_cast<std::size_t>(nblocks));
        for_blocks(nblocks, workers_, [&](long b, int slot) {
            if (bad.load(std::memory_order_relaxed)) return;
            auto& eng = *engines[static_cast<std::size_t>(slot)];
            Block blk;
            blk.g = Vector::Zero(k);
            blk.h = Matrix::Zero(k, k);
            Vector g(k);
            Matrix h(k, k);
            const long lo = b * kBlock, hi = std::min(n, lo + kBlock);
            for (long i = lo; i < hi; ++i) {
                try {
                    blk.ll += eng.evaluate((*data_)[static_cast<std::size_t>(batch_[i])], &g, &h);
                } catch (const NumericError&) {
                    bad.store(true, std::memory_order_relaxed);
                    return;
                }
                blk.g += g;
                blk.h += h;
            }
            blocks[static_cast<std::size_t>(b)] = std::move(blk);
        });
        if (bad.load()) return out;
        Block total = util::pairwise_reduce<Block>(
            0, nblocks, [&](long b) { return std::move(blocks[static_cast<std::size_t>(b)]); },
            [](Block a, Block b) {
                a.ll += b.ll;
                a.g += b.g;
                a.h += b.h;
                return a;
            });
        const double inv = 1.0 / static_cast<double>(n);
        out.f = -total.ll * inv;
        out.g = -total.g * inv;
        out.h = -total.h * inv;
        out.ok = std::isfinite(out.f) && out.g.allFinite() && out.h.allFinite();
        return out;
    }

  private:
    HmmSpec spec_;
    const Dataset* data_;
    std::vector<long> batch_;
    std::vector<int> free_;
    int workers_;
};

// Maps an unconstrained coordinate onto (lo, hi) through a sigmoid.
struct BoxMap {
    double lo = 0.0;
    double hi = 1.0;
    double sig(double t) const { return 1.0 / (1.0 + std::exp(-t)); }
    double p(double t) const { return lo + (hi - lo) * sig(t); }
    double dp(double t) const {
        const double s = sig(t);
        return (hi - lo) * s * (1.0 - s);
    }
    double d2p(double t) const {
        const double s = sig(t);
        return (hi - lo) * s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    double t_of(double pv) const {
        double f = (pv - lo) / (hi - lo);
        f = std::clamp(f, 1e-12, 1.0 - 1e-12);
        return std::log(f / (1.0 - f));
    }
};

// Infinity norm of the gradient with components projected out when the
// parameter is pinned at a bound and the gradient pushes outward.
double projected_norm(const HmmSpec& spec, const std::vector<int>& free, const Vector& p,
                      const Vector& g) {
    double norm = 0.0;
    for (long i = 0; i < p.size(); ++i) {
        const auto& par = spec.params[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])];
        const double span = par.upper - par.lower;
        double gi = g[i];
        if (p[i] - par.lower <= 1e-8 * span && gi > 0.0) gi = 0.0;
        if (par.upper - p[i] <= 1e-8 * span && gi < 0.0) gi = 0.0;
        norm = std::max(norm, std::abs(gi));
    }
    return norm;
}

// Steihaug-Toint truncated conjugate gradients: approximately minimizes
// g's + s'Hs/2 within ||s|| <= radius, following negative curvature to the
// boundary when it appears.
Vector steihaug(const Vector& g, const Matrix& h, double radius) {
    const long n = g.size();
    Vector s = Vector::Zero(n);
    Vector r = g;
    Vector d = -g;
    double rr = r.squaredNorm();
    const double gnorm = std::sqrt(rr);
    if (gnorm == 0.0) return s;
    const double tol = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    const auto to_boundary = [&](const Vector& base, const Vector& dir) {
        const double dd = dir.squaredNorm();
        if (dd == 0.0) return base;
        const double sd = base.dot(dir);
        const double disc = sd * sd + dd * (radius * radius - base.squaredNorm());
        const double tau = (-sd + std::sqrt(std::max(0.0, disc))) / dd;
        return Vector(base + tau * dir);
    };
    for (long k = 0; k < 4 * n + 8; ++k) {
        const Vector hd = h * d;
        const double dhd = d.dot(hd);
        if (dhd <= 0.0) return to_boundary(s, d);
        const double alpha = rr / dhd;
        if ((s + alpha * d).norm() >= radius) return to_boundary(s, d);
        s += alpha * d;
        r += alpha * hd;
        const double rr_new = r.squaredNorm();
        if (std::sqrt(rr_new) <= tol) return s;
        d = -r + (rr_new / rr) * d;
        rr = rr_new;
    }
    return s;
}

struct OptimResult {
    Vector t;
    BatchStats val;
    int iterations = 0;
    bool converged = false;
    bool any_accept = false;
    bool start_ok = true;
};

OptimResult minimize(Objective& obj, const std::vector<BoxMap>& maps, Vector t, int max_iters,
                     double tol) {
    const long k = t.size();
    const auto p_of = [&](const Vector& tv) {
        Vector p(k);
        for (long i = 0; i < k; ++i) p[i] = maps[static_cast<std::size_t>(i)].p(tv[i]);
        return p;
    };
    OptimResult res;
    res.val = obj.eval(p_of(t), true);
    res.t = t;
    if (!res.val.ok) {
        res.start_ok = false;
        return res;
    }
    double radius = 0.5;
    for (int iter = 0; iter < max_iters; ++iter) {
        const Vector p = p_of(t);
        if (projected_norm(obj.spec(), obj.free_indices(), p, res.val.g) <= tol) {
            res.converged = true;
            break;
        }
        Vector dp(k), d2p(k);
        for (long i = 0; i < k; ++i) {
            dp[i] = maps[static_cast<std::size_t>(i)].dp(t[i]);
            d2p[i] = maps[static_cast<std::size_t>(i)].d2p(t[i]);
        }
        const Vector gt = res.val.g.cwiseProduct(dp);
        Matrix ht = res.val.h.cwiseProduct(dp * dp.transpose());
        ht.diagonal() += res.val.g.cwiseProduct(d2p);
        if (gt.lpNorm<Eigen::Infinity>() < 1e-18) break;  // pinned flat everywhere
        res.iterations = iter + 1;
        const Vector s = steihaug(gt, ht, radius);
        const double pred = -(gt.dot(s) + 0.5 * s.dot(ht * s));
        double cand_f = kInf;
        Vector tc;
        if (pred > 0.0) {
            tc = (t + s).cwiseMax(-kTClamp).cwiseMin(kTClamp);
            cand_f = obj.eval(p_of(tc), false).f;
        }
        const double rho = pred > 0.0 ? (res.val.f - cand_f) / pred : -kInf;
        if (rho < 0.25)
            radius = std::max(radius * 0.25, 1e-14);
        else if (rho > 0.75 && s.norm() >= 0.99 * radius)
            radius = std::min(radius * 2.0, 64.0);
        if (rho > 1e-4 && cand_f < res.val.f) {
            t = tc;
            res.val = obj.eval(p_of(t), true);
            res.any_accept = true;
            res.t = t;
            if (!res.val.ok) return res;  // forward passed, derivatives did not; bail out
        }
        if (radius <= 1e-13) break;
    }
    res.t = t;
    if (!res.converged && res.val.ok &&
        projected_norm(obj.spec(), obj.free_indices(), p_of(t), res.val.g) <= tol)
        res.converged = true;
    return res;
}

} // namespace

std::uint64_t dataset_fingerprint(const Dataset& data) {
    std::uint64_t hash = 14695981039346656037ull;
    const auto mix = [&hash](std::uint64_t v) {
        for (int byte = 0; byte < 8; ++byte) {
            hash ^= (v >> (8 * byte)) & 0xffu;
            hash *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(data.size()));
    for (const auto& rec : data) {
        mix(static_cast<std::uint64_t>(rec.size()));
        for (const int s : rec) mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)));
    }
    return hash;
}

double total_log_likelihood(const hmm::HmmSpec& spec, const Dataset& data, int workers) {
    if (data.empty()) throw SpecError("likelihood requires a nonempty dataset");
    const auto m = hmm::assemble(spec);
    const long n = static_cast<long>(data.size());
    constexpr long kBlock = 1024;
    const long nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> sums(static_cast<std::size_t>(nblocks), 0.0);
    for_blocks(nblocks, util::resolve_workers(workers), [&](long b, int) {
        double acc = 0.0;
        const long lo = b * kBlock, hi = std::min(n, lo + kBlock);
        for (long i = lo; i < hi; ++i)
            acc += hmm::sequence_log_likelihood(m, spec.prior, data[static_cast<std::size_t>(i)]);
        sums[static_cast<std::size_t>(b)] = acc;
    });
    return util::pairwise_reduce<double>(
        0, nblocks, [&](long b) { return sums[static_cast<std::size_t>(b)]; }, std::plus<>());
}

double aic(const hmm::HmmSpec& spec, const Dataset& data, int workers) {
    return 2.0 * spec.n_free_params() - 2.0 * total_log_likelihood(spec, data, workers);
}

FitReport fit(const hmm::HmmSpec& spec, const Dataset& data, const FitOptions& opts) {
    if (data.empty()) throw SpecError("fit requires a nonempty dataset");
    hmm::validate_structure(spec);
    const auto free = spec.free_param_indices();
    if (free.empty()) throw SpecError("fit requires at least one free parameter");
    if (opts.restarts < 1) throw SpecError("fit requires at least one restart");
    if (opts.batch_size < 1) throw SpecError("batch size must be positive");
    if (opts.max_iterations < 0) throw SpecError("iteration limit must be nonnegative");
    if (!(opts.gradient_tolerance > 0.0)) throw SpecError("gradient tolerance must be positive");
    if (!(opts.init_low > 0.0) || opts.init_high < opts.init_low || opts.init_high >= 1.0)
        throw SpecError("initialization range must satisfy 0 < low <= high < 1");
    const int n_out = spec.n_outputs();
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (data[r].empty()) throw SpecError("record " + std::to_string(r) + " is empty");
        for (const int s : data[r])
            if (s < 0 || s >= n_out)
                throw SpecError("record " + std::to_string(r) + " contains symbol " +
                                std::to_string(s) + " outside the model alphabet [0, " +
                                std::to_string(n_out) + ")");
    }

    const long n_records = static_cast<long>(data.size());
    const long batch_n = std::min<long>(opts.batch_size, n_records);
    const long k = static_cast<long>(free.size());

    std::vector<BoxMap> maps;
    maps.reserve(free.size());
    for (const int idx : free)
        maps.push_back({spec.params[static_cast<std::size_t>(idx)].lower,
                        spec.params[static_cast<std::size_t>(idx)].upper});

    FitReport report;
    report.spec = spec;
    report.n_records = data.size();
    report.dataset_fingerprint = dataset_fingerprint(data);

    std::vector<std::vector<long>> batches(static_cast<std::size_t>(opts.restarts));
    for (int r = 0; r < opts.restarts; ++r) {
        RestartResult rr;
        rr.index = r;
        util::Rng rng(opts.seed, static_cast<std::uint64_t>(r));
        HmmSpec work = spec;

        // Restart 0 keeps the caller's values; the rest draw log-uniformly,
        // retrying until the assembled matrices are admissible.
        bool have_init = r == 0;
        for (int attempt = 0; attempt < 200 && !have_init; ++attempt) {
            for (std::size_t i = 0; i < free.size(); ++i) {
                const auto& par = spec.params[static_cast<std::size_t>(free[i])];
                const double lo = std::max(opts.init_low, par.lower + 1e-9);
                const double hi = std::max(lo, std::min(opts.init_high, par.upper - 1e-9));
                const double v = std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
                work.params[static_cast<std::size_t>(free[i])].value =
                    std::clamp(v, par.lower + 1e-9, par.upper - 1e-9);
            }
            try {
                hmm::assemble(work);
                have_init = true;
            } catch (const SpecError&) {
            }
        }
        if (!have_init) {
            rr.rejected = true;
            rr.note = "no admissible initialization";
            report.restarts.push_back(std::move(rr));
            continue;
        }
        rr.initial.reserve(work.params.size());
        for (const auto& par : work.params) rr.initial.push_back(par.value);

        auto& batch = batches[static_cast<std::size_t>(r)];
        batch.resize(static_cast<std::size_t>(n_records));
        std::iota(batch.begin(), batch.end(), 0L);
        if (batch_n < n_records) {
            for (long i = 0; i < batch_n; ++i) {
                const long j = i + static_cast<long>(rng.below(static_cast<std::uint64_t>(n_records - i)));
                std::swap(batch[static_cast<std::size_t>(i)], batch[static_cast<std::size_t>(j)]);
            }
            batch.resize(static_cast<std::size_t>(batch_n));
            std::sort(batch.begin(), batch.end());
        }

        Objective obj(work, data, batch, opts.workers);
        Vector t0(k);
        for (long i = 0; i < k; ++i)
            t0[i] = maps[static_cast<std::size_t>(i)].t_of(
                work.params[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])].value);

        const OptimResult opt = minimize(obj, maps, t0, opts.max_iterations, opts.gradient_tolerance);
        if (!opt.start_ok) {
            rr.rejected = true;
            rr.note = "initialization not evaluable";
            report.restarts.push_back(std::move(rr));
            continue;
        }
        rr.iterations = opt.iterations;
        rr.converged = opt.converged;
        rr.batch_objective = opt.val.f;
        if (!opt.val.ok) {
            rr.rejected = true;
            rr.note = "objective became non-evaluable";
            report.restarts.push_back(std::move(rr));
            continue;
        }
        if (opts.max_iterations > 0 && !opt.any_accept && !opt.converged) {
            rr.rejected = true;
            rr.note = "no progress from initialization";
            report.restarts.push_back(std::move(rr));
            continue;
        }
        if (!rr.converged && opts.max_iterations > 0) rr.note = "did not converge";

        HmmSpec fitted = spec;
        if (opt.any_accept) {
            for (std::size_t i = 0; i < work.params.size(); ++i) fitted.params[i].value = rr.initial[i];
            for (long i = 0; i < k; ++i)
                fitted.params[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])].value =
                    maps[static_cast<std::size_t>(i)].p(opt.t[i]);
        } else {
            for (std::size_t i = 0; i < work.params.size(); ++i) fitted.params[i].value = rr.initial[i];
        }
        rr.final_params.reserve(fitted.params.size());
        for (const auto& par : fitted.params) rr.final_params.push_back(par.value);

        double full_ll = -kInf;
        bool full_ok = true;
        try {
            full_ll = total_log_likelihood(fitted, data, opts.workers);
        } catch (const NumericError&) {
            full_ok = false;
        }
        if (!full_ok || !std::isfinite(full_ll)) {
            rr.rejected = true;
            rr.note = "full-dataset likelihood not finite";
            report.restarts.push_back(std::move(rr));
            continue;
        }
        rr.log_likelihood = full_ll;
        report.restarts.push_back(std::move(rr));
    }

    int best = -1;
    for (std::size_t i = 0; i < report.restarts.size(); ++i) {
        const auto& rr = report.restarts[i];
        if (rr.rejected) {
            ++report.rejected_count;
            continue;
        }
        if (best < 0 || rr.log_likelihood > report.restarts[static_cast<std::size_t>(best)].log_likelihood)
            best = static_cast<int>(i);
    }
    if (best < 0) throw SpecError("all restarts rejected; fit failed");
    report.best_restart = best;
    const auto& winner = report.restarts[static_cast<std::size_t>(best)];
    for (std::size_t i = 0; i < report.spec.params.size(); ++i)
        report.spec.params[i].value = winner.final_params[i];
    report.total_log_likelihood = winner.log_likelihood;
    report.aic = 2.0 * static_cast<double>(k) - 2.0 * report.total_log_likelihood;

    Objective check(report.spec, data, batches[static_cast<std::size_t>(best)], opts.workers);
    Vector p_best(k);
    for (long i = 0; i < k; ++i)
        p_best[i] = report.spec.params[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])].value;
    const BatchStats stats = check.eval(p_best, true);
    report.gradient_norm = stats.ok ? projected_norm(report.spec, free, p_best, stats.g) : kInf;
    return report;
}

double compare_models(const FitReport& a, const FitReport& b) {
    if (a.dataset_fingerprint != b.dataset_fingerprint)
        throw SpecError("model comparison requires fits on the same dataset (fingerprints differ)");
    return b.aic - a.aic;
}

} // namespace leakhmm::trainer
