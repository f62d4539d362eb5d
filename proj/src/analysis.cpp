#include "leakhmm/analysis.hpp"

#include "leakhmm/errors.hpp"
#include "leakhmm/parallel.hpp"
#include "leakhmm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace leakhmm::analysis {
namespace {

constexpr std::size_t kBlock = 1024;

int min_rounds(models::Protocol protocol, DecodeStrategy::Kind kind) {
    const bool zzxx = protocol == models::Protocol::zzxx;
    switch (kind) {
        case DecodeStrategy::Kind::first: return zzxx ? 2 : 1;
        case DecodeStrategy::Kind::final: return zzxx ? 3 : 2;
        case DecodeStrategy::Kind::no_error: return zzxx ? 5 : 3;
    }
    throw SpecError("unknown decode strategy");
}

// Pre-assembled mitigation model for batch scoring.
struct Scorer {
    const Mitigation* source = nullptr;
    hmm::Assembled mats;
    hmm::Vector prior;
    std::vector<bool> leaked;
    int window = 0;

    explicit Scorer(const Mitigation& m)
        : source(&m),
          mats(hmm::assemble(m.spec)),
          prior(m.spec.prior),
          leaked(m.spec.leaked),
          window(models::lcomp_window(m.model)) {}

    double score(const sim::ShotRecord& rec) const {
        const auto obs = models::encode_observations(source->model, rec.m_a);
        return models::computational_likelihood(mats, prior, leaked, window, obs);
    }
};

std::vector<Scorer> prepare(const std::vector<Mitigation>& mitigation,
                            models::Protocol protocol) {
    std::vector<Scorer> scorers;
    scorers.reserve(mitigation.size());
    for (const auto& m : mitigation) {
        if (models::protocol_of(m.model) != protocol)
            throw SpecError("mitigation model protocol does not match the records");
        scorers.emplace_back(m);
    }
    return scorers;
}

// Pauli-frame update implied by the strategy's parity declaration: a flip
// means the strategy declares odd parity for that comparison.  `first` and
// `no_error` declare from the opening outcomes; `final` re-declares from the
// closing ones, so its output depends only on those.
Decoded frame_flips(const sim::ShotRecord& rec, DecodeStrategy::Kind kind) {
    Decoded out;
    const auto& m = rec.m_a;
    const auto n = m.size();
    if (static_cast<int>(n) < min_rounds(rec.protocol, kind))
        throw SpecError("record too short for the requested decode strategy");
    const bool zzxx = rec.protocol == models::Protocol::zzxx;
    switch (kind) {
        case DecodeStrategy::Kind::first:
        case DecodeStrategy::Kind::no_error:
            out.flip_z = m[0] == -1;
            if (zzxx) out.flip_x = m[0] * m[1] == -1;
            if (kind == DecodeStrategy::Kind::no_error) {
                out.flip_z = out.flip_x = false;   // accept/reject only
                const auto syn = models::syndrome_from_measurements(rec.protocol, m);
                for (const int v : syn.values)
                    if (v != 1) {
                        out.accepted = false;
                        break;
                    }
            }
            break;
        case DecodeStrategy::Kind::final:
            if (!zzxx) {
                out.flip_z = m[n - 1] * m[n - 2] == -1;
            } else {
                // the last two adjacent products estimate one parity of each
                // type; which is which depends on the parity of the last round
                const int pa = m[n - 1] * m[n - 2];
                const int pb = m[n - 2] * m[n - 3];
                const bool last_is_z = (n - 1) % 2 == 0;
                out.flip_z = (last_is_z ? pa : pb) == -1;
                out.flip_x = (last_is_z ? pb : pa) == -1;
            }
            break;
    }
    return out;
}

// Declared-parity factor for the comparison: -1 when the strategy declares
// odd parity.  no_error carries no correction, so it inherits the opening
// declaration at evaluation time.
std::array<double, 2> declared_factors(const sim::ShotRecord& rec, DecodeStrategy::Kind kind,
                                       const Decoded& d) {
    const bool zzxx = rec.protocol == models::Protocol::zzxx;
    if (kind == DecodeStrategy::Kind::no_error) {
        std::array<double, 2> base{1.0, static_cast<double>(rec.m_a[0])};
        if (zzxx) base[0] = static_cast<double>(rec.m_a[0] * rec.m_a[1]);
        return base;
    }
    return {d.flip_x ? -1.0 : 1.0, d.flip_z ? -1.0 : 1.0};
}

struct ShotValue {
    bool accepted = false;
    double x = 0.0, y = 0.0, z = 0.0, f = 0.0;
};

ShotValue evaluate_shot(const sim::ShotRecord& rec, DecodeStrategy::Kind kind,
                        const std::vector<Scorer>& scorers) {
    ShotValue v;
    Decoded d = frame_flips(rec, kind);
    for (const auto& s : scorers) {
        if (!d.accepted) break;
        if (s.score(rec) < s.source->threshold) d.accepted = false;
    }
    if (!d.accepted) return v;
    v.accepted = true;
    if (!rec.depolarized) {
        // recorded frames are relative to the opening declaration; fold that
        // baseline back in so the strategy's absolute declaration applies
        const bool zzxx = rec.protocol == models::Protocol::zzxx;
        const double base_z = static_cast<double>(rec.m_a[0]);
        const double base_x = zzxx ? static_cast<double>(rec.m_a[0] * rec.m_a[1]) : 1.0;
        const auto dec = declared_factors(rec, kind, d);
        v.x = rec.frame_x * base_x * dec[0];
        v.z = rec.frame_z * base_z * dec[1];
        v.y = -v.x * v.z;
    }
    v.f = (1.0 + v.x - v.y + v.z) / 4.0;
    return v;
}

struct GroupAcc {
    long accepted = 0;
    std::array<double, 4> sum{};     // x, y, z, f
    std::array<double, 4> sumsq{};
};

GroupAcc merge(GroupAcc a, const GroupAcc& b) {
    a.accepted += b.accepted;
    for (int i = 0; i < 4; ++i) {
        a.sum[static_cast<std::size_t>(i)] += b.sum[static_cast<std::size_t>(i)];
        a.sumsq[static_cast<std::size_t>(i)] += b.sumsq[static_cast<std::size_t>(i)];
    }
    return a;
}

double sem_of(double sum, double sumsq, long n) {
    if (n < 2) return 0.0;
    const double mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, (sumsq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
}

// Deterministic blockwise map-reduce over records.
template <typename Fn>
GroupAcc accumulate_records(std::size_t n, int workers, const Fn& per_record) {
    const long nblocks = static_cast<long>((n + kBlock - 1) / kBlock);
    std::vector<GroupAcc> blocks(static_cast<std::size_t>(nblocks));
    util::parallel_for(nblocks, workers, [&](long b) {
        GroupAcc acc;
        const std::size_t hi = std::min(n, static_cast<std::size_t>(b + 1) * kBlock);
        for (std::size_t i = static_cast<std::size_t>(b) * kBlock; i < hi; ++i) {
            const ShotValue v = per_record(i);
            if (!v.accepted) continue;
            ++acc.accepted;
            const std::array<double, 4> vals{v.x, v.y, v.z, v.f};
            for (std::size_t k = 0; k < 4; ++k) {
                acc.sum[k] += vals[k];
                acc.sumsq[k] += vals[k] * vals[k];
            }
        }
        blocks[static_cast<std::size_t>(b)] = acc;
    });
    return util::pairwise_reduce<GroupAcc>(
        0, nblocks, [&](long i) { return blocks[static_cast<std::size_t>(i)]; },
        [](GroupAcc a, GroupAcc b) { return merge(std::move(a), b); });
}

} // namespace

DecodeStrategy::Kind strategy_from_string(const std::string& name) {
    if (name == "first") return DecodeStrategy::Kind::first;
    if (name == "final") return DecodeStrategy::Kind::final;
    if (name == "no_error" || name == "no-error") return DecodeStrategy::Kind::no_error;
    throw SpecError("unknown decode strategy: " + name);
}

std::string to_string(DecodeStrategy::Kind kind) {
    switch (kind) {
        case DecodeStrategy::Kind::first: return "first";
        case DecodeStrategy::Kind::final: return "final";
        case DecodeStrategy::Kind::no_error: return "no_error";
    }
    throw SpecError("unknown decode strategy");
}

Decoded decode(const sim::ShotRecord& record, const DecodeStrategy& strategy) {
    Decoded d = frame_flips(record, strategy.kind);
    const auto scorers = prepare(strategy.mitigation, record.protocol);
    for (const auto& s : scorers) {
        if (!d.accepted) break;
        if (s.score(record) < s.source->threshold) d.accepted = false;
    }
    return d;
}

std::vector<CurvePoint> curves(const std::vector<std::vector<sim::ShotRecord>>& groups,
                               const DecodeStrategy& strategy, int workers) {
    if (groups.empty()) throw SpecError("curves requires at least one group of runs");
    for (const auto& group : groups) {
        if (group.empty()) throw SpecError("curves group is empty");
        for (const auto& rec : group)
            if (rec.protocol != groups.front().front().protocol ||
                rec.m_a.size() != group.front().m_a.size())
                throw SpecError("curves group mixes protocols or run lengths");
    }
    const auto scorers = prepare(strategy.mitigation, groups.front().front().protocol);

    std::vector<CurvePoint> out;
    out.reserve(groups.size());
    for (const auto& group : groups) {
        const auto rounds = group.front().m_a.size();
        const GroupAcc acc = accumulate_records(
            group.size(), workers,
            [&](std::size_t i) { return evaluate_shot(group[i], strategy.kind, scorers); });
        if (acc.accepted == 0)
            throw SpecError("no accepted shots at rounds = " + std::to_string(rounds));

        CurvePoint pt;
        pt.rounds = static_cast<int>(rounds);
        pt.shots = static_cast<long>(group.size());
        pt.accepted = acc.accepted;
        pt.f_post = static_cast<double>(acc.accepted) / static_cast<double>(group.size());
        const double n = static_cast<double>(acc.accepted);
        pt.xx = acc.sum[0] / n;
        pt.yy = acc.sum[1] / n;
        pt.zz = acc.sum[2] / n;
        pt.fidelity = acc.sum[3] / n;
        pt.sem_xx = sem_of(acc.sum[0], acc.sumsq[0], acc.accepted);
        pt.sem_yy = sem_of(acc.sum[1], acc.sumsq[1], acc.accepted);
        pt.sem_zz = sem_of(acc.sum[2], acc.sumsq[2], acc.accepted);
        pt.sem_fidelity = sem_of(acc.sum[3], acc.sumsq[3], acc.accepted);
        out.push_back(pt);
    }
    return out;
}

DecayFit fit_decay(std::span<const double> rounds, std::span<const double> values) {
    const auto n = rounds.size();
    if (n != values.size()) throw SpecError("decay fit inputs have mismatched lengths");
    if (n < 4) throw SpecError("decay fit requires at least 4 points");

    // parametrize upsilon = exp(u) so the decay constant stays positive
    double b = values.back();
    double a = values.front() - b;
    double u = std::log(std::max(1.0, (rounds.back() - rounds.front()) / 2.0));
    const std::size_t mid = n / 2;
    if (std::abs(a) > 0 && rounds[mid] > rounds.front()) {
        const double ratio = (values[mid] - b) / a;
        if (ratio > 1e-12 && ratio < 1.0) {
            const double k = -std::log(ratio) / (rounds[mid] - rounds.front());
            if (k > 1e-12) u = std::log(1.0 / k);
        }
    }

    Eigen::Vector3d theta(a, u, b);
    const auto residuals = [&](const Eigen::Vector3d& t, Eigen::VectorXd& r,
                               Eigen::MatrixXd* jac) {
        const double ups = std::exp(t[1]);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-rounds[i] / ups);
            r[static_cast<Eigen::Index>(i)] = t[0] * e + t[2] - values[i];
            if (jac) {
                (*jac)(static_cast<Eigen::Index>(i), 0) = e;
                (*jac)(static_cast<Eigen::Index>(i), 1) = t[0] * e * rounds[i] / ups;
                (*jac)(static_cast<Eigen::Index>(i), 2) = 1.0;
            }
        }
        return 0.5 * r.squaredNorm();
    };

    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 3);
    double cost = residuals(theta, r, &jac);
    double lambda = 1e-3;
    DecayFit fit;
    for (; fit.iterations < 500; ++fit.iterations) {
        const Eigen::Matrix3d jtj = jac.transpose() * jac;
        const Eigen::Vector3d g = jac.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + std::abs(cost))) {
            fit.converged = true;
            break;
        }
        Eigen::Matrix3d damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Eigen::Vector3d step = damped.ldlt().solve(-g);
        const bool tiny =
            step.lpNorm<Eigen::Infinity>() < 1e-13 * (1.0 + theta.lpNorm<Eigen::Infinity>());
        const Eigen::Vector3d trial = theta + step;
        Eigen::VectorXd r2(static_cast<Eigen::Index>(n));
        const double cost2 = residuals(trial, r2, nullptr);
        if (cost2 < cost) {
            theta = trial;
            cost = residuals(theta, r, &jac);
            lambda = std::max(lambda / 3.0, 1e-12);
            if (tiny || cost < 1e-30) {
                fit.converged = true;
                break;
            }
        } else {
            if (tiny) {   // heavily damped step no longer moves: at the optimum
                fit.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e12) break;   // stuck; report as non-converged
        }
    }

    fit.amplitude = theta[0];
    fit.upsilon = std::exp(theta[1]);
    fit.offset = theta[2];
    fit.rss = 2.0 * cost;

    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(jtj);
    const double max_eig = eig.eigenvalues().maxCoeff();
    double scale = 0.0;
    for (const double v : values) scale = std::max(scale, std::abs(v));
    fit.unidentifiable = max_eig <= 0.0 ||
                         eig.eigenvalues().minCoeff() < 1e-10 * max_eig ||
                         std::abs(fit.amplitude) < 1e-9 * std::max(scale, 1.0);

    // covariance via the eigendecomposition, dropping null directions
    const double sigma2 = n > 3 ? fit.rss / static_cast<double>(n - 3) : 0.0;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k) {
        const double ev = eig.eigenvalues()[k];
        if (ev > 1e-12 * std::max(max_eig, 1.0)) {
            cov += eig.eigenvectors().col(k) * eig.eigenvectors().col(k).transpose() / ev;
        }
    }
    cov *= sigma2;
    fit.se_amplitude = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.se_upsilon = fit.upsilon * std::sqrt(std::max(0.0, cov(1, 1)));
    fit.se_offset = std::sqrt(std::max(0.0, cov(2, 2)));
    return fit;
}

LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma) {
    const auto n = x.size();
    if (n != y.size() || n != sigma.size() || n < 2)
        throw SpecError("weighted line fit requires matching inputs with at least 2 points");
    double s = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma[i] > 0)) throw SpecError("weighted line fit requires positive sigmas");
        const double w = 1.0 / (sigma[i] * sigma[i]);
        s += w;
        sx += w * x[i];
        sxx += w * x[i] * x[i];
        sy += w * y[i];
        sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (det <= 0) throw SpecError("weighted line fit is degenerate (constant x)");
    LineFit fit;
    fit.slope = (s * sxy - sx * sy) / det;
    fit.intercept = (sxx * sy - sx * sxy) / det;
    fit.se_slope = std::sqrt(s / det);
    fit.se_intercept = std::sqrt(sxx / det);
    return fit;
}

std::vector<double> comp_scores(const std::vector<sim::ShotRecord>& records,
                                const hmm::HmmSpec& spec, models::ModelId id, int workers) {
    if (records.empty()) throw SpecError("scoring requires at least one record");
    std::vector<Mitigation> holder(1);
    holder[0].model = id;
    holder[0].spec = spec;
    const auto scorers = prepare(holder, records.front().protocol);
    std::vector<double> out(records.size());
    util::parallel_for(static_cast<long>(records.size()), workers, [&](long i) {
        out[static_cast<std::size_t>(i)] = scorers.front().score(records[static_cast<std::size_t>(i)]);
    });
    return out;
}

bool truth_leaked(const sim::ShotRecord& record, models::ModelId id) {
    const int window = std::min<int>(models::lcomp_window(id),
                                     static_cast<int>(record.m_a.size()));
    const auto n = record.m_a.size();
    for (int k = 0; k < window; ++k) {
        const std::size_t m = n - 1 - static_cast<std::size_t>(k);
        if (models::role_of(id) == models::Role::data) {
            if (record.dh_leaked[m] || record.dl_leaked[m]) return true;
        } else if (record.anc_leaked[m]) {
            return true;
        }
    }
    return false;
}

RocCurve roc_from_scores(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size())
        throw SpecError("ROC inputs have mismatched lengths");
    long npos = 0;
    for (const bool p : positive) npos += p ? 1 : 0;
    const long nneg = static_cast<long>(scores.size()) - npos;
    if (npos == 0 || nneg == 0)
        throw SpecError("ROC requires both leaked and unleaked examples");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    RocCurve curve;
    long cpos = 0, cneg = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double v = scores[order[i]];
        // threshold = v rejects scores strictly below v
        curve.points.push_back({v, static_cast<double>(cneg) / static_cast<double>(nneg),
                                static_cast<double>(cpos) / static_cast<double>(npos)});
        while (i < order.size() && scores[order[i]] == v) {
            (positive[order[i]] ? cpos : cneg) += 1;
            ++i;
        }
    }
    curve.points.push_back({std::numeric_limits<double>::infinity(), 1.0, 1.0});

    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& lo = curve.points[k - 1];
        const auto& hi = curve.points[k];
        curve.auc += (hi.fpr - lo.fpr) * (hi.tpr + lo.tpr) / 2.0;
    }
    return curve;
}

RocCurve roc(const std::vector<sim::ShotRecord>& records, const hmm::HmmSpec& spec,
             models::ModelId id, int workers) {
    const auto scores = comp_scores(records, spec, id, workers);
    std::vector<bool> positive(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        positive[i] = truth_leaked(records[i], id);
    return roc_from_scores(scores, positive);
}

ThresholdChoice tune_threshold(const std::vector<sim::ShotRecord>& tuning,
                               const hmm::HmmSpec& spec, models::ModelId id, double target_tpr,
                               int workers) {
    if (target_tpr < 0.0 || target_tpr > 1.0)
        throw SpecError("target TPR must lie in [0, 1]");
    const RocCurve curve = roc(tuning, spec, id, workers);
    for (const auto& pt : curve.points) {
        if (pt.tpr >= target_tpr) return {pt.threshold, pt.tpr, pt.fpr};
    }
    throw SpecError("target TPR unreachable");   // unreachable: final point has TPR 1
}

Postselected postselect(const std::vector<sim::ShotRecord>& records,
                        const std::vector<Mitigation>& mitigation, int workers) {
    if (records.empty()) throw SpecError("postselect requires at least one record");
    const auto scorers = prepare(mitigation, records.front().protocol);
    std::vector<char> keep(records.size(), 1);
    util::parallel_for(static_cast<long>(records.size()), workers, [&](long idx) {
        const auto i = static_cast<std::size_t>(idx);
        for (const auto& s : scorers) {
            if (s.score(records[i]) < s.source->threshold) {
                keep[i] = 0;
                break;
            }
        }
    });
    Postselected out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (keep[i]) out.kept.push_back(records[i]);
    if (out.kept.empty()) throw SpecError("postselection rejected every record");
    out.f_post = static_cast<double>(out.kept.size()) / static_cast<double>(records.size());
    return out;
}

CalibrationTable calibration_from_scores(std::span<const double> exp_scores,
                                         const std::vector<bool>& exp_unleaked,
                                         std::span<const double> model_scores, int bins) {
    if (bins < 1) throw SpecError("calibration requires at least one bin");
    if (exp_scores.size() != exp_unleaked.size())
        throw SpecError("calibration inputs have mismatched lengths");
    if (exp_scores.empty() || model_scores.empty())
        throw SpecError("calibration requires nonempty score sets");

    CalibrationTable table;
    table.bins.resize(static_cast<std::size_t>(bins));
    const double width = 1.0 / bins;
    for (int k = 0; k < bins; ++k) {
        table.bins[static_cast<std::size_t>(k)].lo = k * width;
        table.bins[static_cast<std::size_t>(k)].hi = k + 1 == bins ? 1.0 : (k + 1) * width;
    }
    const auto bin_of = [&](double score) {
        const int k = static_cast<int>(score * bins);
        return static_cast<std::size_t>(std::clamp(k, 0, bins - 1));
    };
    for (std::size_t i = 0; i < exp_scores.size(); ++i) {
        auto& bin = table.bins[bin_of(exp_scores[i])];
        ++bin.n_exp;
        bin.mean_score += exp_scores[i];
        if (exp_unleaked[i]) ++bin.n_unleaked;
    }
    for (const double s : model_scores) ++table.bins[bin_of(s)].n_model;

    const double n_exp_total = static_cast<double>(exp_scores.size());
    const double n_model_total = static_cast<double>(model_scores.size());
    for (auto& bin : table.bins) {
        bin.empty = bin.n_exp == 0;
        if (bin.empty) {
            bin.mean_score = std::numeric_limits<double>::quiet_NaN();
            bin.unleaked_frac = std::numeric_limits<double>::quiet_NaN();
        } else {
            bin.mean_score /= static_cast<double>(bin.n_exp);
            bin.unleaked_frac =
                static_cast<double>(bin.n_unleaked) / static_cast<double>(bin.n_exp);
        }
        table.total_variation +=
            0.5 * std::abs(static_cast<double>(bin.n_exp) / n_exp_total -
                           static_cast<double>(bin.n_model) / n_model_total);
    }
    return table;
}

CalibrationTable calibration(const std::vector<sim::ShotRecord>& records,
                             const hmm::HmmSpec& spec, models::ModelId id, int bins,
                             std::uint64_t model_seed, int workers) {
    if (bins < 1) throw SpecError("calibration requires at least one bin");
    const auto exp_scores = comp_scores(records, spec, id, workers);

    // same-size synthetic dataset drawn from the model itself
    const auto mats = hmm::assemble(spec);
    const int window = models::lcomp_window(id);
    std::vector<double> model_scores(records.size());
    util::parallel_for(static_cast<long>(records.size()), workers, [&](long idx) {
        const auto i = static_cast<std::size_t>(idx);
        const auto len = models::encode_observations(id, records[i].m_a).size();
        const auto [states, obs] = hmm::sample_sequence(spec, static_cast<int>(len),
                                                        util::stream_seed(model_seed, i));
        (void)states;
        model_scores[i] = models::computational_likelihood(mats, spec.prior, spec.leaked,
                                                           window, obs);
    });

    std::vector<bool> unleaked(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        unleaked[i] = !truth_leaked(records[i], id);
    return calibration_from_scores(exp_scores, unleaked, model_scores, bins);
}

} // namespace leakhmm::analysis
