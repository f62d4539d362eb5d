#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Acceptance gate.  Each case checks one release criterion end to end and
// prints a single PASS/FAIL line with the measured numbers next to the pinned
// tolerance, so a red run says immediately which guarantee broke and by how
// much.  Everything here is seeded; a rerun reproduces the same line.

#include "oracles.hpp"

#include "leakhmm/analysis.hpp"
#include "leakhmm/hmm.hpp"
#include "leakhmm/models.hpp"
#include "leakhmm/rng.hpp"
#include "leakhmm/sim.hpp"
#include "leakhmm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace {

using namespace leakhmm;
using models::ModelId;
using models::Protocol;

const std::vector<ModelId> kFiveModels = {
    ModelId::simple_zz_d, ModelId::zz_d, ModelId::zz_a, ModelId::zzxx_d, ModelId::zzxx_a,
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    return out.str();
}

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("criterion %2d  %-38s  %s  %s\n", number, name.c_str(), pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", number, " (", name, "): ", detail);
}

std::vector<sim::ShotRecord> simulate_group(Protocol protocol, int rounds, long shots,
                                            std::uint64_t seed) {
    auto config = sim::default_config(protocol);
    config.rounds = rounds;
    config.shots = shots;
    config.seed = seed;
    return sim::simulate_shots(config);
}

// Runs of several lengths, as the grouped form curves() wants and pooled for
// ROC work.  Each length gets its own seed stream.
struct Mixture {
    std::vector<std::vector<sim::ShotRecord>> groups;
    std::vector<sim::ShotRecord> pooled;
};

Mixture make_mixture(Protocol protocol, const std::vector<int>& lengths, long shots,
                     std::uint64_t seed_base) {
    Mixture mix;
    for (const int rounds : lengths) {
        mix.groups.push_back(simulate_group(protocol, rounds, shots,
                                            seed_base + static_cast<std::uint64_t>(rounds)));
        mix.pooled.insert(mix.pooled.end(), mix.groups.back().begin(), mix.groups.back().end());
    }
    return mix;
}

// The evaluation mixtures are shared between the detection and postselection
// criteria; the tuning mixtures mirror the evaluation length profile but stay
// disjoint from it.  ZZXX lengths start at 10 because shorter runs carry too
// little syndrome history for any threshold to act on.
const Mixture& zz_eval() {
    static const Mixture mix = make_mixture(Protocol::zz, {5, 9, 13, 17, 21, 25}, 3000, 7000);
    return mix;
}
const Mixture& zz_tuning() {
    static const Mixture mix = make_mixture(Protocol::zz, {5, 9, 13, 17, 21, 25}, 2000, 9000);
    return mix;
}
const Mixture& zzxx_eval() {
    static const Mixture mix = make_mixture(Protocol::zzxx, {10, 14, 18, 22, 26}, 3000, 7100);
    return mix;
}
const Mixture& zzxx_tuning() {
    static const Mixture mix = make_mixture(Protocol::zzxx, {10, 14, 18, 22, 26}, 2000, 9100);
    return mix;
}

} // namespace

TEST_CASE("forward recursion agrees with exhaustive path enumeration") {
    double worst_ll = 0.0;
    double worst_mask = 0.0;
    for (const auto id : kFiveModels) {
        const auto spec = models::build_model(id);
        for (int length = 1; length <= 5; ++length) {
            for (int rep = 0; rep < 2; ++rep) {
                const auto seed = util::stream_seed(
                    0xacc1, static_cast<std::uint64_t>(100 * static_cast<int>(id) +
                                                       10 * length + rep));
                const auto obs = hmm::sample_sequence(spec, length, seed).second;
                const double ll = hmm::sequence_log_likelihood(spec, obs);
                const double ref = static_cast<double>(std::log(oracles::path_sum(spec, obs)));
                worst_ll = std::max(worst_ll, std::abs(ll - ref));
                const int window = std::min(models::lcomp_window(id), length);
                const double lc = models::computational_likelihood(spec, id, obs);
                const double mask =
                    static_cast<double>(oracles::masked_fraction(spec, obs, window));
                worst_mask = std::max(worst_mask, std::abs(lc - mask));
            }
        }
    }
    const bool pass = worst_ll <= 1e-10 && worst_mask <= 1e-10;
    report(1, "exhaustive path sums, all five models", pass,
           "max |logL - log sum| = " + fmt(worst_ll, 3) + ", max |L_comp - masked ratio| = " +
               fmt(worst_mask, 3) + " (tol 1e-10, lengths 1..5)");
}

TEST_CASE("analytic derivatives agree with central finite differences") {
    util::Rng rng(0xacc2);
    bool pass = true;
    double worst = 0.0;
    int raw_checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto id = kFiveModels[static_cast<std::size_t>(trial % 5)];
        auto spec = models::build_model(id);
        for (auto& p : spec.params) {
            p.frozen = false;
            p.value = std::exp(std::log(5e-3) + rng.uniform() * (std::log(0.2) - std::log(5e-3)));
        }
        const int length = 3 + static_cast<int>(rng.below(10));
        const auto obs = hmm::sample_sequence(spec, length, rng.next_u64()).second;
        const auto d = hmm::log_likelihood_derivatives(spec, obs);

        const auto g = oracles::fd_gradient(spec, obs);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double scale = std::max({std::abs(d.gradient(i)), std::abs(g(i)), 1e-3});
            worst = std::max(worst, std::abs(d.gradient(i) - g(i)) / scale);
            pass = pass && oracles::close_rel(d.gradient(i), g(i), 1e-5);
        }
        const auto h = oracles::fd_hessian(spec, obs);
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                const double scale =
                    std::max({std::abs(d.hessian(i, j)), std::abs(h(i, j)), 1e-3});
                worst = std::max(worst, std::abs(d.hessian(i, j) - h(i, j)) / scale);
                pass = pass && oracles::close_rel(d.hessian(i, j), h(i, j), 1e-5);
            }
        }
        // Coarse second differences of the raw log-likelihood on a subset:
        // catches a gradient and its finite difference agreeing on the wrong
        // quantity.
        if (trial % 10 == 0) {
            const auto raw = oracles::fd_hessian_raw(spec, obs);
            for (Eigen::Index i = 0; i < raw.rows(); ++i)
                for (Eigen::Index j = 0; j < raw.cols(); ++j)
                    pass = pass && oracles::close_rel(d.hessian(i, j), raw(i, j), 1e-3, 1e-1);
            ++raw_checked;
        }
    }
    report(2, "gradient and Hessian vs finite differences", pass,
           "100 model/sequence pairs, worst relative deviation " + fmt(worst, 3) +
               " (tol 1e-5); raw second differences on " + std::to_string(raw_checked) +
               " pairs");
}

TEST_CASE("steady-state leakage: closed form and simulated round 25") {
    const auto dspec = models::build_model(ModelId::zz_d);
    const auto aspec = models::build_model(ModelId::zz_a);
    const double data_pl = dspec.param_value("p_leak"), data_ps = dspec.param_value("p_seep");
    const double anc_pl = aspec.param_value("p_leak"), anc_ps = aspec.param_value("p_seep");
    const double data_ss = models::steady_state_leakage(data_pl, data_ps);
    const double anc_ss = models::steady_state_leakage(anc_pl, anc_ps);
    const bool closed_form = data_ss == data_pl / (data_pl + data_ps) &&
                             anc_ss == anc_pl / (anc_pl + anc_ps) &&
                             std::abs(data_ss - 0.056) <= 5e-4 && std::abs(anc_ss - 0.038) <= 5e-4;

    auto config = sim::default_config(Protocol::zz);
    config.shots = 100000;
    config.seed = 3003;
    const auto summary = sim::summarize(sim::simulate_shots(config));
    const double data_emp = summary.data_leak_fraction.back();
    const double anc_emp = summary.anc_leak_fraction.back();
    const bool empirical =
        std::abs(data_emp - data_ss) <= 0.003 && std::abs(anc_emp - anc_ss) <= 0.003;

    report(3, "steady-state leakage fractions", closed_form && empirical,
           "closed form " + fmt(100.0 * data_ss, 3) + "% / " + fmt(100.0 * anc_ss, 3) +
               "%, simulated round 25 " + fmt(100.0 * data_emp, 3) + "% / " +
               fmt(100.0 * anc_emp, 3) + "% (tol 0.3pp, 1e5 shots)");
}

TEST_CASE("training recovers the generating two-state rates") {
    const auto truth = models::build_model(ModelId::simple_zz_d);
    trainer::Dataset data;
    data.reserve(20000);
    for (int i = 0; i < 20000; ++i)
        data.push_back(
            hmm::sample_sequence(truth, 25, util::stream_seed(0xacc4, static_cast<std::uint64_t>(i)))
                .second);

    trainer::FitOptions opts;
    opts.restarts = 5;
    opts.seed = 11;
    const auto fitted = trainer::fit(models::build_model(ModelId::simple_zz_d), data, opts);

    bool pass = fitted.best_restart >= 0;
    std::string detail;
    for (const auto& p : truth.params) {
        const double got = fitted.spec.param_value(p.name);
        const double err = std::abs(got - p.value);
        const bool ok = p.name == "p_leak" ? err <= 0.002 : err <= 0.15 * p.value;
        pass = pass && ok;
        if (!detail.empty()) detail += ", ";
        detail += p.name + (p.name == "p_leak" ? " err " + fmt(err, 2) + " (tol 2e-3 abs)"
                                               : " err " + fmt(100.0 * err / p.value, 2) +
                                                     "% (tol 15%)");
    }
    report(4, "rate recovery from 2e4 self-sampled records", pass, detail);
}

TEST_CASE("leakage states earn their AIC complexity on simulated data") {
    // Ancilla-side leakage is only identifiable when a leaked streak outlives
    // the ordinary stuck-at-1 runs of the cumulative parity readout, so this
    // dataset simulates the regime the information criterion is meant to
    // separate: relaxation-dominated (asymmetric) ancilla flips and long-lived
    // leakage.  With symmetric flips and a seep rate equal to the flip scale,
    // the two explanations decay at the same per-round rate and the comparison
    // carries almost no information either way, even on model-consistent data.
    auto config = sim::default_config(Protocol::zz);
    config.rounds = 25;
    config.shots = 6000;
    config.seed = 505;
    config.rates.ancilla_flip = {0.001, 0.021, 0.044, 0.058};
    config.rates.anc_seep = 0.03;
    const auto records = sim::simulate_shots(config);

    trainer::FitOptions opts;
    opts.restarts = 2;
    opts.seed = 37;

    auto delta_for = [&](ModelId id) {
        trainer::Dataset data;
        data.reserve(records.size());
        for (const auto& r : records) data.push_back(models::encode_observations(id, r.m_a));
        const auto base = models::build_model(id);
        const auto full = trainer::fit(base, data, opts);
        const auto stripped = trainer::fit(models::strip_leakage(base, id), data, opts);
        // positive: the leakage-aware fit wins the information criterion
        return trainer::compare_models(full, stripped);
    };

    const double delta_data = delta_for(ModelId::zz_d);
    const double delta_anc = delta_for(ModelId::zz_a);
    const bool pass = delta_data > 0.0 && delta_anc > 0.0;
    report(5, "AIC prefers leakage over stripped refit", pass,
           "delta AIC data " + fmt(delta_data, 4) + ", ancilla " + fmt(delta_anc, 4) +
               " (both must be > 0)");
}

TEST_CASE("computational likelihood is calibrated on model-sampled data") {
    bool pass = true;
    double worst_pull = 0.0;
    long checked_bins = 0;
    for (const auto id : kFiveModels) {
        const auto spec = models::build_model(id);
        const int window = models::lcomp_window(id);
        const int length = 24;
        std::vector<double> scores;
        std::vector<bool> unleaked;
        scores.reserve(12000);
        unleaked.reserve(12000);
        for (int i = 0; i < 12000; ++i) {
            const auto seed = util::stream_seed(0xacc6 + static_cast<std::uint64_t>(id),
                                                static_cast<std::uint64_t>(i));
            const auto [states, obs] = hmm::sample_sequence(spec, length, seed);
            scores.push_back(models::computational_likelihood(spec, id, obs));
            bool leak = false;
            for (int t = length - window; t < length; ++t)
                leak = leak || spec.leaked[static_cast<std::size_t>(states[static_cast<std::size_t>(t)])];
            unleaked.push_back(!leak);
        }
        const auto table = analysis::calibration_from_scores(scores, unleaked, scores, 10);
        for (const auto& bin : table.bins) {
            if (bin.empty || bin.n_exp < 100) continue;
            const double var = std::max(bin.mean_score * (1.0 - bin.mean_score), 1e-12);
            const double sigma = std::sqrt(var / static_cast<double>(bin.n_exp));
            const double pull = std::abs(bin.unleaked_frac - bin.mean_score) / sigma;
            worst_pull = std::max(worst_pull, pull);
            pass = pass && pull <= 3.0;
            ++checked_bins;
        }
    }
    report(6, "score calibration, bins with >= 100 shots", pass,
           std::to_string(checked_bins) + " bins across five models, worst pull " +
               fmt(worst_pull, 3) + " sigma (gate 3 sigma)");
}

TEST_CASE("detection operating points and protocol ordering") {
    const auto dspec = models::build_model(ModelId::zz_d);
    const auto aspec = models::build_model(ModelId::zz_a);
    const auto d_choice = analysis::tune_threshold(zz_eval().pooled, dspec, ModelId::zz_d, 0.7);
    const auto a_choice = analysis::tune_threshold(zz_eval().pooled, aspec, ModelId::zz_a, 0.7);

    // Same error rates, same length: the four-outcome syndrome dilutes the
    // leakage signature, so the ZZXX data model must come out strictly worse.
    auto czz = sim::default_config(Protocol::zz);
    czz.shots = 20000;
    czz.seed = 4242;
    auto cxx = sim::default_config(Protocol::zzxx);
    cxx.shots = 20000;
    cxx.seed = 4242;
    cxx.rates = czz.rates;
    const double auc_zz = analysis::roc(sim::simulate_shots(czz), dspec, ModelId::zz_d).auc;
    const double auc_xx = analysis::roc(sim::simulate_shots(cxx),
                                        models::build_model(ModelId::zzxx_d), ModelId::zzxx_d)
                              .auc;

    const bool pass = d_choice.tpr >= 0.7 && d_choice.fpr <= 0.15 && a_choice.tpr >= 0.7 &&
                      a_choice.fpr <= 0.15 && auc_xx < auc_zz;
    report(7, "TPR 0.7 operating points and AUC ordering", pass,
           "zz_d fpr " + fmt(d_choice.fpr, 3) + ", zz_a fpr " + fmt(a_choice.fpr, 3) +
               " (gate 0.15); auc zz_d " + fmt(auc_zz, 4) + " > zzxx_d " + fmt(auc_xx, 4));
}

namespace {

struct FlatnessStudy {
    analysis::LineFit plain;
    analysis::LineFit mitigated;
    analysis::DecayFit decay;
    double mean_f_post = 0.0;
};

FlatnessStudy flatness(const Mixture& eval, const Mixture& tuning, ModelId id,
                       bool use_fidelity) {
    const auto spec = models::build_model(id);
    const auto choice = analysis::tune_threshold(tuning.pooled, spec, id, 0.7);

    analysis::DecodeStrategy plain;
    analysis::DecodeStrategy mitigated;
    mitigated.mitigation.push_back({id, spec, choice.threshold});

    auto extract = [&](const std::vector<analysis::CurvePoint>& points) {
        std::vector<double> x, y, s;
        for (const auto& p : points) {
            x.push_back(static_cast<double>(p.rounds));
            y.push_back(use_fidelity ? p.fidelity : p.zz);
            s.push_back(use_fidelity ? p.sem_fidelity : p.sem_zz);
        }
        return std::tuple{x, y, s};
    };

    FlatnessStudy out;
    const auto p0 = analysis::curves(eval.groups, plain);
    const auto p1 = analysis::curves(eval.groups, mitigated);
    const auto [x0, y0, s0] = extract(p0);
    const auto [x1, y1, s1] = extract(p1);
    out.plain = analysis::fit_line_weighted(x0, y0, s0);
    out.mitigated = analysis::fit_line_weighted(x1, y1, s1);
    out.decay = analysis::fit_decay(x0, y0);
    for (const auto& p : p1) out.mean_f_post += p.f_post;
    out.mean_f_post /= static_cast<double>(p1.size());
    return out;
}

} // namespace

TEST_CASE("postselection flattens the logical decay at acceptable cost") {
    const auto zz = flatness(zz_eval(), zz_tuning(), ModelId::zz_d, false);
    const auto xx = flatness(zzxx_eval(), zzxx_tuning(), ModelId::zzxx_d, true);

    // The plateau shape is asserted for ZZ, where the evaluation grid covers
    // the fast-decay region; the ZZXX gate is the flatness criterion (plus a
    // significant unmitigated decay, or flatness would be vacuous).
    auto ok = [](const FlatnessStudy& s, bool require_plateau) {
        const bool decays = s.plain.slope < -2.0 * s.plain.se_slope;
        const bool plateau = !require_plateau ||
                             (s.decay.converged && !s.decay.unidentifiable &&
                              s.decay.amplitude > 0.0 && s.decay.offset > 0.5);
        const bool flat = std::abs(s.mitigated.slope) <= 2.0 * s.mitigated.se_slope;
        return decays && plateau && flat && s.mean_f_post >= 0.75;
    };
    auto describe = [](const FlatnessStudy& s) {
        return "plain " + fmt(s.plain.slope, 3) + " (2se " + fmt(2.0 * s.plain.se_slope, 3) +
               "), plateau conv=" + std::to_string(s.decay.converged) +
               " uni=" + std::to_string(s.decay.unidentifiable) + " amp " +
               fmt(s.decay.amplitude, 3) + " off " + fmt(s.decay.offset, 3) + ", mitigated " +
               fmt(s.mitigated.slope, 3) + " (2se " + fmt(2.0 * s.mitigated.se_slope, 3) +
               "), f_post " + fmt(s.mean_f_post, 3);
    };

    const bool pass = ok(zz, true) && ok(xx, false);
    report(8, "decay flattened by TPR 0.7 postselection", pass,
           "zz: " + describe(zz) + "; zzxx: " + describe(xx) + "; gate f_post >= 0.75");
}

TEST_CASE("onset toy: log-odds slope matches the filter decay rate") {
    bool pass = true;
    double worst = 0.0;
    for (const double p : {0.02, 0.05, 0.1}) {
        for (const int n_a : {1, 2, 4}) {
            const auto toy = sim::leakage_onset_toy(p, n_a, 0.3, 12, 20000, 909);
            const double expected = n_a * std::log(1.0 / (2.0 * std::sqrt(p * (1.0 - p))));
            pass = pass && std::abs(toy.lambda - expected) <= 1e-12;
            const double rel = std::abs(-toy.fitted_slope - toy.lambda) / toy.lambda;
            worst = std::max(worst, rel);
            pass = pass && rel < 0.10;
        }
    }
    report(9, "onset-toy slope vs analytic rate", pass,
           "9 settings, worst |slope - lambda| / lambda = " + fmt(worst, 3) + " (tol 0.10)");
}

TEST_CASE("scalar two-state update shadows the filter under time budget") {
    util::Rng rng(0xacc10);
    double worst = 0.0;
    // One step of the scalar update must equal component 0 of a filter step
    // started from the same posterior.  Ten random rate draws, 1e4 random
    // (posterior, observation) steps each.
    auto log_uniform = [&rng]() {
        return std::exp(std::log(1e-3) + rng.uniform() * (std::log(0.3) - std::log(1e-3)));
    };
    for (int segment = 0; segment < 10; ++segment) {
        models::TwoStateRates r;
        r.p_leak = log_uniform();
        r.p_seep = log_uniform();
        r.p01 = log_uniform();
        r.p10 = log_uniform();

        auto spec = models::build_model(ModelId::simple_zz_d);
        spec.set_param("p_leak", r.p_leak);
        spec.set_param("p_seep", r.p_seep);
        spec.set_param("p01", r.p01);
        spec.set_param("p10", r.p10);
        const auto m = hmm::assemble(spec);

        hmm::FilterState state;
        state.posterior.resize(2);
        for (int t = 0; t < 10000; ++t) {
            const double post0 = rng.uniform();
            const int obs = static_cast<int>(rng.below(2));
            state.round = 1;
            state.posterior(0) = post0;
            state.posterior(1) = 1.0 - post0;
            hmm::forward_step_inplace(m, state, obs);
            const double scalar = models::online_two_state_update(post0, obs, r);
            worst = std::max(worst, std::abs(scalar - state.posterior(0)));
        }
    }

    std::vector<int> obs(100000);
    for (auto& o : obs) o = static_cast<int>(rng.below(2));
    const models::TwoStateRates timing_rates{0.0064, 0.108, 0.05, 0.155};
    std::vector<double> per_step;
    double sink = 0.0;
    for (int trial = 0; trial < 9; ++trial) {
        double p = 0.97;
        const auto start = std::chrono::steady_clock::now();
        for (const int o : obs) p = models::online_two_state_update(p, o, timing_rates);
        const auto stop = std::chrono::steady_clock::now();
        sink += p;
        per_step.push_back(std::chrono::duration<double, std::nano>(stop - start).count() /
                           static_cast<double>(obs.size()));
    }
    volatile double keep = sink;
    (void)keep;
    std::sort(per_step.begin(), per_step.end());
    const double median_ns = per_step[per_step.size() / 2];

    const bool pass = worst <= 1e-14 && median_ns < 100.0;
    report(10, "two-state recursion equivalence and speed", pass,
           "max |scalar - filter| = " + fmt(worst, 3) + " over 1e5 steps (tol 1e-14), median " +
               fmt(median_ns, 3) + " ns/step (budget 100)");
}

TEST_CASE("decay fits: exact recovery and error-bar coverage") {
    const double a0 = 0.55, u0 = 7.0, c0 = 0.25;
    std::vector<double> m, clean;
    for (int i = 1; i <= 16; ++i) {
        m.push_back(static_cast<double>(i));
        clean.push_back(a0 * std::exp(-static_cast<double>(i) / u0) + c0);
    }
    const auto exact = analysis::fit_decay(m, clean);
    const bool exact_ok = exact.converged && std::abs(exact.amplitude - a0) <= 1e-6 * a0 &&
                          std::abs(exact.upsilon - u0) <= 1e-6 * u0 &&
                          std::abs(exact.offset - c0) <= 1e-6 * c0;

    util::Rng rng(0xacc11);
    auto gauss = [&rng]() {
        const double u1 = std::max(rng.uniform(), 1e-300);
        const double u2 = rng.uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::acos(-1.0) * u2);
    };
    int fits = 0, cover_a = 0, cover_u = 0, cover_c = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> y(clean.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = clean[i] + 0.01 * gauss();
        const auto f = analysis::fit_decay(m, y);
        if (!f.converged || f.unidentifiable) continue;
        ++fits;
        cover_a += std::abs(f.amplitude - a0) <= f.se_amplitude;
        cover_u += std::abs(f.upsilon - u0) <= f.se_upsilon;
        cover_c += std::abs(f.offset - c0) <= f.se_offset;
    }
    auto in_band = [](int n) { return n >= 58 && n <= 78; };
    const bool pass =
        exact_ok && fits == 100 && in_band(cover_a) && in_band(cover_u) && in_band(cover_c);
    report(11, "decay fit recovery and 1-sigma coverage", pass,
           "noiseless rel err <= 1e-6: " + std::string(exact_ok ? "yes" : "no") + "; coverage " +
               std::to_string(cover_a) + "/" + std::to_string(cover_u) + "/" +
               std::to_string(cover_c) + " of " + std::to_string(fits) +
               " fits (band 58..78)");
}
