#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "leakhmm/analysis.hpp"
#include "leakhmm/errors.hpp"
#include "leakhmm/hmm.hpp"
#include "leakhmm/models.hpp"
#include "leakhmm/rng.hpp"
#include "leakhmm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace leakhmm;
using analysis::DecodeStrategy;
using models::ModelId;
using models::Protocol;

namespace {

sim::ShotRecord make_rec(Protocol p, std::vector<int> m_a) {
    sim::ShotRecord rec;
    rec.protocol = p;
    const auto n = m_a.size();
    rec.m_a = std::move(m_a);
    rec.dh_leaked.assign(n, false);
    rec.dl_leaked.assign(n, false);
    rec.anc_leaked.assign(n, false);
    rec.frame_x = rec.frame_z = 1;
    rec.depolarized = false;
    rec.first_projection = 1;
    return rec;
}

DecodeStrategy plain(DecodeStrategy::Kind kind) {
    DecodeStrategy s;
    s.kind = kind;
    return s;
}

std::vector<std::vector<sim::ShotRecord>> simulate_groups(Protocol p,
                                                          const std::vector<int>& lengths,
                                                          int shots, std::uint64_t seed) {
    std::vector<std::vector<sim::ShotRecord>> groups;
    for (const int m : lengths) {
        auto c = sim::default_config(p);
        c.rounds = m;
        c.shots = shots;
        c.seed = seed + static_cast<std::uint64_t>(m);
        groups.push_back(sim::simulate_shots(c));
    }
    return groups;
}

} // namespace

TEST_CASE("decode declarations match the closing-outcome parity rules") {
    // even parity at the end: no flip
    auto rec = make_rec(Protocol::zz, {1, -1, -1, 1, 1});
    auto d = analysis::decode(rec, plain(DecodeStrategy::Kind::final));
    CHECK(d.accepted);
    CHECK(!d.flip_z);
    CHECK(!d.flip_x);

    // odd parity at the end: flip
    rec = make_rec(Protocol::zz, {1, 1, 1, 1, -1});
    d = analysis::decode(rec, plain(DecodeStrategy::Kind::final));
    CHECK(d.flip_z);

    // first declares from the opening outcome
    d = analysis::decode(rec, plain(DecodeStrategy::Kind::first));
    CHECK(!d.flip_z);
    rec = make_rec(Protocol::zz, {-1, 1, 1, 1, 1});
    d = analysis::decode(rec, plain(DecodeStrategy::Kind::first));
    CHECK(d.flip_z);

    // no_error: accept/reject only, never a correction
    rec = make_rec(Protocol::zz, {1, 1, 1, 1, 1});
    d = analysis::decode(rec, plain(DecodeStrategy::Kind::no_error));
    CHECK(d.accepted);
    CHECK(!d.flip_z);
    rec = make_rec(Protocol::zz, {1, 1, -1, 1, 1});
    d = analysis::decode(rec, plain(DecodeStrategy::Kind::no_error));
    CHECK(!d.accepted);
}

TEST_CASE("no_error acceptance matches the syndrome being all clear") {
    util::Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> m_a(8);
        for (auto& v : m_a) v = rng.bernoulli(0.5) ? 1 : -1;
        const auto rec = make_rec(Protocol::zz, m_a);
        const auto d = analysis::decode(rec, plain(DecodeStrategy::Kind::no_error));
        bool clear = true;
        for (std::size_t m = 2; m < m_a.size(); ++m)
            if (m_a[m] * m_a[m - 2] != 1) clear = false;
        CHECK(d.accepted == clear);
    }
}

TEST_CASE("final-strategy output depends only on the closing outcomes") {
    util::Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> a(9), b(9);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.bernoulli(0.5) ? 1 : -1;
            b[i] = rng.bernoulli(0.5) ? 1 : -1;
        }
        for (std::size_t i = 7; i < 9; ++i) b[i] = a[i];
        const auto da = analysis::decode(make_rec(Protocol::zz, a),
                                         plain(DecodeStrategy::Kind::final));
        const auto db = analysis::decode(make_rec(Protocol::zz, b),
                                         plain(DecodeStrategy::Kind::final));
        CHECK(da.flip_z == db.flip_z);

        std::vector<int> c(9), e(9);
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] = rng.bernoulli(0.5) ? 1 : -1;
            e[i] = rng.bernoulli(0.5) ? 1 : -1;
        }
        for (std::size_t i = 6; i < 9; ++i) e[i] = c[i];
        const auto dc = analysis::decode(make_rec(Protocol::zzxx, c),
                                         plain(DecodeStrategy::Kind::final));
        const auto de = analysis::decode(make_rec(Protocol::zzxx, e),
                                         plain(DecodeStrategy::Kind::final));
        CHECK(dc.flip_z == de.flip_z);
        CHECK(dc.flip_x == de.flip_x);
    }
}

TEST_CASE("decode rejects records shorter than the strategy needs") {
    CHECK_THROWS_AS(analysis::decode(make_rec(Protocol::zz, {1}),
                                     plain(DecodeStrategy::Kind::final)),
                    SpecError);
    CHECK_THROWS_AS(analysis::decode(make_rec(Protocol::zz, {1, 1}),
                                     plain(DecodeStrategy::Kind::no_error)),
                    SpecError);
    CHECK_THROWS_AS(analysis::decode(make_rec(Protocol::zzxx, {1, 1}),
                                     plain(DecodeStrategy::Kind::final)),
                    SpecError);
    CHECK_THROWS_AS(analysis::decode(make_rec(Protocol::zzxx, {1}),
                                     plain(DecodeStrategy::Kind::first)),
                    SpecError);
    CHECK_NOTHROW(analysis::decode(make_rec(Protocol::zz, {1, 1}),
                                   plain(DecodeStrategy::Kind::final)));
}

TEST_CASE("decode applies mitigation thresholds") {
    DecodeStrategy s = plain(DecodeStrategy::Kind::final);
    analysis::Mitigation mit;
    mit.model = ModelId::simple_zz_d;
    mit.spec = models::build_model(ModelId::simple_zz_d);
    mit.threshold = 0.5;
    s.mitigation.push_back(mit);

    auto c = sim::default_config(Protocol::zz);
    c.rounds = 12;
    c.rates = sim::Rates{};
    c.rates.data_x = c.rates.data_y = c.rates.data_z = 0.0;
    c.rates.ancilla_flip = {0.0, 0.0, 0.0, 0.0};
    c.rates.readout_flip = 0.0;
    c.rates.data_leak = c.rates.data_seep = 0.0;
    c.rates.anc_leak = c.rates.anc_seep = 0.0;

    const auto clean = sim::simulate_run(c, 3);
    CHECK(analysis::decode(clean, s).accepted);

    sim::ForcedEvents forced;
    forced.data_leak_round = 3;
    const auto leaky = sim::simulate_run(c, 3, forced);
    CHECK(!analysis::decode(leaky, s).accepted);

    // protocol mismatch between mitigation model and record
    const auto zzxx_rec = make_rec(Protocol::zzxx, {1, 1, 1, 1, 1, 1});
    CHECK_THROWS_WITH_AS(analysis::decode(zzxx_rec, s),
                         doctest::Contains("protocol"), SpecError);
}

TEST_CASE("curves on noiseless data: unit fidelity everywhere") {
    for (const auto protocol : {Protocol::zz, Protocol::zzxx}) {
        std::vector<std::vector<sim::ShotRecord>> groups;
        for (const int rounds : {5, 9, 16}) {
            auto c = sim::default_config(protocol);
            c.rounds = rounds;
            c.shots = 200;
            c.rates = sim::Rates{};
            c.rates.data_x = c.rates.data_y = c.rates.data_z = 0.0;
            c.rates.ancilla_flip = {0.0, 0.0, 0.0, 0.0};
            c.rates.readout_flip = 0.0;
            c.rates.data_leak = c.rates.data_seep = 0.0;
            c.rates.anc_leak = c.rates.anc_seep = 0.0;
            groups.push_back(sim::simulate_shots(c));
        }
        for (const auto kind : {DecodeStrategy::Kind::first, DecodeStrategy::Kind::final,
                                DecodeStrategy::Kind::no_error}) {
            const auto pts = analysis::curves(groups, plain(kind));
            REQUIRE(pts.size() == 3);
            for (const auto& pt : pts) {
                CHECK(pt.f_post == 1.0);
                CHECK(pt.xx == 1.0);
                CHECK(pt.zz == 1.0);
                CHECK(pt.yy == -1.0);
                CHECK(pt.fidelity == 1.0);
                CHECK(pt.sem_zz == 0.0);
            }
        }
    }
}

TEST_CASE("curves under realistic noise: decay, plateaus, and strategy ordering") {
    const auto groups = simulate_groups(Protocol::zz, {3, 6, 10, 15, 20, 25}, 4000, 11);

    const auto final_pts = analysis::curves(groups, plain(DecodeStrategy::Kind::final), 2);
    const auto first_pts = analysis::curves(groups, plain(DecodeStrategy::Kind::first));
    const auto clean_pts = analysis::curves(groups, plain(DecodeStrategy::Kind::no_error));

    // errors accumulate against the opening declaration, so `first` falls
    // well below `final` at long M, and `final` itself decays as leakage
    // builds toward its steady state
    CHECK(first_pts.back().zz < final_pts.back().zz - 0.1);
    CHECK(final_pts.front().zz > final_pts.back().zz + 0.03);

    std::vector<double> m, zz, sem;
    for (const auto& pt : final_pts) {
        m.push_back(pt.rounds);
        zz.push_back(pt.zz);
        sem.push_back(pt.sem_zz);
    }
    const auto fit = analysis::fit_decay(m, zz);
    CHECK(fit.converged);
    CHECK(fit.upsilon > 1.0);
    CHECK(fit.amplitude > 0.0);

    // postselecting on a silent syndrome keeps the correlator flat
    std::vector<double> cm, cz, cs;
    for (const auto& pt : clean_pts) {
        cm.push_back(pt.rounds);
        cz.push_back(pt.zz);
        cs.push_back(std::max(pt.sem_zz, 1e-6));
        CHECK(pt.f_post < 1.0);
    }
    const auto line = analysis::fit_line_weighted(cm, cz, cs);
    CHECK(std::abs(line.slope) <= 3.0 * line.se_slope);
    // and pays with a postselected fraction that shrinks with M
    CHECK(clean_pts.back().f_post < clean_pts.front().f_post);

    // input validation
    CHECK_THROWS_AS(analysis::curves({}, plain(DecodeStrategy::Kind::final)), SpecError);
    CHECK_THROWS_AS(analysis::curves({{}}, plain(DecodeStrategy::Kind::final)), SpecError);
    auto mixed = groups.front();
    mixed.push_back(groups.back().front());
    CHECK_THROWS_WITH_AS(analysis::curves({mixed}, plain(DecodeStrategy::Kind::final)),
                         doctest::Contains("mixes"), SpecError);
}

TEST_CASE("fit_decay recovers exact parameters and flags flat input") {
    std::vector<double> m, y;
    for (int i = 0; i <= 20; ++i) {
        m.push_back(i);
        y.push_back(0.9 * std::exp(-i / 9.0) + 0.05);
    }
    const auto fit = analysis::fit_decay(m, y);
    CHECK(fit.converged);
    CHECK(!fit.unidentifiable);
    CHECK(fit.amplitude == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(fit.upsilon == doctest::Approx(9.0).epsilon(1e-6));
    CHECK(fit.offset == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(fit.rss < 1e-12);

    std::vector<double> flat(m.size(), 0.42);
    const auto ffit = analysis::fit_decay(m, flat);
    CHECK(ffit.unidentifiable);
    CHECK(std::abs(ffit.amplitude) < 1e-6);
    CHECK(ffit.offset == doctest::Approx(0.42).epsilon(1e-9));
    CHECK(ffit.upsilon > 0.0);

    CHECK_THROWS_AS(analysis::fit_decay(std::vector<double>{0, 1, 2},
                                        std::vector<double>{1, 2, 3}),
                    SpecError);
}

TEST_CASE("fit_decay standard errors cover the truth at roughly 1 sigma") {
    std::vector<double> m;
    for (int i = 0; i <= 20; ++i) m.push_back(i);
    int covered = 0;
    util::Rng rng(5);
    const int reps = 40;
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<double> y;
        for (const double mi : m) {
            const double noise = 0.01 * std::sqrt(-2.0 * std::log(rng.uniform())) *
                                 std::cos(6.283185307179586 * rng.uniform());
            y.push_back(0.9 * std::exp(-mi / 9.0) + 0.05 + noise);
        }
        const auto fit = analysis::fit_decay(m, y);
        REQUIRE(fit.converged);
        CHECK(fit.se_upsilon > 0.0);
        if (std::abs(fit.upsilon - 9.0) <= fit.se_upsilon) ++covered;
    }
    // 68% nominal coverage; loose bounds for 40 replicates
    CHECK(covered >= reps * 2 / 5);
    CHECK(covered <= reps * 19 / 20);
}

TEST_CASE("weighted line fit: exact line, known errors, input checks") {
    const std::vector<double> x{0, 1, 2, 3}, y{2, 5, 8, 11}, s{1, 1, 1, 1};
    const auto fit = analysis::fit_line_weighted(x, y, s);
    CHECK(fit.slope == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(2.0).epsilon(1e-12));

    const std::vector<double> x2{0, 1}, y2{0, 1}, s2{1, 1};
    const auto two = analysis::fit_line_weighted(x2, y2, s2);
    CHECK(two.se_slope == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(analysis::fit_line_weighted(x2, y2, std::vector<double>{1, 0}), SpecError);
    CHECK_THROWS_AS(analysis::fit_line_weighted(std::vector<double>{1, 1},
                                                std::vector<double>{1, 2},
                                                std::vector<double>{1, 1}),
                    SpecError);
    CHECK_THROWS_AS(analysis::fit_line_weighted(std::vector<double>{1}, std::vector<double>{1},
                                                std::vector<double>{1}),
                    SpecError);
}

TEST_CASE("roc staircase oracle") {
    const std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
    const std::vector<bool> positive{true, false, true, false};
    const auto curve = analysis::roc_from_scores(scores, positive);
    REQUIRE(curve.points.size() == 5);
    CHECK(curve.points.front().fpr == 0.0);
    CHECK(curve.points.front().tpr == 0.0);
    CHECK(curve.points[1].threshold == 0.2);
    CHECK(curve.points[1].tpr == 0.5);
    CHECK(curve.points[1].fpr == 0.0);
    CHECK(curve.points[3].tpr == 1.0);
    CHECK(curve.points[3].fpr == 0.5);
    CHECK(curve.points.back().fpr == 1.0);
    CHECK(curve.points.back().tpr == 1.0);
    CHECK(curve.auc == doctest::Approx(0.75).epsilon(1e-12));

    // perfectly separable scores pass through (0, 1)
    const auto sep = analysis::roc_from_scores(std::vector<double>{0.1, 0.2, 0.8, 0.9},
                                               std::vector<bool>{true, true, false, false});
    bool hits_corner = false;
    for (const auto& pt : sep.points)
        if (pt.fpr == 0.0 && pt.tpr == 1.0) hits_corner = true;
    CHECK(hits_corner);
    CHECK(sep.auc == doctest::Approx(1.0).epsilon(1e-12));

    // all-tied scores collapse to the diagonal endpoints
    const auto tied = analysis::roc_from_scores(std::vector<double>{0.5, 0.5, 0.5, 0.5},
                                                std::vector<bool>{true, false, true, false});
    CHECK(tied.points.size() == 2);
    CHECK(tied.auc == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(analysis::roc_from_scores(std::vector<double>{0.5, 0.6},
                                                   std::vector<bool>{true, true}),
                         doctest::Contains("both"), SpecError);
}

TEST_CASE("roc on random scores is diagonal; monotonicity holds") {
    util::Rng rng(31);
    const int n = 10000;
    std::vector<double> scores(n);
    std::vector<bool> positive(n);
    for (int i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] = rng.uniform();
        positive[static_cast<std::size_t>(i)] = rng.bernoulli(0.5);
    }
    const auto curve = analysis::roc_from_scores(scores, positive);
    CHECK(std::abs(curve.auc - 0.5) < 0.02);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
        CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    }
}

TEST_CASE("truth labels cover exactly the model's trailing window") {
    auto rec = make_rec(Protocol::zz, {1, 1, 1, 1, 1});
    rec.dl_leaked[4] = true;   // either data qubit counts for the data role
    CHECK(analysis::truth_leaked(rec, ModelId::zz_d));
    CHECK(!analysis::truth_leaked(rec, ModelId::zz_a));

    rec = make_rec(Protocol::zz, {1, 1, 1, 1, 1});
    rec.dh_leaked[3] = true;   // outside the 1-round data window
    CHECK(!analysis::truth_leaked(rec, ModelId::zz_d));

    rec = make_rec(Protocol::zz, {1, 1, 1, 1, 1});
    rec.anc_leaked[3] = true;   // inside the 2-round ancilla window
    CHECK(analysis::truth_leaked(rec, ModelId::zz_a));
    rec.anc_leaked[3] = false;
    rec.anc_leaked[2] = true;
    CHECK(!analysis::truth_leaked(rec, ModelId::zz_a));

    rec = make_rec(Protocol::zzxx, {1, 1, 1, 1, 1, 1});
    rec.anc_leaked[3] = true;   // inside the 3-round zzxx ancilla window
    CHECK(analysis::truth_leaked(rec, ModelId::zzxx_a));
    CHECK(!analysis::truth_leaked(rec, ModelId::zzxx_d));
}

TEST_CASE("detection on simulated data: tuning, postselection, scores") {
    auto c = sim::default_config(Protocol::zz);
    c.shots = 8000;
    c.seed = 21;
    const auto records = sim::simulate_shots(c);
    const auto spec = models::build_model(ModelId::zz_d);

    // scores agree with the one-shot entry point
    const auto scores = analysis::comp_scores(records, spec, ModelId::zz_d, 2);
    for (const std::size_t i : {std::size_t{0}, std::size_t{17}, std::size_t{4096}}) {
        const auto obs = models::encode_observations(ModelId::zz_d, records[i].m_a);
        CHECK(scores[i] ==
              models::computational_likelihood(spec, ModelId::zz_d, obs));
        CHECK(scores[i] >= 0.0);
        CHECK(scores[i] <= 1.0);
    }

    const auto choice =
        analysis::tune_threshold(records, spec, ModelId::zz_d, 0.7, 2);
    CHECK(choice.tpr >= 0.7);
    CHECK(choice.fpr < 0.3);

    // the chosen threshold is the smallest one reaching the target
    const auto curve = analysis::roc(records, spec, ModelId::zz_d, 2);
    CHECK(curve.auc > 0.75);
    for (const auto& pt : curve.points) {
        if (pt.threshold < choice.threshold) CHECK(pt.tpr < 0.7);
    }

    analysis::Mitigation mit;
    mit.model = ModelId::zz_d;
    mit.spec = spec;
    mit.threshold = choice.threshold;
    const auto kept = analysis::postselect(records, {mit}, 2);
    CHECK(kept.f_post > 0.5);
    CHECK(kept.f_post < 1.0);
    for (std::size_t i = 0; i < std::min<std::size_t>(kept.kept.size(), 50); ++i) {
        const auto obs = models::encode_observations(ModelId::zz_d, kept.kept[i].m_a);
        CHECK(models::computational_likelihood(spec, ModelId::zz_d, obs) >=
              mit.threshold);
    }

    // f_post is nonincreasing in the threshold
    double last = 1.0;
    for (const double th : {0.0, 0.3, 0.6, 0.9}) {
        mit.threshold = th;
        const auto ps = analysis::postselect(records, {mit}, 2);
        if (th == 0.0) CHECK(ps.f_post == 1.0);
        CHECK(ps.f_post <= last);
        last = ps.f_post;
    }
    mit.threshold = 1.5;
    CHECK_THROWS_WITH_AS(analysis::postselect(records, {mit}),
                         doctest::Contains("rejected every"), SpecError);
    CHECK_THROWS_AS(analysis::tune_threshold(records, spec, ModelId::zz_d, 1.5),
                    SpecError);
}

TEST_CASE("self-calibration: unleaked fraction tracks the score, all models") {
    for (const auto id : {ModelId::simple_zz_d, ModelId::zz_d, ModelId::zz_a,
                          ModelId::zzxx_d, ModelId::zzxx_a}) {
        const auto spec = models::build_model(id);
        const int window = models::lcomp_window(id);
        const auto mats = hmm::assemble(spec);
        const int len = 24;
        const int n = 12000;
        std::vector<double> scores(n);
        std::vector<bool> unleaked(n);
        for (int i = 0; i < n; ++i) {
            const auto [states, obs] =
                hmm::sample_sequence(spec, len, util::stream_seed(400 + long(id), i));
            scores[static_cast<std::size_t>(i)] = models::computational_likelihood(
                mats, spec.prior, spec.leaked, window, obs);
            bool clean = true;
            for (int k = 0; k < window; ++k)
                if (spec.leaked[static_cast<std::size_t>(
                        states[static_cast<std::size_t>(len - 1 - k)])])
                    clean = false;
            unleaked[static_cast<std::size_t>(i)] = clean;
        }
        const auto table = analysis::calibration_from_scores(scores, unleaked, scores, 10);
        REQUIRE(table.bins.size() == 10);
        int checked = 0;
        for (const auto& bin : table.bins) {
            if (bin.n_exp < 100) continue;
            ++checked;
            const double sigma = std::sqrt(
                std::max(bin.mean_score * (1.0 - bin.mean_score), 1e-9) /
                static_cast<double>(bin.n_exp));
            CHECK_MESSAGE(std::abs(bin.unleaked_frac - bin.mean_score) <=
                              3.0 * sigma + 1e-3,
                          "model ", static_cast<int>(id), " bin [", bin.lo, ",", bin.hi,
                          "): frac ", bin.unleaked_frac, " vs score ", bin.mean_score,
                          " n=", bin.n_exp);
        }
        CHECK(checked >= 1);
        CHECK(table.total_variation == 0.0);   // identical histograms by construction
    }
}

TEST_CASE("calibration of a model against union-simulator data") {
    auto c = sim::default_config(Protocol::zz);
    c.shots = 10000;
    c.seed = 33;
    const auto records = sim::simulate_shots(c);
    const auto spec = models::build_model(ModelId::zz_d);
    const auto table = analysis::calibration(records, spec, ModelId::zz_d, 10, 5, 2);
    REQUIRE(table.bins.size() == 10);
    long total = 0, total_model = 0;
    for (const auto& bin : table.bins) {
        total += bin.n_exp;
        total_model += bin.n_model;
        if (bin.empty) {
            CHECK(std::isnan(bin.unleaked_frac));
        } else {
            CHECK(bin.unleaked_frac >= 0.0);
            CHECK(bin.unleaked_frac <= 1.0);
        }
    }
    CHECK(total == 10000);
    CHECK(total_model == 10000);
    CHECK(table.total_variation < 0.08);
    // most of the mass sits near score 1 with high unleaked fraction
    CHECK(table.bins.back().n_exp > 8000);
    CHECK(table.bins.back().unleaked_frac > 0.95);

    // a leak-free model scoring leak-free data puts everything in the top bin
    auto clean_cfg = c;
    clean_cfg.shots = 2000;
    clean_cfg.rates.data_leak = 0.0;
    clean_cfg.rates.anc_leak = 0.0;
    const auto clean = sim::simulate_shots(clean_cfg);
    const auto stripped = models::strip_leakage(spec, ModelId::zz_d);
    const auto clean_table =
        analysis::calibration(clean, stripped, ModelId::zz_d, 10, 5, 2);
    CHECK(clean_table.bins.back().n_exp == 2000);
    CHECK(clean_table.bins.back().unleaked_frac == 1.0);

    CHECK_THROWS_AS(analysis::calibration(records, spec, ModelId::zz_d, 0), SpecError);
}

TEST_CASE("strategy names round-trip") {
    CHECK(analysis::strategy_from_string("first") == DecodeStrategy::Kind::first);
    CHECK(analysis::strategy_from_string("final") == DecodeStrategy::Kind::final);
    CHECK(analysis::strategy_from_string("no_error") == DecodeStrategy::Kind::no_error);
    CHECK(analysis::to_string(DecodeStrategy::Kind::final) == "final");
    CHECK_THROWS_AS(analysis::strategy_from_string("mwpm"), SpecError);
}
