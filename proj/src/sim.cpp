#include "leakhmm/sim.hpp"

#include "leakhmm/errors.hpp"
#include "leakhmm/parallel.hpp"
#include "leakhmm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace leakhmm::sim {
namespace {

int bit_of(int eigenvalue) { return eigenvalue == 1 ? 0 : 1; }

// Which tracked pair eigenvalues an error on one qubit flips: X flips z,
// Z flips x, Y flips both.
struct Flips {
    bool flip_x = false;
    bool flip_z = false;
};

Flips sample_pauli(util::Rng& rng, const Rates& r) {
    const double u = rng.uniform();
    Flips f;
    if (u < r.data_x) {
        f.flip_z = true;
    } else if (u < r.data_x + r.data_y) {
        f.flip_x = true;
        f.flip_z = true;
    } else if (u < r.data_x + r.data_y + r.data_z) {
        f.flip_x = true;
    }
    return f;
}

} // namespace

ExperimentConfig default_config(models::Protocol protocol) {
    ExperimentConfig c;
    c.protocol = protocol;
    if (protocol == models::Protocol::zzxx) {
        c.rounds = 26;
        c.rates.ancilla_flip = {0.001, 0.021, 0.044, 0.058};
        c.rates.data_seep = 0.103;
    }
    return c;
}

void validate(const ExperimentConfig& config) {
    const Rates& r = config.rates;
    const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (const double v : {r.data_x, r.data_y, r.data_z, r.readout_flip, r.data_leak, r.data_seep,
                           r.anc_leak, r.anc_seep})
        if (!in01(v)) throw SpecError("rate outside [0, 1]");
    for (const double v : r.ancilla_flip)
        if (!in01(v)) throw SpecError("rate outside [0, 1]");
    if (r.data_x + r.data_y + r.data_z > 1.0) throw SpecError("data Pauli rates sum above 1");
    if (config.rounds < 1) throw SpecError("rounds must be at least 1");
    if (config.shots < 1) throw SpecError("shots must be at least 1");
}

ShotRecord simulate_run(const ExperimentConfig& config, std::uint64_t seed,
                        const ForcedEvents& forced) {
    validate(config);
    if (config.protocol == models::Protocol::idling_dd)
        throw SpecError("simulate_run requires a parity-check protocol");
    const int rounds = config.rounds;
    const bool zzxx = config.protocol == models::Protocol::zzxx;
    const Rates& r = config.rates;

    util::Rng rng(seed);
    ShotRecord rec;
    rec.protocol = config.protocol;
    rec.m_a.resize(static_cast<std::size_t>(rounds));
    rec.dh_leaked.resize(static_cast<std::size_t>(rounds));
    rec.dl_leaked.resize(static_cast<std::size_t>(rounds));
    rec.anc_leaked.resize(static_cast<std::size_t>(rounds));

    // |++> pins X(x)X; the first check projects the Z parity.
    int ex = 1;
    int ez = rng.pm_one();
    rec.first_projection = ez;

    bool dh = false, dl = false, anc = false;
    int a = 0;         // ancilla level carried between rounds
    int s_single = 0;  // surviving qubit's Z bit while exactly one data qubit is leaked
    int echo_t = 0;    // echo-induced alternation of the effective stabilizer

    for (int m = 0; m < rounds; ++m) {
        // (1) data Pauli errors; a leaked qubit has no Pauli frame to err in
        for (int q = 0; q < 2; ++q) {
            if (q == 0 ? dh : dl) continue;
            const Flips f = sample_pauli(rng, r);
            if (dh || dl) {
                if (f.flip_z) s_single ^= 1;  // X or Y on the survivor
            } else {
                if (f.flip_x) ex = -ex;
                if (f.flip_z) ez = -ez;
            }
        }

        // (2) leakage / seepage
        const bool data_was_leaked = dh || dl;
        const bool anc_was_leaked = anc;
        const auto step_leak = [&](bool& flag, double leak, double seep, int force_leak,
                                   int force_seep) {
            if (!flag) {
                if (m == force_leak) {
                    flag = true;
                    return;
                }
                if (leak > 0.0 && rng.bernoulli(leak)) flag = true;
            } else {
                if (m == force_seep) {
                    flag = false;
                    return;
                }
                if (seep > 0.0 && rng.bernoulli(seep)) flag = false;
            }
        };
        const bool dh_before = dh, dl_before = dl;
        step_leak(dh, r.data_leak, r.data_seep, forced.data_leak_round, forced.data_seep_round);
        step_leak(dl, r.data_leak, r.data_seep, -1, -1);
        step_leak(anc, r.anc_leak, r.anc_seep, forced.anc_leak_round, forced.anc_seep_round);
        if ((dh_before && !dh) || (dl_before && !dl)) {
            // a returned qubit comes back in a fresh state
            if (!dh && !dl) {
                ex = rng.pm_one();
                ez = rng.pm_one();
            } else {
                s_single = rng.bernoulli(0.5) ? 1 : 0;
            }
        }
        if (!data_was_leaked && (dh || dl)) {
            // entering the leaked regime projects the surviving qubit
            s_single = rng.bernoulli(0.5) ? 1 : 0;
            echo_t = 0;
        }
        if (anc_was_leaked && !anc) a = 1;  // |2> decays into |1>

        rec.dh_leaked[static_cast<std::size_t>(m)] = dh;
        rec.dl_leaked[static_cast<std::size_t>(m)] = dl;
        rec.anc_leaked[static_cast<std::size_t>(m)] = anc;

        // (3) ancilla update a <- a + s, with the leaked-data overrides
        int outcome_bit;
        if (anc) {
            outcome_bit = 1;  // a leaked ancilla reads -1
        } else {
            int s_used;
            if (dh || dl) {
                if (zzxx || (dh && dl)) {
                    // non-commuting checks (or no surviving qubit): fair coin
                    s_used = rng.bernoulli(0.5) ? 1 : 0;
                } else {
                    s_used = s_single ^ (config.echo_enabled ? echo_t : 0);
                    if (config.echo_enabled) echo_t ^= 1;
                }
            } else {
                s_used = zzxx && (m % 2 == 1) ? bit_of(ex) : bit_of(ez);
            }
            const int expected = (a + s_used) % 2;
            // (4) asymmetric ancilla flip, conditioned on (previous, expected)
            const double flip = r.ancilla_flip[static_cast<std::size_t>(a * 2 + expected)];
            a = (flip > 0.0 && rng.bernoulli(flip)) ? 1 - expected : expected;
            outcome_bit = a;
        }

        // (5) readout flip on the reported value only
        int reported = outcome_bit;
        if (r.readout_flip > 0.0 && rng.bernoulli(r.readout_flip)) reported ^= 1;
        rec.m_a[static_cast<std::size_t>(m)] = reported ? -1 : 1;
    }

    rec.depolarized = dh || dl || anc;
    const int declared_z = rec.m_a[0];
    const int declared_x = zzxx && rounds >= 2 ? rec.m_a[0] * rec.m_a[1] : 1;
    rec.frame_x = ex * declared_x;
    rec.frame_z = ez * declared_z;
    return rec;
}

std::vector<ShotRecord> simulate_shots(const ExperimentConfig& config, int workers) {
    validate(config);
    if (config.protocol == models::Protocol::idling_dd)
        throw SpecError("simulate_shots requires a parity-check protocol");
    std::vector<ShotRecord> out(static_cast<std::size_t>(config.shots));
    util::parallel_for(config.shots, workers, [&](long i) {
        out[static_cast<std::size_t>(i)] =
            simulate_run(config, util::stream_seed(config.seed, static_cast<std::uint64_t>(i)));
    });
    return out;
}

DatasetSummary summarize(const std::vector<ShotRecord>& records) {
    DatasetSummary s;
    s.shots = static_cast<long>(records.size());
    if (records.empty()) return s;
    const std::size_t rounds = records.front().m_a.size();
    s.data_leak_fraction.assign(rounds, 0.0);
    s.anc_leak_fraction.assign(rounds, 0.0);
    long even = 0, depol = 0;
    for (const auto& rec : records) {
        for (std::size_t m = 0; m < rounds; ++m) {
            if (rec.dh_leaked[m] || rec.dl_leaked[m]) s.data_leak_fraction[m] += 1.0;
            if (rec.anc_leaked[m]) s.anc_leak_fraction[m] += 1.0;
        }
        if (rec.m_a[0] == 1) ++even;
        if (rec.depolarized) ++depol;
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    for (auto& v : s.data_leak_fraction) v *= inv;
    for (auto& v : s.anc_leak_fraction) v *= inv;
    s.even_projection_fraction = static_cast<double>(even) * inv;
    s.depolarized_fraction = static_cast<double>(depol) * inv;
    return s;
}

IdlingCurve simulate_idling(const ExperimentConfig& config, int workers) {
    validate(config);
    if (config.protocol != models::Protocol::idling_dd)
        throw SpecError("simulate_idling requires the idling protocol");
    const int rounds = config.rounds;
    const long shots = config.shots;
    const std::size_t points = static_cast<std::size_t>(rounds) + 1;
    std::vector<long> sx(points, 0), sz(points, 0), sy(points, 0);
    std::mutex mx;
    constexpr long kBlock = 4096;
    const long nblocks = (shots + kBlock - 1) / kBlock;
    util::parallel_for(nblocks, workers, [&](long b) {
        std::vector<long> lx(points, 0), lz(points, 0), ly(points, 0);
        const long lo = b * kBlock, hi = std::min(shots, lo + kBlock);
        for (long i = lo; i < hi; ++i) {
            util::Rng rng(config.seed, static_cast<std::uint64_t>(i));
            int x = 1, z = 1;
            lx[0] += x;
            lz[0] += z;
            ly[0] -= x * z;
            for (std::size_t m = 1; m < points; ++m) {
                for (int q = 0; q < 2; ++q) {
                    const Flips f = sample_pauli(rng, config.rates);
                    if (f.flip_x) x = -x;
                    if (f.flip_z) z = -z;
                }
                lx[m] += x;
                lz[m] += z;
                ly[m] -= x * z;
            }
        }
        const std::lock_guard<std::mutex> lock(mx);  // integer sums commute exactly
        for (std::size_t m = 0; m < points; ++m) {
            sx[m] += lx[m];
            sz[m] += lz[m];
            sy[m] += ly[m];
        }
    });
    IdlingCurve curve;
    curve.xx.resize(points);
    curve.zz.resize(points);
    curve.yy.resize(points);
    const double inv = 1.0 / static_cast<double>(shots);
    for (std::size_t m = 0; m < points; ++m) {
        curve.xx[m] = static_cast<double>(sx[m]) * inv;
        curve.zz[m] = static_cast<double>(sz[m]) * inv;
        curve.yy[m] = static_cast<double>(sy[m]) * inv;
    }
    return curve;
}

OnsetToy leakage_onset_toy(double p, int n_a, double p_leak, int rounds, long shots,
                           std::uint64_t seed) {
    if (!(p > 0.0 && p < 0.5)) throw SpecError("onset toy requires p in (0, 0.5)");
    if (n_a < 1) throw SpecError("onset toy requires at least one neighboring check");
    if (!(p_leak > 0.0 && p_leak < 1.0)) throw SpecError("onset toy requires p_leak in (0, 1)");
    if (rounds < 1) throw SpecError("onset toy requires rounds >= 1");
    if (shots < 1) throw SpecError("onset toy requires shots >= 1");

    OnsetToy out;
    out.lambda = n_a * std::log(1.0 / (2.0 * std::sqrt(p * (1.0 - p))));
    out.amplitude = (1.0 - p_leak) / p_leak;
    const double log_a = std::log(out.amplitude);
    const double lr1 = std::log(p / 0.5);
    const double lr0 = std::log((1.0 - p) / 0.5);

    const std::size_t points = static_cast<std::size_t>(rounds) + 1;
    std::vector<double> sum_llr(points, 0.0), sum_l(points, 0.0);
    long leaked = 0;
    for (long i = 0; i < shots; ++i) {
        util::Rng rng(seed, static_cast<std::uint64_t>(i));
        if (!rng.bernoulli(p_leak)) continue;  // averages run over leaked shots
        ++leaked;
        double llr = log_a;
        sum_llr[0] += llr;
        sum_l[0] += 1.0 / (1.0 + std::exp(-llr));
        for (std::size_t m = 1; m < points; ++m) {
            for (int k = 0; k < n_a; ++k) llr += rng.bernoulli(0.5) ? lr1 : lr0;
            sum_llr[m] += llr;
            sum_l[m] += 1.0 / (1.0 + std::exp(-llr));
        }
    }
    if (leaked == 0) throw NumericError("no leaked shots sampled; raise shots or p_leak");
    out.leaked_shots = leaked;
    out.mean_log_odds.resize(points);
    out.mean_l.resize(points);
    out.analytic.resize(points);
    const double inv = 1.0 / static_cast<double>(leaked);
    for (std::size_t m = 0; m < points; ++m) {
        out.mean_log_odds[m] = sum_llr[m] * inv;
        out.mean_l[m] = sum_l[m] * inv;
        out.analytic[m] = out.amplitude * std::exp(-out.lambda * static_cast<double>(m));
    }

    // least-squares slope of the mean log-odds, which is linear in m
    const double n = static_cast<double>(points);
    const double mbar = 0.5 * static_cast<double>(rounds);
    double sxy = 0.0, sxx = 0.0, ybar = 0.0;
    for (std::size_t m = 0; m < points; ++m) ybar += out.mean_log_odds[m];
    ybar /= n;
    for (std::size_t m = 0; m < points; ++m) {
        const double dm = static_cast<double>(m) - mbar;
        sxy += dm * (out.mean_log_odds[m] - ybar);
        sxx += dm * dm;
    }
    out.fitted_slope = sxy / sxx;
    return out;
}

} // namespace leakhmm::sim
