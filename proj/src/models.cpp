#include "leakhmm/models.hpp"

#include "leakhmm/errors.hpp"

#include <cmath>

namespace leakhmm::models {

using hmm::Generator;
using hmm::HmmSpec;
using hmm::Matrix;
using hmm::Param;
using hmm::Side;
using hmm::Vector;

namespace {

// ---------------------------------------------------------------------------
// Two-state model: state 0 computational, state 1 leaked; output 0 = no error
// signal (+1), output 1 = error signal (-1).

HmmSpec build_simple(ModelId id) {
    HmmSpec s;
    s.name = to_string(id);
    s.state_labels = {"comp", "leaked"};
    s.output_labels = {"+1", "-1"};
    s.a0 = Matrix::Identity(2, 2);
    s.b0 = Matrix::Identity(2, 2);
    s.prior = Vector::Zero(2);
    s.prior(0) = 1.0;
    s.leaked = {false, true};

    Matrix leak(2, 2), seep(2, 2);
    leak << -1, 0, 1, 0;   // drains the computational column into leaked
    seep << 0, 1, 0, -1;   // drains the leaked column into computational
    s.generators.push_back({"p_leak", Side::transition, leak});
    s.generators.push_back({"p_seep", Side::transition, seep});
    s.generators.push_back({"p01", Side::output, leak}); // same shape: flips comp emission
    s.generators.push_back({"p10", Side::output, seep}); // flips leaked emission

    double p_leak = 0.0064, p_seep = 0.108, p01 = 0.050, p10 = 0.155;
    bool freeze_leak = false;
    switch (id) {
        case ModelId::simple_zz_d: break;
        case ModelId::simple_zz_a:
            p_leak = 0.0040; p_seep = 0.101; p01 = 0.040; p10 = 0.011;
            freeze_leak = true;
            break;
        case ModelId::simple_zzxx_d:
            p_leak = 0.0064; p_seep = 0.103; p01 = 0.060; p10 = 0.489;
            break;
        case ModelId::simple_zzxx_a:
            p_leak = 0.0040; p_seep = 0.101; p01 = 0.050; p10 = 0.027;
            freeze_leak = true;
            break;
        default: throw SpecError("not a two-state model");
    }
    s.params = {
        {"p_leak", p_leak, 0.0, 1.0, freeze_leak},
        {"p_seep", p_seep, 0.0, 1.0, false},
        {"p01", p01, 0.0, 1.0, false},
        {"p10", p10, 0.0, 1.0, false},
    };
    return s;
}

// ---------------------------------------------------------------------------
// ZZ data-qubit model: states (h0, h1), h0 = leaked flag, h1 = two-bit field
// of pending syndrome error signals (bit 0 fires this round, bit 1 next
// round).  Baseline dynamics shift the field right; an error channel whose
// physical signature flips the syndrome at round offsets in `mask` redirects
// the shifted field to (h1 >> 1) ^ mask.

int zzd_idx(int h0, int h1) { return h0 * 4 + h1; }

Matrix zzd_mask_generator(int h0, int mask) {
    Matrix d = Matrix::Zero(8, 8);
    for (int h1 = 0; h1 < 4; ++h1) {
        const int base = h1 >> 1;
        d(zzd_idx(h0, base), zzd_idx(h0, h1)) -= 1.0;
        d(zzd_idx(h0, base ^ mask), zzd_idx(h0, h1)) += 1.0;
    }
    return d;
}

HmmSpec build_zz_d() {
    HmmSpec s;
    s.name = "zz_d";
    for (int h0 = 0; h0 < 2; ++h0)
        for (int h1 = 0; h1 < 4; ++h1)
            s.state_labels.push_back((h0 ? "l" : "c") + std::to_string(h1));
    s.output_labels = {"+1", "-1"};
    s.leaked.assign(8, false);
    for (int h1 = 0; h1 < 4; ++h1) s.leaked[static_cast<std::size_t>(zzd_idx(1, h1))] = true;

    s.a0 = Matrix::Zero(8, 8);
    s.b0 = Matrix::Zero(2, 8);
    for (int h0 = 0; h0 < 2; ++h0) {
        for (int h1 = 0; h1 < 4; ++h1) {
            s.a0(zzd_idx(h0, h1 >> 1), zzd_idx(h0, h1)) = 1.0;
            s.b0((h0 + h1) & 1, zzd_idx(h0, h1)) = 1.0; // leakage flips the emitted sign
        }
    }
    s.prior = Vector::Zero(8);
    s.prior(0) = 1.0;

    // Persistent ancilla flip: signals this round and the next (mask 0b11).
    // Readout misreport: the prompt signal is shared with the output-side data
    // channel; the transition side carries the delayed signal (mask 0b10).
    Matrix d_anc = zzd_mask_generator(0, 3);
    Matrix d_anc_leaked = zzd_mask_generator(1, 3);
    Matrix d_readout = zzd_mask_generator(0, 2) + zzd_mask_generator(1, 2);

    Matrix d_leak = Matrix::Zero(8, 8);
    Matrix d_seep = Matrix::Zero(8, 8);
    for (int h1 = 0; h1 < 4; ++h1) {
        // First measurement after a leakage/seepage event is as likely to
        // carry an extra error signal as not.
        d_leak(zzd_idx(0, h1 >> 1), zzd_idx(0, h1)) -= 1.0;
        d_leak(zzd_idx(1, 0), zzd_idx(0, h1)) += 0.5;
        d_leak(zzd_idx(1, 1), zzd_idx(0, h1)) += 0.5;
        d_seep(zzd_idx(1, h1 >> 1), zzd_idx(1, h1)) -= 1.0;
        d_seep(zzd_idx(0, 0), zzd_idx(1, h1)) += 0.5;
        d_seep(zzd_idx(0, 1), zzd_idx(1, h1)) += 0.5;
    }

    Matrix d_data = Matrix::Zero(2, 8);
    Matrix d_data_leaked = Matrix::Zero(2, 8);
    for (int h1 = 0; h1 < 4; ++h1) {
        for (int h0 = 0; h0 < 2; ++h0) {
            const int emitted = (h0 + h1) & 1;
            Matrix& d = h0 ? d_data_leaked : d_data;
            d(emitted, zzd_idx(h0, h1)) -= 1.0;
            d(1 - emitted, zzd_idx(h0, h1)) += 1.0;
        }
    }

    s.generators = {
        {"p_ancilla", Side::transition, d_anc},
        {"p_readout", Side::transition, d_readout},
        {"p_ancilla_leaked", Side::transition, d_anc_leaked},
        {"p_leak", Side::transition, d_leak},
        {"p_seep", Side::transition, d_seep},
        {"p_data", Side::output, d_data},
        {"p_data_leaked", Side::output, d_data_leaked},
    };
    s.params = {
        {"p_ancilla", 0.030, 0.0, 1.0, false},
        {"p_readout", 0.004, 0.0, 1.0, false},
        {"p_ancilla_leaked", 0.113, 0.0, 1.0, false},
        {"p_leak", 0.0064, 0.0, 1.0, false},
        {"p_seep", 0.108, 0.0, 1.0, false},
        {"p_data", 0.050, 0.0, 1.0, false},
        {"p_data_leaked", 0.155, 0.0, 1.0, false},
    };
    return s;
}

// ---------------------------------------------------------------------------
// ZZXX data-qubit model: 16 computational states carrying a four-bit pending
// signal field plus a single leaked state.  The four-round syndrome gives a
// persistent ancilla flip the signature 0b0101, a readout misreport 0b1111
// and a data Y error 0b0011.

constexpr int kZzxxLeaked = 16;

Matrix zzxxd_mask_generator(int mask) {
    Matrix d = Matrix::Zero(17, 17);
    for (int h1 = 0; h1 < 16; ++h1) {
        const int base = h1 >> 1;
        d(base, h1) -= 1.0;
        d(base ^ mask, h1) += 1.0;
    }
    return d;
}

HmmSpec build_zzxx_d() {
    HmmSpec s;
    s.name = "zzxx_d";
    for (int h1 = 0; h1 < 16; ++h1) s.state_labels.push_back("c" + std::to_string(h1));
    s.state_labels.push_back("leaked");
    s.output_labels = {"+1", "-1"};
    s.leaked.assign(17, false);
    s.leaked[kZzxxLeaked] = true;

    s.a0 = Matrix::Zero(17, 17);
    s.b0 = Matrix::Zero(2, 17);
    for (int h1 = 0; h1 < 16; ++h1) {
        s.a0(h1 >> 1, h1) = 1.0;
        s.b0(h1 & 1, h1) = 1.0;
    }
    s.a0(kZzxxLeaked, kZzxxLeaked) = 1.0;
    s.b0(0, kZzxxLeaked) = 1.0; // leaked bias carried by p_data_leaked below
    s.prior = Vector::Zero(17);
    s.prior(0) = 1.0;

    Matrix d_leak = Matrix::Zero(17, 17);
    Matrix d_seep = Matrix::Zero(17, 17);
    for (int h1 = 0; h1 < 16; ++h1) {
        d_leak(h1 >> 1, h1) -= 1.0;
        d_leak(kZzxxLeaked, h1) += 1.0;
    }
    d_seep(kZzxxLeaked, kZzxxLeaked) -= 1.0;
    d_seep(0, kZzxxLeaked) += 0.5; // no pending signal
    d_seep(1, kZzxxLeaked) += 0.5; // one pending signal

    Matrix d_data = Matrix::Zero(2, 17);
    for (int h1 = 0; h1 < 16; ++h1) {
        d_data(h1 & 1, h1) -= 1.0;
        d_data(1 - (h1 & 1), h1) += 1.0;
    }
    Matrix d_data_leaked = Matrix::Zero(2, 17);
    d_data_leaked(0, kZzxxLeaked) = -1.0;
    d_data_leaked(1, kZzxxLeaked) = 1.0;

    s.generators = {
        {"p_ancilla", Side::transition, zzxxd_mask_generator(5)},
        {"p_readout", Side::transition, zzxxd_mask_generator(15)},
        {"p_data_y", Side::transition, zzxxd_mask_generator(3)},
        {"p_leak", Side::transition, d_leak},
        {"p_seep", Side::transition, d_seep},
        {"p_data", Side::output, d_data},
        {"p_data_leaked", Side::output, d_data_leaked},
    };
    s.params = {
        {"p_ancilla", 0.029, 0.0, 1.0, false},
        {"p_readout", 0.014, 0.0, 1.0, false},
        {"p_data_y", 0.014, 0.0, 1.0, false},
        {"p_leak", 0.0064, 0.0, 1.0, false},
        {"p_seep", 0.103, 0.0, 1.0, false},
        {"p_data", 0.030, 0.0, 1.0, false},
        {"p_data_leaked", 0.489, 0.0, 1.0, false},
    };
    return s;
}

// ---------------------------------------------------------------------------
// Ancilla models: state (a, s...) with a the ancilla level (2 = leaked) and s
// the stabilizer bit(s) it accumulates.  The ZZXX variant tracks the two
// alternating stabilizers and shuffles their labels every round so index 0 is
// always the one consumed by the current check.

struct AncLayout {
    int stab_states;                // 2 for one tracked stabilizer, 4 for two
    int idx(int a, int s) const { return a * stab_states + s; }
    int n() const { return 3 * stab_states; }
    // Stabilizer label evolution per round: identity for ZZ, swap for ZZXX.
    int shuffle(int s) const {
        if (stab_states == 2) return s;
        return ((s & 1) << 1) | (s >> 1);
    }
    int current_bit(int s) const { return stab_states == 2 ? s : (s >> 1); }
    int flip_current(int s) const { return stab_states == 2 ? 1 - s : s ^ 2; }
};

HmmSpec build_ancilla(ModelId id) {
    const bool zzxx = id == ModelId::zzxx_a;
    const AncLayout lay{zzxx ? 4 : 2};
    const int n = lay.n();

    HmmSpec s;
    s.name = to_string(id);
    for (int a = 0; a < 3; ++a) {
        for (int st = 0; st < lay.stab_states; ++st) {
            std::string label = "a" + std::to_string(a) + "s";
            if (zzxx) label += std::to_string(st >> 1);
            label += std::to_string(st & 1);
            s.state_labels.push_back(label);
        }
    }
    s.output_labels = {"+1", "-1"};
    s.leaked.assign(static_cast<std::size_t>(n), false);
    for (int st = 0; st < lay.stab_states; ++st) s.leaked[static_cast<std::size_t>(lay.idx(2, st))] = true;

    // Baseline: the ancilla accumulates the current stabilizer bit and reads
    // +1 only from level 0; a leaked ancilla holds its level and reads -1.
    s.a0 = Matrix::Zero(n, n);
    s.b0 = Matrix::Zero(2, n);
    auto baseline_target = [&](int a, int st) {
        if (a == 2) return lay.idx(2, lay.shuffle(st));
        return lay.idx((a + lay.current_bit(st)) % 2, lay.shuffle(st));
    };
    for (int a = 0; a < 3; ++a) {
        for (int st = 0; st < lay.stab_states; ++st) {
            s.a0(baseline_target(a, st), lay.idx(a, st)) = 1.0;
            s.b0(a == 0 ? 0 : 1, lay.idx(a, st)) = 1.0;
        }
    }
    s.prior = Vector::Zero(n);
    s.prior(0) = 1.0;

    // Readout misreport: flips the reported sign from every state.
    Matrix d_readout = Matrix::Zero(2, n);
    for (int a = 0; a < 3; ++a) {
        for (int st = 0; st < lay.stab_states; ++st) {
            const int emitted = a == 0 ? 0 : 1;
            d_readout(emitted, lay.idx(a, st)) -= 1.0;
            d_readout(1 - emitted, lay.idx(a, st)) += 1.0;
        }
    }

    // Data error: flips the stabilizer about to be consumed, before the
    // ancilla update.
    Matrix d_data = Matrix::Zero(n, n);
    for (int a = 0; a < 3; ++a) {
        for (int st = 0; st < lay.stab_states; ++st) {
            d_data(baseline_target(a, st), lay.idx(a, st)) -= 1.0;
            d_data(baseline_target(a, lay.flip_current(st)), lay.idx(a, st)) += 1.0;
        }
    }

    // Four asymmetric ancilla flips, indexed by (level measured last round,
    // level the ideal update expects this round); dominated by relaxation, so
    // the four rates differ.
    std::vector<Matrix> d_anc(4, Matrix::Zero(n, n));
    for (int a = 0; a < 2; ++a) {
        for (int st = 0; st < lay.stab_states; ++st) {
            const int expected = (a + lay.current_bit(st)) % 2;
            Matrix& d = d_anc[static_cast<std::size_t>(a * 2 + expected)];
            d(lay.idx(expected, lay.shuffle(st)), lay.idx(a, st)) -= 1.0;
            d(lay.idx(1 - expected, lay.shuffle(st)), lay.idx(a, st)) += 1.0;
        }
    }

    // Leakage from either computational level; seepage returns to level 1.
    // Both have equal chances to flip the current stabilizer.
    Matrix d_leak = Matrix::Zero(n, n);
    Matrix d_seep = Matrix::Zero(n, n);
    for (int st = 0; st < lay.stab_states; ++st) {
        for (int a = 0; a < 2; ++a) {
            d_leak(baseline_target(a, st), lay.idx(a, st)) -= 1.0;
            d_leak(lay.idx(2, lay.shuffle(st)), lay.idx(a, st)) += 0.5;
            d_leak(lay.idx(2, lay.shuffle(lay.flip_current(st))), lay.idx(a, st)) += 0.5;
        }
        d_seep(lay.idx(2, lay.shuffle(st)), lay.idx(2, st)) -= 1.0;
        d_seep(lay.idx(1, lay.shuffle(st)), lay.idx(2, st)) += 0.5;
        d_seep(lay.idx(1, lay.shuffle(lay.flip_current(st))), lay.idx(2, st)) += 0.5;
    }

    s.generators = {
        {"p_readout", Side::output, d_readout},
        {"p_data", Side::transition, d_data},
        {"p_anc_00", Side::transition, d_anc[0]},
        {"p_anc_01", Side::transition, d_anc[1]},
        {"p_anc_10", Side::transition, d_anc[2]},
        {"p_anc_11", Side::transition, d_anc[3]},
        {"p_leak", Side::transition, d_leak},
        {"p_seep", Side::transition, d_seep},
    };
    if (zzxx) {
        s.params = {
            {"p_readout", 0.027, 0.0, 1.0, false},
            {"p_data", 0.045, 0.0, 1.0, false},
            {"p_anc_00", 0.001, 0.0, 1.0, false},
            {"p_anc_01", 0.021, 0.0, 1.0, false},
            {"p_anc_10", 0.044, 0.0, 1.0, false},
            {"p_anc_11", 0.058, 0.0, 1.0, false},
            {"p_leak", 0.0040, 0.0, 1.0, true},
            {"p_seep", 0.101, 0.0, 1.0, false},
        };
    } else {
        s.params = {
            {"p_readout", 0.011, 0.0, 1.0, false},
            {"p_data", 0.042, 0.0, 1.0, false},
            {"p_anc_00", 0.028, 0.0, 1.0, false},
            {"p_anc_01", 0.028, 0.0, 1.0, false},
            {"p_anc_10", 0.028, 0.0, 1.0, false},
            {"p_anc_11", 0.028, 0.0, 1.0, false},
            {"p_leak", 0.0040, 0.0, 1.0, true},
            {"p_seep", 0.101, 0.0, 1.0, false},
        };
    }
    return s;
}

} // namespace

std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::simple_zz_d: return "simple_zz_d";
        case ModelId::simple_zz_a: return "simple_zz_a";
        case ModelId::simple_zzxx_d: return "simple_zzxx_d";
        case ModelId::simple_zzxx_a: return "simple_zzxx_a";
        case ModelId::zz_d: return "zz_d";
        case ModelId::zz_a: return "zz_a";
        case ModelId::zzxx_d: return "zzxx_d";
        case ModelId::zzxx_a: return "zzxx_a";
    }
    throw SpecError("unknown model id");
}

ModelId model_id_from_string(const std::string& name) {
    for (const ModelId id : {ModelId::simple_zz_d, ModelId::simple_zz_a, ModelId::simple_zzxx_d,
                             ModelId::simple_zzxx_a, ModelId::zz_d, ModelId::zz_a, ModelId::zzxx_d,
                             ModelId::zzxx_a}) {
        if (to_string(id) == name) return id;
    }
    throw SpecError("unknown model name: " + name);
}

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::zz: return "zz";
        case Protocol::zzxx: return "zzxx";
        case Protocol::idling_dd: return "idling_dd";
    }
    throw SpecError("unknown protocol");
}

Protocol protocol_from_string(const std::string& name) {
    if (name == "zz") return Protocol::zz;
    if (name == "zzxx") return Protocol::zzxx;
    if (name == "idling_dd") return Protocol::idling_dd;
    throw SpecError("unknown protocol: " + name);
}

Role role_of(ModelId id) {
    switch (id) {
        case ModelId::simple_zz_d:
        case ModelId::simple_zzxx_d:
        case ModelId::zz_d:
        case ModelId::zzxx_d: return Role::data;
        default: return Role::ancilla;
    }
}

Protocol protocol_of(ModelId id) {
    switch (id) {
        case ModelId::simple_zz_d:
        case ModelId::simple_zz_a:
        case ModelId::zz_d:
        case ModelId::zz_a: return Protocol::zz;
        default: return Protocol::zzxx;
    }
}

bool is_simple(ModelId id) {
    switch (id) {
        case ModelId::simple_zz_d:
        case ModelId::simple_zz_a:
        case ModelId::simple_zzxx_d:
        case ModelId::simple_zzxx_a: return true;
        default: return false;
    }
}

int lcomp_window(ModelId id) {
    const bool zzxx = protocol_of(id) == Protocol::zzxx;
    if (role_of(id) == Role::data) return zzxx ? 2 : 1;
    return zzxx ? 3 : 2;
}

HmmSpec build_model(ModelId id) {
    switch (id) {
        case ModelId::simple_zz_d:
        case ModelId::simple_zz_a:
        case ModelId::simple_zzxx_d:
        case ModelId::simple_zzxx_a: return build_simple(id);
        case ModelId::zz_d: return build_zz_d();
        case ModelId::zzxx_d: return build_zzxx_d();
        case ModelId::zz_a:
        case ModelId::zzxx_a: return build_ancilla(id);
    }
    throw SpecError("unknown model id");
}

HmmSpec strip_leakage(const HmmSpec& spec, ModelId id) {
    std::vector<std::string> stripped = {"p_leak", "p_seep"};
    if (is_simple(id)) {
        stripped.push_back("p10");
    } else if (id == ModelId::zz_d) {
        stripped.push_back("p_ancilla_leaked");
        stripped.push_back("p_data_leaked");
    } else if (id == ModelId::zzxx_d) {
        stripped.push_back("p_data_leaked");
    }
    HmmSpec out = spec;
    out.name = spec.name + "_stripped";
    for (const auto& name : stripped) {
        out.set_param(name, 0.0);
        out.set_frozen(name, true);
    }
    return out;
}

SyndromeSequence syndrome_from_measurements(Protocol protocol, std::span<const int> m_a) {
    for (const int v : m_a)
        if (v != 1 && v != -1) throw SpecError("measurement outcomes must be +-1");
    SyndromeSequence out;
    out.protocol = protocol;
    const auto m = static_cast<int>(m_a.size());
    if (protocol == Protocol::zz) {
        if (m < 3) throw SpecError("sequence too short: ZZ syndromes need at least 3 outcomes");
        out.start = 2;
        out.values.reserve(static_cast<std::size_t>(m - 2));
        for (int i = 2; i < m; ++i) out.values.push_back(m_a[static_cast<std::size_t>(i)] * m_a[static_cast<std::size_t>(i - 2)]);
    } else if (protocol == Protocol::zzxx) {
        if (m < 5) throw SpecError("sequence too short: ZZXX syndromes need at least 5 outcomes");
        out.start = 3;
        out.values.reserve(static_cast<std::size_t>(m - 3));
        for (int i = 3; i < m; ++i) {
            out.values.push_back(m_a[static_cast<std::size_t>(i)] * m_a[static_cast<std::size_t>(i - 1)] *
                                 m_a[static_cast<std::size_t>(i - 2)] * m_a[static_cast<std::size_t>(i - 3)]);
        }
    } else {
        throw SpecError("idling protocol has no syndrome");
    }
    return out;
}

std::vector<int> encode_observations(ModelId id, std::span<const int> m_a) {
    std::vector<int> obs;
    if (role_of(id) == Role::data) {
        const auto syn = syndrome_from_measurements(protocol_of(id), m_a);
        obs.reserve(syn.values.size());
        for (const int v : syn.values) obs.push_back(v == 1 ? 0 : 1);
    } else {
        obs.reserve(m_a.size());
        for (const int v : m_a) {
            if (v != 1 && v != -1) throw SpecError("measurement outcomes must be +-1");
            obs.push_back(v == 1 ? 0 : 1);
        }
    }
    return obs;
}

double computational_likelihood(const hmm::Assembled& m, const hmm::Vector& prior,
                                const std::vector<bool>& leaked, int window,
                                std::span<const int> obs) {
    const auto total = static_cast<int>(obs.size());
    if (total < 1) throw SpecError("computational likelihood of an empty sequence");
    if (window < 1) throw SpecError("window must be positive");
    const int w = std::min(window, total);

    hmm::FilterState st;
    st.round = 0;
    st.posterior = prior;
    for (int i = 0; i < total - w; ++i) forward_step_inplace(m, st, obs[static_cast<std::size_t>(i)]);

    // Constrained vs unconstrained propagation over the trailing window; both
    // share the unconstrained per-step normalizer, so the final masked sum is
    // the joint posterior probability that every window state is unleaked.
    Vector num = st.posterior;
    Vector den = st.posterior;
    int round = st.round;
    for (int i = total - w; i < total; ++i) {
        const int o = obs[static_cast<std::size_t>(i)];
        if (o < 0 || o >= m.b.rows()) throw SpecError("observation index out of range");
        if (round > 0) {
            num = m.a * num;
            den = m.a * den;
        }
        num.array() *= m.b.row(o).transpose().array();
        den.array() *= m.b.row(o).transpose().array();
        const double c = den.sum();
        if (!(c >= 1e-300))
            throw NumericError("zero-likelihood observation " + std::to_string(o) + " at round " +
                               std::to_string(round + 1));
        den /= c;
        num /= c;
        for (int h = 0; h < num.size(); ++h)
            if (leaked[static_cast<std::size_t>(h)]) num(h) = 0.0;
        ++round;
    }
    return num.sum();
}

double computational_likelihood(const HmmSpec& spec, int window, std::span<const int> obs) {
    return computational_likelihood(hmm::assemble(spec), spec.prior, spec.leaked, window, obs);
}

double computational_likelihood(const HmmSpec& spec, ModelId id, std::span<const int> obs) {
    return computational_likelihood(spec, lcomp_window(id), obs);
}

double steady_state_leakage(double p_leak, double p_seep) {
    if (!(p_leak >= 0.0 && p_leak <= 1.0 && p_seep >= 0.0 && p_seep <= 1.0))
        throw SpecError("rates must lie in [0,1]");
    const double denom = p_leak + p_seep;
    if (denom == 0.0) throw SpecError("steady state undefined: p_leak + p_seep = 0");
    return p_leak / denom;
}

} // namespace leakhmm::models
