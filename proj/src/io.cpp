#include "leakhmm/io.hpp"

#include "leakhmm/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace leakhmm::io {
namespace {

using nlohmann::json;

// %.17g round-trips doubles and keeps CSV output byte-stable
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw SpecError(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key, const char* what) {
    if (!j.contains(key))
        throw SpecError(std::string(what) + " is missing field \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SpecError(std::string(what) + " field \"" + key + "\": " + e.what());
    }
}

std::vector<bool> bool_array(const json& j, const char* key, std::size_t n, const char* what) {
    const auto v = field<std::vector<bool>>(j, key, what);
    if (v.size() != n)
        throw SpecError(std::string(what) + " field \"" + key + "\" has wrong length");
    return v;
}

int pm_one(const json& j, const char* key, const char* what) {
    const int v = field<int>(j, key, what);
    if (v != 1 && v != -1)
        throw SpecError(std::string(what) + " field \"" + key + "\" must be +1 or -1");
    return v;
}

} // namespace

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string record_to_json(const sim::ShotRecord& record) {
    json j;
    j["protocol"] = models::to_string(record.protocol);
    j["M"] = record.m_a.size();
    j["m_a"] = record.m_a;
    j["truth"] = {{"dh", record.dh_leaked}, {"dl", record.dl_leaked},
                  {"anc", record.anc_leaked}};
    j["frame"] = {{"x", record.frame_x}, {"z", record.frame_z},
                  {"depol", record.depolarized}};
    j["proj"] = record.first_projection;
    return j.dump();
}

sim::ShotRecord record_from_json(const std::string& line) {
    const json j = parse(line, "shot record");
    sim::ShotRecord rec;
    rec.protocol = models::protocol_from_string(field<std::string>(j, "protocol", "record"));
    rec.m_a = field<std::vector<int>>(j, "m_a", "record");
    const auto m = field<std::size_t>(j, "M", "record");
    if (m != rec.m_a.size() || rec.m_a.empty())
        throw SpecError("record M does not match m_a length");
    for (const int v : rec.m_a)
        if (v != 1 && v != -1) throw SpecError("record m_a entries must be +1 or -1");
    if (!j.contains("truth") || !j.contains("frame"))
        throw SpecError("record is missing truth/frame blocks");
    rec.dh_leaked = bool_array(j.at("truth"), "dh", m, "record truth");
    rec.dl_leaked = bool_array(j.at("truth"), "dl", m, "record truth");
    rec.anc_leaked = bool_array(j.at("truth"), "anc", m, "record truth");
    rec.frame_x = pm_one(j.at("frame"), "x", "record frame");
    rec.frame_z = pm_one(j.at("frame"), "z", "record frame");
    rec.depolarized = field<bool>(j.at("frame"), "depol", "record frame");
    rec.first_projection = pm_one(j, "proj", "record");
    return rec;
}

void write_dataset(std::ostream& out, const std::vector<sim::ShotRecord>& records) {
    for (const auto& rec : records) out << record_to_json(rec) << '\n';
}

void write_dataset(const std::string& path, const std::vector<sim::ShotRecord>& records) {
    std::ofstream out(path);
    if (!out) throw SpecError("cannot open for writing: " + path);
    write_dataset(out, records);
    if (!out) throw SpecError("write failed: " + path);
}

std::vector<sim::ShotRecord> read_dataset(std::istream& in) {
    std::vector<sim::ShotRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(line));
    }
    if (records.empty()) throw SpecError("dataset holds no records");
    return records;
}

std::vector<sim::ShotRecord> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open dataset: " + path);
    return read_dataset(in);
}

std::string config_to_json(const sim::ExperimentConfig& config) {
    json j;
    j["protocol"] = models::to_string(config.protocol);
    j["rounds"] = config.rounds;
    j["shots"] = config.shots;
    j["seed"] = config.seed;
    j["echo_enabled"] = config.echo_enabled;
    j["rates"] = {{"data_x", config.rates.data_x},
                  {"data_y", config.rates.data_y},
                  {"data_z", config.rates.data_z},
                  {"ancilla_flip", config.rates.ancilla_flip},
                  {"readout_flip", config.rates.readout_flip},
                  {"data_leak", config.rates.data_leak},
                  {"data_seep", config.rates.data_seep},
                  {"anc_leak", config.rates.anc_leak},
                  {"anc_seep", config.rates.anc_seep}};
    return j.dump(2);
}

sim::ExperimentConfig config_from_json(const std::string& text) {
    const json j = parse(text, "config");
    sim::ExperimentConfig config =
        sim::default_config(models::protocol_from_string(field<std::string>(j, "protocol", "config")));
    if (j.contains("rounds")) config.rounds = field<int>(j, "rounds", "config");
    if (j.contains("shots")) config.shots = field<long>(j, "shots", "config");
    if (j.contains("seed")) config.seed = field<std::uint64_t>(j, "seed", "config");
    if (j.contains("echo_enabled"))
        config.echo_enabled = field<bool>(j, "echo_enabled", "config");
    if (j.contains("rates")) {
        const json& r = j.at("rates");
        auto pick = [&](const char* key, double& slot) {
            if (r.contains(key)) slot = field<double>(r, key, "config rates");
        };
        pick("data_x", config.rates.data_x);
        pick("data_y", config.rates.data_y);
        pick("data_z", config.rates.data_z);
        pick("readout_flip", config.rates.readout_flip);
        pick("data_leak", config.rates.data_leak);
        pick("data_seep", config.rates.data_seep);
        pick("anc_leak", config.rates.anc_leak);
        pick("anc_seep", config.rates.anc_seep);
        if (r.contains("ancilla_flip")) {
            const auto flips = field<std::vector<double>>(r, "ancilla_flip", "config rates");
            if (flips.size() != 4)
                throw SpecError("config rates ancilla_flip must have 4 entries");
            std::copy(flips.begin(), flips.end(), config.rates.ancilla_flip.begin());
        }
    }
    sim::validate(config);
    return config;
}

sim::ExperimentConfig load_config(const std::string& path) {
    return config_from_json(read_text(path));
}

std::string model_to_json(models::ModelId id, const hmm::HmmSpec& spec) {
    json j;
    j["model"] = models::to_string(id);
    j["state_labels"] = spec.state_labels;
    json params = json::object();
    for (const auto& p : spec.params)
        params[p.name] = {{"value", p.value}, {"frozen", p.frozen}};
    j["params"] = params;
    return j.dump(2);
}

std::pair<models::ModelId, hmm::HmmSpec> model_from_json(const std::string& text) {
    const json j = parse(text, "model");
    const auto id = models::model_id_from_string(field<std::string>(j, "model", "model"));
    hmm::HmmSpec spec = models::build_model(id);
    if (j.contains("params")) {
        const json& params = j.at("params");
        if (!params.is_object()) throw SpecError("model params must be an object");
        for (const auto& [name, entry] : params.items()) {
            if (spec.param_index(name) < 0)
                throw SpecError("model file sets unknown parameter: " + name);
            spec.set_param(name, field<double>(entry, "value", "model parameter"));
            if (entry.contains("frozen"))
                spec.set_frozen(name, field<bool>(entry, "frozen", "model parameter"));
        }
    }
    hmm::assemble(spec);   // reject inadmissible parameter files early
    return {id, spec};
}

void save_model(const std::string& path, models::ModelId id, const hmm::HmmSpec& spec) {
    write_text(path, model_to_json(id, spec) + "\n");
}

std::pair<models::ModelId, hmm::HmmSpec> load_model(const std::string& path) {
    return model_from_json(read_text(path));
}

std::string summary_to_json(const sim::DatasetSummary& summary, std::string_view manifest) {
    json j;
    j["manifest"] = std::string(manifest);
    j["shots"] = summary.shots;
    j["data_leak_fraction"] = summary.data_leak_fraction;
    j["anc_leak_fraction"] = summary.anc_leak_fraction;
    j["even_projection_fraction"] = summary.even_projection_fraction;
    j["depolarized_fraction"] = summary.depolarized_fraction;
    return j.dump(2);
}

std::string fit_report_to_json(const trainer::FitReport& report, std::string_view manifest) {
    json j;
    j["manifest"] = std::string(manifest);
    j["model"] = report.spec.name;
    j["n_records"] = report.n_records;
    j["dataset_fingerprint"] = hex64(report.dataset_fingerprint);
    j["best_restart"] = report.best_restart;
    j["rejected_count"] = report.rejected_count;
    j["total_log_likelihood"] = report.total_log_likelihood;
    j["aic"] = report.aic;
    j["gradient_norm"] = report.gradient_norm;

    json restarts = json::array();
    for (const auto& r : report.restarts) {
        json jr;
        jr["index"] = r.index;
        jr["iterations"] = r.iterations;
        jr["converged"] = r.converged;
        jr["rejected"] = r.rejected;
        if (!r.note.empty()) jr["note"] = r.note;
        if (!r.rejected) jr["log_likelihood"] = r.log_likelihood;
        json params = json::object();
        for (std::size_t k = 0; k < report.spec.params.size() && k < r.final_params.size(); ++k)
            params[report.spec.params[k].name] = r.final_params[k];
        jr["final_params"] = params;
        restarts.push_back(jr);
    }
    j["restarts"] = restarts;
    return j.dump(2);
}

void write_curves_csv(std::ostream& out, const std::vector<analysis::CurvePoint>& points,
                      std::string_view manifest) {
    out << "# manifest=" << manifest << "\n";
    out << "M,xx,yy,zz,F,f_post,sem_xx,sem_yy,sem_zz,sem_F,shots,accepted\n";
    for (const auto& p : points) {
        out << p.rounds << ',' << num(p.xx) << ',' << num(p.yy) << ',' << num(p.zz) << ','
            << num(p.fidelity) << ',' << num(p.f_post) << ',' << num(p.sem_xx) << ','
            << num(p.sem_yy) << ',' << num(p.sem_zz) << ',' << num(p.sem_fidelity) << ','
            << p.shots << ',' << p.accepted << "\n";
    }
}

void write_roc_csv(std::ostream& out, const analysis::RocCurve& curve,
                   std::string_view manifest) {
    out << "# manifest=" << manifest << "\n";
    out << "# auc=" << num(curve.auc) << "\n";
    out << "threshold,fpr,tpr\n";
    for (const auto& p : curve.points)
        out << num(p.threshold) << ',' << num(p.fpr) << ',' << num(p.tpr) << "\n";
}

void write_calibration_csv(std::ostream& out, const analysis::CalibrationTable& table,
                           std::string_view manifest) {
    out << "# manifest=" << manifest << "\n";
    out << "bin_lo,bin_hi,n_exp,n_model,unleaked_frac,mean_score\n";
    for (const auto& b : table.bins) {
        out << num(b.lo) << ',' << num(b.hi) << ',' << b.n_exp << ',' << b.n_model << ',';
        if (b.empty)
            out << ",";
        else
            out << num(b.unleaked_frac) << ',' << num(b.mean_score);
        out << "\n";
    }
    out << "# total_variation=" << num(table.total_variation) << "\n";
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, std::string_view text) {
    std::ofstream out(path);
    if (!out) throw SpecError("cannot open for writing: " + path);
    out << text;
    if (!out) throw SpecError("write failed: " + path);
}

} // namespace leakhmm::io
