#include "leakhmm/analysis.hpp"
#include "leakhmm/errors.hpp"
#include "leakhmm/io.hpp"
#include "leakhmm/models.hpp"
#include "leakhmm/sim.hpp"
#include "leakhmm/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace leakhmm;

constexpr const char* kVersion = "leakhmm 1.0.0";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// The hash covers the command and every result-affecting input.  Worker
// count and timestamps stay out: they must not change output bytes.
class Manifest {
public:
    explicit Manifest(std::string command) : text_(std::string(kVersion) + "\n" + command + "\n") {}
    void add(const std::string& key, const std::string& value) {
        text_ += key + "=" + value + "\n";
    }
    template <typename T, std::enable_if_t<std::is_integral_v<T>, int> = 0>
    void add(const std::string& key, T value) {
        add(key, std::to_string(value));
    }
    void add_real(const std::string& key, double value) { add(key, fmt(value)); }
    std::string hash() const { return io::hex64(io::fnv1a(text_)); }

private:
    std::string text_;
};

// "data.jsonl" + ".summary.json" -> "data.summary.json"
std::string derive_sibling(const std::string& out, const std::string& suffix) {
    const auto slash = out.find_last_of('/');
    const auto dot = out.find_last_of('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
        return out.substr(0, dot) + suffix;
    return out + suffix;
}

std::pair<models::ModelId, hmm::HmmSpec> resolve_model(const std::string& name_or_path) {
    try {
        const auto id = models::model_id_from_string(name_or_path);
        return {id, models::build_model(id)};
    } catch (const SpecError&) {
        // fall through to the file form
    }
    return io::load_model(name_or_path);
}

models::Role role_from_string(const std::string& name) {
    if (name == "data") return models::Role::data;
    if (name == "ancilla") return models::Role::ancilla;
    throw SpecError("unknown role: " + name + " (expected data or ancilla)");
}

void check_role(models::ModelId id, const std::string& role) {
    if (role.empty()) return;
    if (role_from_string(role) != models::role_of(id))
        throw SpecError("model " + models::to_string(id) + " does not track the " + role +
                        " qubit");
}

trainer::Dataset encode_records(const std::vector<sim::ShotRecord>& records,
                                models::ModelId id) {
    trainer::Dataset data;
    data.reserve(records.size());
    for (const auto& rec : records) {
        if (rec.protocol != models::protocol_of(id))
            throw SpecError("dataset protocol does not match model " + models::to_string(id));
        data.push_back(models::encode_observations(id, rec.m_a));
    }
    return data;
}

// Sink for CSV/JSON payloads: a file when --out is given, stdout otherwise.
void emit(const std::string& out, const std::string& payload) {
    if (out.empty()) {
        std::cout << payload;
        return;
    }
    io::write_text(out, payload);
    std::cout << "wrote " << out << "\n";
}

struct MitigationNote {
    analysis::Mitigation mitigation;
    std::string footer;
};

MitigationNote parse_mitigation(const std::string& text,
                                const std::vector<sim::ShotRecord>& tuning, int workers) {
    const auto last = text.rfind(':');
    const auto mid = last == std::string::npos ? std::string::npos : text.rfind(':', last - 1);
    if (mid == std::string::npos || mid == 0)
        throw SpecError("--mitigate expects model:role:tpr=<target>, got: " + text);
    const std::string model_part = text.substr(0, mid);
    const std::string role_part = text.substr(mid + 1, last - mid - 1);
    const std::string target_part = text.substr(last + 1);
    if (target_part.rfind("tpr=", 0) != 0)
        throw SpecError("--mitigate expects model:role:tpr=<target>, got: " + text);
    double target = 0.0;
    try {
        target = std::stod(target_part.substr(4));
    } catch (const std::exception&) {
        throw SpecError("--mitigate target is not a number: " + text);
    }

    auto [id, spec] = resolve_model(model_part);
    check_role(id, role_part);
    const auto choice = analysis::tune_threshold(tuning, spec, id, target, workers);

    MitigationNote note;
    note.mitigation.model = id;
    note.mitigation.spec = std::move(spec);
    note.mitigation.threshold = choice.threshold;
    note.footer = "# mitigation model=" + models::to_string(id) + " target_tpr=" + fmt(target) +
                  " threshold=" + fmt(choice.threshold) + " tpr=" + fmt(choice.tpr) +
                  " fpr=" + fmt(choice.fpr) + "\n";
    return note;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config_path;
    std::string out;
    std::optional<long> shots;
    std::optional<int> rounds;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args, int workers) {
    auto config = io::load_config(args.config_path);
    if (args.shots) config.shots = *args.shots;
    if (args.rounds) config.rounds = *args.rounds;
    if (args.seed) config.seed = *args.seed;
    sim::validate(config);

    Manifest manifest("simulate");
    manifest.add("config", args.config_path);
    manifest.add("out", args.out);
    manifest.add("protocol", models::to_string(config.protocol));
    manifest.add("rounds", config.rounds);
    manifest.add("shots", config.shots);
    manifest.add("seed", static_cast<unsigned long long>(config.seed));
    manifest.add("echo_enabled", config.echo_enabled ? 1 : 0);
    const std::string hash = manifest.hash();

    const auto records = sim::simulate_shots(config, workers);
    io::write_dataset(args.out, records);
    const std::string summary_path = derive_sibling(args.out, ".summary.json");
    io::write_text(summary_path, io::summary_to_json(sim::summarize(records), hash) + "\n");

    std::cout << "manifest " << hash << "\n";
    std::cout << "wrote " << args.out << ": " << records.size() << " records\n";
    std::cout << "wrote " << summary_path << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string model;
    std::string data;
    std::string out;
    std::string report;
    std::vector<std::string> fix;
    trainer::FitOptions options;
};

int cmd_train(const TrainArgs& args, int workers) {
    const auto id = models::model_id_from_string(args.model);
    auto spec = models::build_model(id);
    for (const auto& fix : args.fix) {
        const auto eq = fix.find('=');
        if (eq == std::string::npos || eq == 0)
            throw SpecError("--fix expects name=value, got: " + fix);
        double value = 0.0;
        try {
            value = std::stod(fix.substr(eq + 1));
        } catch (const std::exception&) {
            throw SpecError("--fix value is not a number: " + fix);
        }
        const std::string name = fix.substr(0, eq);
        spec.set_param(name, value);
        spec.set_frozen(name, true);
    }

    const auto records = io::read_dataset(args.data);
    const auto dataset = encode_records(records, id);

    Manifest manifest("train");
    manifest.add("model", args.model);
    manifest.add("data", args.data);
    manifest.add("out", args.out);
    for (const auto& fix : args.fix) manifest.add("fix", fix);
    manifest.add("restarts", args.options.restarts);
    manifest.add("max_iters", args.options.max_iterations);
    manifest.add("batch_size", args.options.batch_size);
    manifest.add("seed", static_cast<unsigned long long>(args.options.seed));
    const std::string hash = manifest.hash();

    auto options = args.options;
    options.workers = workers;
    const auto report = trainer::fit(spec, dataset, options);

    io::save_model(args.out, id, report.spec);
    const std::string report_path =
        args.report.empty() ? derive_sibling(args.out, ".report.json") : args.report;
    io::write_text(report_path, io::fit_report_to_json(report, hash) + "\n");

    std::cout << "manifest " << hash << "\n";
    std::cout << "best restart " << report.best_restart << ": log-likelihood "
              << fmt(report.total_log_likelihood) << ", aic " << fmt(report.aic) << "\n";
    std::cout << "wrote " << args.out << "\n";
    std::cout << "wrote " << report_path << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string role;
    std::string mode;
    std::string out;
    int bins = 20;
    std::uint64_t model_seed = 1;
};

int cmd_evaluate(const EvaluateArgs& args, int workers) {
    const auto [id, spec] = resolve_model(args.model);
    check_role(id, args.role);
    const auto records = io::read_dataset(args.data);

    Manifest manifest("evaluate");
    manifest.add("model", args.model);
    manifest.add("data", args.data);
    manifest.add("mode", args.mode);
    manifest.add("out", args.out);
    if (args.mode == "calibration") {
        manifest.add("bins", args.bins);
        manifest.add("model_seed", static_cast<unsigned long long>(args.model_seed));
    }
    const std::string hash = manifest.hash();

    std::ostringstream payload;
    if (args.mode == "roc") {
        io::write_roc_csv(payload, analysis::roc(records, spec, id, workers), hash);
    } else if (args.mode == "calibration") {
        io::write_calibration_csv(
            payload, analysis::calibration(records, spec, id, args.bins, args.model_seed, workers),
            hash);
    } else if (args.mode == "lcomp") {
        const auto scores = analysis::comp_scores(records, spec, id, workers);
        payload << "# manifest=" << hash << "\n";
        payload << "index,lcomp\n";
        for (std::size_t i = 0; i < scores.size(); ++i)
            payload << i << ',' << fmt(scores[i]) << "\n";
    }
    emit(args.out, payload.str());
    return 0;
}

// ------------------------------------------------------------------ curves

struct CurvesArgs {
    std::string data;
    std::string tuning;
    std::string strategy = "final";
    std::string out;
    std::string fit_column;
    std::vector<std::string> mitigate;
};

int cmd_curves(const CurvesArgs& args, int workers) {
    const auto records = io::read_dataset(args.data);
    std::map<std::pair<int, std::size_t>, std::vector<sim::ShotRecord>> by_length;
    for (const auto& rec : records)
        by_length[{static_cast<int>(rec.protocol), rec.m_a.size()}].push_back(rec);
    std::vector<std::vector<sim::ShotRecord>> groups;
    groups.reserve(by_length.size());
    for (auto& [key, group] : by_length) groups.push_back(std::move(group));

    analysis::DecodeStrategy strategy;
    strategy.kind = analysis::strategy_from_string(args.strategy);

    std::vector<sim::ShotRecord> tuning;
    if (!args.mitigate.empty())
        tuning = args.tuning.empty() ? records : io::read_dataset(args.tuning);

    Manifest manifest("curves");
    manifest.add("data", args.data);
    manifest.add("strategy", args.strategy);
    manifest.add("out", args.out);
    if (!args.tuning.empty()) manifest.add("tuning", args.tuning);
    for (const auto& m : args.mitigate) manifest.add("mitigate", m);
    if (!args.fit_column.empty()) manifest.add("fit", args.fit_column);
    const std::string hash = manifest.hash();

    std::string footers;
    for (const auto& text : args.mitigate) {
        auto note = parse_mitigation(text, tuning, workers);
        strategy.mitigation.push_back(std::move(note.mitigation));
        footers += note.footer;
    }

    const auto points = analysis::curves(groups, strategy, workers);

    std::ostringstream payload;
    io::write_curves_csv(payload, points, hash);
    payload << footers;
    if (!args.fit_column.empty()) {
        std::vector<double> xs, ys;
        for (const auto& p : points) {
            xs.push_back(static_cast<double>(p.rounds));
            if (args.fit_column == "xx") ys.push_back(p.xx);
            else if (args.fit_column == "yy") ys.push_back(p.yy);
            else if (args.fit_column == "zz") ys.push_back(p.zz);
            else ys.push_back(p.fidelity);
        }
        const auto fit = analysis::fit_decay(xs, ys);
        payload << "# fit column=" << args.fit_column << " amplitude=" << fmt(fit.amplitude)
                << " upsilon=" << fmt(fit.upsilon) << " offset=" << fmt(fit.offset) << "\n";
        payload << "# fit se_amplitude=" << fmt(fit.se_amplitude)
                << " se_upsilon=" << fmt(fit.se_upsilon) << " se_offset=" << fmt(fit.se_offset)
                << " converged=" << (fit.converged ? 1 : 0)
                << " unidentifiable=" << (fit.unidentifiable ? 1 : 0) << "\n";
    }
    emit(args.out, payload.str());
    return 0;
}

// ----------------------------------------------------------------- compare

struct CompareArgs {
    std::string data;
    std::string model_a;
    std::string model_b;
    std::string out;
};

int cmd_compare(const CompareArgs& args, int workers) {
    const auto [id_a, spec_a] = resolve_model(args.model_a);
    const auto [id_b, spec_b] = resolve_model(args.model_b);
    if (models::protocol_of(id_a) != models::protocol_of(id_b) ||
        models::role_of(id_a) != models::role_of(id_b))
        throw SpecError("compare requires models that watch the same qubit: " +
                        models::to_string(id_a) + " vs " + models::to_string(id_b));

    const auto records = io::read_dataset(args.data);
    const auto dataset = encode_records(records, id_a);

    Manifest manifest("compare");
    manifest.add("data", args.data);
    manifest.add("model_a", args.model_a);
    manifest.add("model_b", args.model_b);
    manifest.add("out", args.out);
    const std::string hash = manifest.hash();

    const double ll_a = trainer::total_log_likelihood(spec_a, dataset, workers);
    const double ll_b = trainer::total_log_likelihood(spec_b, dataset, workers);
    const double aic_a = 2.0 * spec_a.n_free_params() - 2.0 * ll_a;
    const double aic_b = 2.0 * spec_b.n_free_params() - 2.0 * ll_b;
    const double delta = aic_b - aic_a; // positive prefers model_a

    nlohmann::json j;
    j["manifest"] = hash;
    j["n_records"] = dataset.size();
    j["model_a"] = {{"name", models::to_string(id_a)},
                    {"log_likelihood", ll_a},
                    {"aic", aic_a},
                    {"n_free_params", spec_a.n_free_params()}};
    j["model_b"] = {{"name", models::to_string(id_b)},
                    {"log_likelihood", ll_b},
                    {"aic", aic_b},
                    {"n_free_params", spec_b.n_free_params()}};
    j["delta_aic"] = delta;
    j["preferred"] = models::to_string(delta >= 0.0 ? id_a : id_b);
    emit(args.out, j.dump(2) + "\n");
    return 0;
}

// --------------------------------------------------------------- onset-toy

struct OnsetArgs {
    double p = 0.05;
    int checks = 2;
    double p_leak = 0.3;
    int rounds = 20;
    long shots = 20000;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_onset_toy(const OnsetArgs& args) {
    Manifest manifest("onset-toy");
    manifest.add_real("p", args.p);
    manifest.add("checks", args.checks);
    manifest.add_real("p_leak", args.p_leak);
    manifest.add("rounds", args.rounds);
    manifest.add("shots", args.shots);
    manifest.add("seed", static_cast<unsigned long long>(args.seed));
    manifest.add("out", args.out);
    const std::string hash = manifest.hash();

    const auto toy =
        sim::leakage_onset_toy(args.p, args.checks, args.p_leak, args.rounds, args.shots, args.seed);

    std::ostringstream payload;
    payload << "# manifest=" << hash << "\n";
    payload << "# lambda=" << fmt(toy.lambda) << " amplitude=" << fmt(toy.amplitude)
            << " fitted_slope=" << fmt(toy.fitted_slope) << " leaked_shots=" << toy.leaked_shots
            << "\n";
    payload << "m,mean_log_odds,mean_l,analytic\n";
    for (std::size_t m = 0; m < toy.mean_log_odds.size(); ++m)
        payload << m << ',' << fmt(toy.mean_log_odds[m]) << ',' << fmt(toy.mean_l[m]) << ','
                << fmt(toy.analytic[m]) << "\n";
    emit(args.out, payload.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leakage-aware parity-check experiment toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    int workers = 0;
    app.add_option("--workers", workers,
                   "Worker threads (0: LEAKHMM_WORKERS env or hardware); affects speed only")
        ->capture_default_str();

    SimulateArgs sim_args;
    auto* sub_sim = app.add_subcommand("simulate", "Sample repeated-parity-check shot records");
    sub_sim->add_option("config", sim_args.config_path, "Experiment config JSON")->required();
    long shots_flag = 0;
    int rounds_flag = 0;
    std::uint64_t seed_flag = 0;
    sub_sim->add_option("--shots", shots_flag, "Override config shot count");
    sub_sim->add_option("--rounds", rounds_flag, "Override config round count");
    sub_sim->add_option("--seed", seed_flag, "Override config seed");
    sub_sim->add_option("--out", sim_args.out, "Dataset JSONL path")->required();

    TrainArgs train_args;
    auto* sub_train = app.add_subcommand("train", "Fit a detection model by maximum likelihood");
    sub_train->add_option("--model", train_args.model, "Model name")->required();
    sub_train->add_option("--data", train_args.data, "Dataset JSONL path")->required();
    sub_train->add_option("--restarts", train_args.options.restarts)->capture_default_str();
    sub_train->add_option("--max-iters", train_args.options.max_iterations)
        ->capture_default_str();
    sub_train->add_option("--batch-size", train_args.options.batch_size)->capture_default_str();
    sub_train->add_option("--seed", train_args.options.seed)->capture_default_str();
    sub_train->add_option("--fix", train_args.fix,
                          "Freeze a parameter at a calibrated value, name=value");
    sub_train->add_option("--out", train_args.out, "Fitted model JSON path")->required();
    sub_train->add_option("--report", train_args.report,
                          "Diagnostics JSON path (default: <out>.report.json sibling)");

    EvaluateArgs eval_args;
    auto* sub_eval = app.add_subcommand("evaluate", "Score a model against labeled records");
    sub_eval->add_option("mode", eval_args.mode, "What to compute")
        ->required()
        ->check(CLI::IsMember({"roc", "calibration", "lcomp"}));
    sub_eval->add_option("--model", eval_args.model, "Model name or fitted model file")
        ->required();
    sub_eval->add_option("--data", eval_args.data, "Dataset JSONL path")->required();
    sub_eval->add_option("--role", eval_args.role, "Cross-check: data or ancilla");
    sub_eval->add_option("--bins", eval_args.bins, "Calibration bins")->capture_default_str();
    sub_eval->add_option("--model-seed", eval_args.model_seed,
                         "Seed for the model-sampled calibration reference")
        ->capture_default_str();
    sub_eval->add_option("--out", eval_args.out, "CSV path (default: stdout)");

    CurvesArgs curves_args;
    auto* sub_curves =
        app.add_subcommand("curves", "Decode records and tabulate correlators against run length");
    sub_curves->add_option("--data", curves_args.data, "Dataset JSONL path")->required();
    sub_curves->add_option("--strategy", curves_args.strategy, "first, final or no_error")
        ->capture_default_str();
    sub_curves->add_option("--mitigate", curves_args.mitigate,
                           "Postselect on a detection model, model:role:tpr=<target>");
    sub_curves->add_option("--tuning", curves_args.tuning,
                           "Labeled records for threshold tuning (default: --data)");
    sub_curves->add_option("--fit", curves_args.fit_column, "Append an exponential fit block")
        ->check(CLI::IsMember({"xx", "yy", "zz", "F"}));
    sub_curves->add_option("--out", curves_args.out, "CSV path (default: stdout)");

    CompareArgs compare_args;
    auto* sub_compare =
        app.add_subcommand("compare", "AIC comparison of two models on one dataset");
    sub_compare->add_option("--data", compare_args.data, "Dataset JSONL path")->required();
    sub_compare->add_option("--model-a", compare_args.model_a, "Model name or file")->required();
    sub_compare->add_option("--model-b", compare_args.model_b, "Model name or file")->required();
    sub_compare->add_option("--out", compare_args.out, "Report JSON path (default: stdout)");

    OnsetArgs onset_args;
    auto* sub_onset =
        app.add_subcommand("onset-toy", "Log-odds decay study for an isolated leakage event");
    sub_onset->add_option("--p", onset_args.p, "Unleaked error-signal rate")->capture_default_str();
    sub_onset->add_option("--checks", onset_args.checks, "Neighboring checks per round")
        ->capture_default_str();
    sub_onset->add_option("--p-leak", onset_args.p_leak, "Leak probability at round 1")
        ->capture_default_str();
    sub_onset->add_option("--rounds", onset_args.rounds)->capture_default_str();
    sub_onset->add_option("--shots", onset_args.shots)->capture_default_str();
    sub_onset->add_option("--seed", onset_args.seed)->capture_default_str();
    sub_onset->add_option("--out", onset_args.out, "CSV path (default: stdout)");

    // Accept the global --workers flag after the subcommand name too.
    for (CLI::App* sub : {sub_sim, sub_train, sub_eval, sub_curves, sub_compare, sub_onset})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (sub_sim->count("--shots")) sim_args.shots = shots_flag;
    if (sub_sim->count("--rounds")) sim_args.rounds = rounds_flag;
    if (sub_sim->count("--seed")) sim_args.seed = seed_flag;

    try {
        if (app.got_subcommand(sub_sim)) return cmd_simulate(sim_args, workers);
        if (app.got_subcommand(sub_train)) return cmd_train(train_args, workers);
        if (app.got_subcommand(sub_eval)) return cmd_evaluate(eval_args, workers);
        if (app.got_subcommand(sub_curves)) return cmd_curves(curves_args, workers);
        if (app.got_subcommand(sub_compare)) return cmd_compare(compare_args, workers);
        if (app.got_subcommand(sub_onset)) return cmd_onset_toy(onset_args);
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
