#pragma once

#include "leakhmm/analysis.hpp"
#include "leakhmm/hmm.hpp"
#include "leakhmm/models.hpp"
#include "leakhmm/sim.hpp"
#include "leakhmm/trainer.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace leakhmm::io {

// FNV-1a, the project-wide content hash.  Output files carry the hash of the
// run description that produced them (never timestamps), so re-running a
// pipeline reproduces every byte.
std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t value);

// One JSONL line per shot, schema:
// {"protocol","M","m_a",[...],"truth":{"dh","dl","anc"},"frame":{"x","z","depol"},"proj"}
std::string record_to_json(const sim::ShotRecord& record);
sim::ShotRecord record_from_json(const std::string& line);

void write_dataset(std::ostream& out, const std::vector<sim::ShotRecord>& records);
void write_dataset(const std::string& path, const std::vector<sim::ShotRecord>& records);
std::vector<sim::ShotRecord> read_dataset(std::istream& in);
std::vector<sim::ShotRecord> read_dataset(const std::string& path);

std::string config_to_json(const sim::ExperimentConfig& config);
sim::ExperimentConfig config_from_json(const std::string& text);
sim::ExperimentConfig load_config(const std::string& path);

// Model files hold the identifier plus every parameter's value and frozen
// flag; loading rebuilds the structure from the identifier and applies them.
std::string model_to_json(models::ModelId id, const hmm::HmmSpec& spec);
std::pair<models::ModelId, hmm::HmmSpec> model_from_json(const std::string& text);
void save_model(const std::string& path, models::ModelId id, const hmm::HmmSpec& spec);
std::pair<models::ModelId, hmm::HmmSpec> load_model(const std::string& path);

std::string summary_to_json(const sim::DatasetSummary& summary, std::string_view manifest);
std::string fit_report_to_json(const trainer::FitReport& report, std::string_view manifest);

// CSV writers; `manifest` goes into a leading comment line.
void write_curves_csv(std::ostream& out, const std::vector<analysis::CurvePoint>& points,
                      std::string_view manifest);
void write_roc_csv(std::ostream& out, const analysis::RocCurve& curve,
                   std::string_view manifest);
void write_calibration_csv(std::ostream& out, const analysis::CalibrationTable& table,
                           std::string_view manifest);

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

} // namespace leakhmm::io
