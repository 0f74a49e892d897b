#pragma once

// Line-delimited tensor files, predictor files, prediction-set files and
// JSON reports. Numbers are written in shortest round-trip form, so a
// save -> load -> save cycle reproduces files byte for byte.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvcp/conformal.hpp"
#include "rvcp/core_types.hpp"
#include "rvcp/simulator.hpp"

namespace rvcp::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr std::size_t kLargeTensorCells = 1'000'000;

/// Shortest decimal that parses back to exactly x.
std::string format_double(double x);

void write_tensor(std::ostream& out, const ScoreTensor& t);
ScoreTensor read_tensor(std::istream& in, const std::string& source = "<stream>");

void save_tensor(const ScoreTensor& t, const std::filesystem::path& path);
ScoreTensor load_tensor(const std::filesystem::path& path);

json config_to_json(const CalibrationConfig& c);
CalibrationConfig config_from_json(const json& j, CalibrationConfig defaults = {});

json predictor_to_json(const CalibratedPredictor& p);
CalibratedPredictor predictor_from_json(const json& j);
void save_predictor(const CalibratedPredictor& p, const std::filesystem::path& path);
CalibratedPredictor load_predictor(const std::filesystem::path& path);

struct SetsFile {
  json header;
  std::vector<PredictionSet> sets;
};

void write_sets(std::ostream& out, const CalibratedPredictor& p,
                const std::vector<PredictionSet>& sets);
SetsFile read_sets(std::istream& in, const std::string& source = "<stream>");
void save_sets(const CalibratedPredictor& p, const std::vector<PredictionSet>& sets,
               const std::filesystem::path& path);
SetsFile load_sets(const std::filesystem::path& path);

json report_to_json(const EvalReport& r);
json experiment_to_json(const ExperimentResult& r);

json spec_to_json(const GenerativeSpec& s);
/// Missing keys keep the defaults of GenerativeSpec; rng is not read.
GenerativeSpec spec_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace rvcp::io
