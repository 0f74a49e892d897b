#include "rvcp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "rvcp/error.hpp"

namespace rvcp::io {

std::string format_double(double x) {
  if (!std::isfinite(x)) {
    throw Error(ErrorKind::invalid_argument, "cannot serialise a non-finite number");
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, res.ptr);
  // "-0" would read back as the integer 0.
  if (x == 0.0 && std::signbit(x)) s = "-0.0";
  return s;
}

namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line,
                             const std::string& msg) {
  throw Error(ErrorKind::parse_error,
              source + ":" + std::to_string(line) + ": " + msg);
}

json parse_line(const std::string& text, const std::string& source, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(source, line, e.what());
  }
}

std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace

void write_tensor(std::ostream& out, const ScoreTensor& t) {
  json header = {{"version", kFormatVersion},
                 {"K", t.n_candidates()},
                 {"M", t.n_samples()},
                 {"score_kind", std::string(to_string(t.kind()))}};
  out << header.dump() << '\n';
  std::string line;
  for (std::size_t i = 0; i < t.n_items(); ++i) {
    line.clear();
    line += "{\"id\":";
    line += quoted(t.item_id(i));
    if (const auto label = t.true_label(i)) {
      line += ",\"true_label\":";
      line += std::to_string(*label);
    }
    line += ",\"scores\":[";
    for (std::size_t c = 0; c < t.n_candidates(); ++c) {
      if (c) line += ',';
      line += '[';
      const auto xs = t.samples(i, c);
      for (std::size_t m = 0; m < xs.size(); ++m) {
        if (m) line += ',';
        line += format_double(xs[m]);
      }
      line += ']';
    }
    line += "]}\n";
    out << line;
  }
}

ScoreTensor read_tensor(std::istream& in, const std::string& source) {
  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text)) parse_fail(source, 1, "missing header line");
  ++line_no;
  const json header = parse_line(text, source, line_no);
  std::size_t k = 0, m = 0;
  ScoreKind kind = ScoreKind::logit;
  try {
    if (header.at("version").get<int>() != kFormatVersion) {
      parse_fail(source, line_no, "unsupported tensor format version");
    }
    k = header.at("K").get<std::size_t>();
    m = header.at("M").get<std::size_t>();
    kind = parse_score_kind(header.at("score_kind").get<std::string>());
  } catch (const json::exception& e) {
    parse_fail(source, line_no, std::string("bad header: ") + e.what());
  }

  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<std::optional<std::uint32_t>> labels;
  bool any_label = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    const json rec = parse_line(text, source, line_no);
    std::string id;
    try {
      id = rec.at("id").get<std::string>();
      const json& sc = rec.at("scores");
      if (!sc.is_array() || sc.size() != k) {
        throw Error(ErrorKind::header_mismatch,
                    source + ":" + std::to_string(line_no) + ": item '" + id + "' has " +
                        std::to_string(sc.is_array() ? sc.size() : 0) +
                        " candidates, header says K=" + std::to_string(k));
      }
      for (const auto& cand : sc) {
        if (!cand.is_array() || cand.size() != m) {
          throw Error(ErrorKind::header_mismatch,
                      source + ":" + std::to_string(line_no) + ": item '" + id +
                          "' has a candidate with " +
                          std::to_string(cand.is_array() ? cand.size() : 0) +
                          " samples, header says M=" + std::to_string(m));
        }
        for (const auto& v : cand) {
          if (!v.is_number()) parse_fail(source, line_no, "non-numeric score");
          scores.push_back(v.get<double>());
        }
      }
      if (const auto it = rec.find("true_label"); it != rec.end() && !it->is_null()) {
        labels.emplace_back(it->get<std::uint32_t>());
        any_label = true;
      } else {
        labels.emplace_back(std::nullopt);
      }
    } catch (const json::exception& e) {
      parse_fail(source, line_no, std::string("bad record: ") + e.what());
    }
    ids.push_back(std::move(id));
  }
  if (!any_label) labels.clear();
  if (ids.size() * k * m > kLargeTensorCells) {
    std::cerr << "warning: " << source << " holds " << ids.size() * k * m
              << " score cells (> " << kLargeTensorCells << ")\n";
  }
  return ScoreTensor(std::move(ids), k, m, kind, std::move(scores), std::move(labels));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::io_error, "cannot open " + tmp.string() + " for writing");
    }
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::io_error, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorKind::io_error,
                "cannot rename " + tmp.string() + " to " + path.string() + ": " +
                    ec.message());
  }
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  return in;
}

}  // namespace

void save_tensor(const ScoreTensor& t, const std::filesystem::path& path) {
  std::ostringstream out;
  write_tensor(out, t);
  write_file_atomic(path, out.str());
}

ScoreTensor load_tensor(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_tensor(in, path.string());
}

json read_json_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
  }
}

// Predictor -----------------------------------------------------------------

json config_to_json(const CalibrationConfig& c) {
  return {{"method", std::string(to_string(c.method))},
          {"alpha", c.alpha},
          {"estimator", std::string(to_string(c.estimator))},
          {"variance_mode", std::string(to_string(c.variance_mode))},
          {"grid_size", c.grid_size},
          {"refine", c.refine},
          {"sample_index", c.sample_index},
          {"max_g_nodes", c.max_g_nodes}};
}

CalibrationConfig config_from_json(const json& j, CalibrationConfig c) {
  try {
    if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("estimator")) {
      c.estimator = parse_estimator(j["estimator"].get<std::string>());
    }
    if (j.contains("variance_mode")) {
      c.variance_mode = parse_variance_mode(j["variance_mode"].get<std::string>());
    }
    if (j.contains("grid_size")) c.grid_size = j["grid_size"].get<std::size_t>();
    if (j.contains("refine")) c.refine = j["refine"].get<bool>();
    if (j.contains("sample_index")) c.sample_index = j["sample_index"].get<std::size_t>();
    if (j.contains("max_g_nodes")) c.max_g_nodes = j["max_g_nodes"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad config: ") + e.what());
  }
  return c;
}

namespace {

json model_to_json(const EBModel& m) {
  const auto& d = m.diagnostics;
  return {{"mu", m.mu},
          {"tau2", m.tau2},
          {"g_support", m.g_support},
          {"g_nodes", m.g_nodes},
          {"diagnostics",
           {{"n", d.n},
            {"obs_mean", d.obs_mean},
            {"obs_variance", d.obs_variance},
            {"mean_obs_var", d.mean_obs_var},
            {"raw_tau2", d.raw_tau2},
            {"tau2_floored", d.tau2_floored},
            {"zero_variance_count", d.zero_variance_count}}}};
}

EBModel model_from_json(const json& j) {
  EBModel m;
  m.mu = j.at("mu").get<double>();
  m.tau2 = j.at("tau2").get<double>();
  m.g_support = j.at("g_support").get<std::vector<double>>();
  m.g_nodes = j.at("g_nodes").get<std::vector<double>>();
  const json& d = j.at("diagnostics");
  m.diagnostics.n = d.at("n").get<std::size_t>();
  m.diagnostics.obs_mean = d.at("obs_mean").get<double>();
  m.diagnostics.obs_variance = d.at("obs_variance").get<double>();
  m.diagnostics.mean_obs_var = d.at("mean_obs_var").get<double>();
  m.diagnostics.raw_tau2 = d.at("raw_tau2").get<double>();
  m.diagnostics.tau2_floored = d.at("tau2_floored").get<bool>();
  m.diagnostics.zero_variance_count = d.at("zero_variance_count").get<std::size_t>();
  return m;
}

}  // namespace

json predictor_to_json(const CalibratedPredictor& p) {
  const ScoringModel& s = p.scoring;
  json j = {{"format", "rvcp-predictor"},
            {"version", kFormatVersion},
            {"method", std::string(to_string(s.config.method))},
            {"alpha", s.config.alpha},
            {"threshold", p.threshold},
            {"n_cal", p.n_cal},
            {"rank", p.rank},
            {"K", s.n_candidates},
            {"score_kind", std::string(to_string(s.kind))},
            {"config", config_to_json(s.config)}};
  if (s.table) {
    j["eb_model"] = model_to_json(s.table->model);
    j["threshold_table"] = {{"beta", s.table->beta},
                            {"theta", s.table->theta},
                            {"z", s.table->z},
                            {"zero_variance", s.table->zero_variance},
                            {"max_residual", s.table->max_residual}};
  }
  if (s.lambda) {
    j["lambda_table"] = {{"K", s.lambda->n_candidates},
                         {"M", s.lambda->n_samples},
                         {"population", s.lambda->population},
                         {"bar", s.lambda->bar},
                         {"pass_fraction", s.lambda->pass_fraction}};
  }
  return j;
}

CalibratedPredictor predictor_from_json(const json& j) {
  CalibratedPredictor p;
  try {
    if (j.at("format").get<std::string>() != "rvcp-predictor" ||
        j.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorKind::parse_error, "not an rvcp predictor file (version 1)");
    }
    ScoringModel& s = p.scoring;
    s.config = config_from_json(j.at("config"));
    s.n_candidates = j.at("K").get<std::size_t>();
    s.kind = parse_score_kind(j.at("score_kind").get<std::string>());
    p.threshold = j.at("threshold").get<double>();
    p.n_cal = j.at("n_cal").get<std::size_t>();
    p.rank = j.at("rank").get<std::size_t>();
    if (j.contains("threshold_table")) {
      const json& t = j["threshold_table"];
      ThresholdTable table;
      table.model = model_from_json(j.at("eb_model"));
      table.beta = t.at("beta").get<std::vector<double>>();
      table.theta = t.at("theta").get<std::vector<double>>();
      table.z = t.at("z").get<std::vector<double>>();
      table.zero_variance = t.at("zero_variance").get<bool>();
      table.max_residual = t.at("max_residual").get<double>();
      check_table(table);
      s.table = std::move(table);
    }
    if (j.contains("lambda_table")) {
      const json& l = j["lambda_table"];
      LambdaTable lambda;
      lambda.n_candidates = l.at("K").get<std::size_t>();
      lambda.n_samples = l.at("M").get<std::size_t>();
      lambda.population = l.at("population").get<std::size_t>();
      lambda.bar = l.at("bar").get<std::vector<std::uint32_t>>();
      lambda.pass_fraction = l.at("pass_fraction").get<std::vector<double>>();
      s.lambda = std::move(lambda);
    }
    if (s.config.method == Method::cp_rvalue &&
        !(s.config.estimator == Estimator::parametric ? s.table.has_value()
                                                      : s.lambda.has_value())) {
      throw Error(ErrorKind::parse_error, "cp-rvalue predictor lacks its frozen tables");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad predictor file: ") + e.what());
  }
  return p;
}

void save_predictor(const CalibratedPredictor& p, const std::filesystem::path& path) {
  write_file_atomic(path, predictor_to_json(p).dump(1) + "\n");
}

CalibratedPredictor load_predictor(const std::filesystem::path& path) {
  return predictor_from_json(read_json_file(path));
}

// Prediction sets -------------------------------------------------------------

void write_sets(std::ostream& out, const CalibratedPredictor& p,
                const std::vector<PredictionSet>& sets) {
  json header = {{"version", kFormatVersion},
                 {"kind", "prediction_sets"},
                 {"method", std::string(to_string(p.method()))},
                 {"alpha", p.alpha()},
                 {"threshold", p.threshold},
                 {"n_cal", p.n_cal},
                 {"config", config_to_json(p.scoring.config)}};
  out << header.dump() << '\n';
  std::string line;
  for (const auto& set : sets) {
    line = "{\"id\":" + quoted(set.item_id) + ",\"members\":[";
    for (std::size_t j = 0; j < set.members.size(); ++j) {
      if (j) line += ',';
      line += '[' + std::to_string(set.members[j].index) + ',' +
              format_double(set.members[j].score) + ']';
    }
    line += "]}\n";
    out << line;
  }
}

SetsFile read_sets(std::istream& in, const std::string& source) {
  SetsFile f;
  std::string text;
  std::size_t line_no = 1;
  if (!std::getline(in, text)) parse_fail(source, 1, "missing header line");
  f.header = parse_line(text, source, line_no);
  Method method = Method::cp;
  try {
    if (f.header.at("kind").get<std::string>() != "prediction_sets") {
      parse_fail(source, 1, "not a prediction-sets file");
    }
    method = parse_method(f.header.at("method").get<std::string>());
  } catch (const json::exception& e) {
    parse_fail(source, 1, std::string("bad header: ") + e.what());
  }
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    const json rec = parse_line(text, source, line_no);
    PredictionSet set;
    set.method = method;
    try {
      set.item_id = rec.at("id").get<std::string>();
      for (const auto& m : rec.at("members")) {
        set.members.push_back({m.at(0).get<std::uint32_t>(), m.at(1).get<double>()});
      }
    } catch (const json::exception& e) {
      parse_fail(source, line_no, std::string("bad record: ") + e.what());
    }
    f.sets.push_back(std::move(set));
  }
  return f;
}

void save_sets(const CalibratedPredictor& p, const std::vector<PredictionSet>& sets,
               const std::filesystem::path& path) {
  std::ostringstream out;
  write_sets(out, p, sets);
  write_file_atomic(path, out.str());
}

SetsFile load_sets(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_sets(in, path.string());
}

// Reports -------------------------------------------------------------------

json report_to_json(const EvalReport& r) {
  json items = json::array();
  for (const auto& ev : r.items) {
    items.push_back({{"id", ev.item_id},
                     {"size", ev.size},
                     {"covered", ev.covered},
                     {"true_index", ev.true_index ? json(*ev.true_index) : json(nullptr)}});
  }
  return {{"n_items", r.n_items},
          {"coverage", r.coverage},
          {"mean_size", r.mean_size},
          {"sd_size", r.sd_size},
          {"mean_true_index",
           r.mean_true_index ? json(*r.mean_true_index) : json(nullptr)},
          {"empty_sets", r.empty_sets},
          {"items", items}};
}

json spec_to_json(const GenerativeSpec& s) {
  json g = {{"kind", std::string(to_string(s.g.kind))}};
  switch (s.g.kind) {
    case GSpec::Kind::point: g["s"] = s.g.a; break;
    case GSpec::Kind::two_point:
      g["s1"] = s.g.a;
      g["s2"] = s.g.b;
      g["w"] = s.g.w;
      break;
    case GSpec::Kind::lognormal:
      g["m"] = s.g.a;
      g["v"] = s.g.b;
      break;
    case GSpec::Kind::uniform:
      g["a"] = s.g.a;
      g["b"] = s.g.b;
      break;
  }
  return {{"mu", s.mu},       {"tau2", s.tau2},       {"g", g},
          {"K", s.n_candidates}, {"M", s.n_samples},  {"n_cal", s.n_cal},
          {"n_test", s.n_test},  {"seed", s.rng.seed}, {"stream_id", s.rng.stream_id}};
}

GenerativeSpec spec_from_json(const json& j) {
  GenerativeSpec s;
  try {
    s.mu = j.value("mu", s.mu);
    s.tau2 = j.value("tau2", s.tau2);
    s.n_candidates = j.value("K", s.n_candidates);
    s.n_samples = j.value("M", s.n_samples);
    s.n_cal = j.value("n_cal", s.n_cal);
    s.n_test = j.value("n_test", s.n_test);
    if (j.contains("g")) {
      const json& g = j["g"];
      const std::string kind = g.at("kind").get<std::string>();
      if (kind == "point") {
        s.g = GSpec::point(g.at("s").get<double>());
      } else if (kind == "two_point") {
        s.g = GSpec::two_point(g.at("s1").get<double>(), g.at("s2").get<double>(),
                               g.at("w").get<double>());
      } else if (kind == "lognormal") {
        s.g = GSpec::lognormal(g.at("m").get<double>(), g.at("v").get<double>());
      } else if (kind == "uniform") {
        s.g = GSpec::uniform(g.at("a").get<double>(), g.at("b").get<double>());
      } else {
        throw Error(ErrorKind::invalid_argument, "unknown g kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad generative spec: ") + e.what());
  }
  validate(s);
  return s;
}

json experiment_to_json(const ExperimentResult& r) {
  json alphas = json::array();
  for (const auto& a : r.alphas) {
    json methods = json::array();
    for (const auto& m : a.methods) {
      methods.push_back({{"method", m.label},
                         {"coverage", m.coverage_mean},
                         {"coverage_se", m.coverage_se},
                         {"mean_size", m.size_mean},
                         {"mean_size_se", m.size_se},
                         {"mean_true_index", m.true_index_mean},
                         {"empty_sets", m.empty_sets}});
    }
    json diffs = json::array();
    for (const auto& d : a.differences) {
      diffs.push_back({{"a", d.a}, {"b", d.b}, {"mean", d.mean}, {"se", d.se},
                       {"n", d.n}});
    }
    alphas.push_back({{"alpha", a.alpha}, {"methods", methods}, {"paired_differences", diffs}});
  }
  json extras = json::object();
  for (const auto& [k, v] : r.extras) extras[k] = v;
  return {{"experiment", r.name},
          {"n_trials", r.n_trials},
          {"spec", spec_to_json(r.spec)},
          {"results", alphas},
          {"extras", extras}};
}

}  // namespace rvcp::io
