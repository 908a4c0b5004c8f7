#pragma once

// Text formats: signal CSV (`t,ch0,ch1,...`), model JSON (row-major A, B, C,
// D, K) and the JSON experiment configuration.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ios>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hdpbsid/error.hpp"
#include "hdpbsid/experiment.hpp"
#include "hdpbsid/hermite_basis.hpp"
#include "hdpbsid/identification.hpp"
#include "hdpbsid/lti_sim.hpp"

namespace hdpbsid {

using json = nlohmann::ordered_json;

/// Malformed input text. `line()` is 1-based, 0 when no line applies.
class FormatError : public Error {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& what)
      : Error(compose(source, line, what)), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  static std::string compose(const std::string& source, std::size_t line,
                             const std::string& what) {
    std::string s = source;
    if (line > 0) s += ":" + std::to_string(line);
    return s + ": " + what;
  }
  std::size_t line_;
};

/// 17 significant digits, the shortest precision that round-trips every double.
inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parse a signal CSV. The header is `t` followed by one name per channel;
/// every data row carries the same number of fields.
inline SampledSignal read_signal_csv(std::istream& in, const std::string& source = "<csv>") {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) {
      header = detail::split_fields(line);
      break;
    }
  }
  if (header.empty()) throw FormatError(source, 0, "empty file");
  if (header[0] != "t") throw FormatError(source, lineno, "header must start with 't'");
  if (header.size() < 2) throw FormatError(source, lineno, "header names no channels");
  for (std::size_t i = 1; i < header.size(); ++i)
    if (header[i].empty()) throw FormatError(source, lineno, "empty column name");

  const std::size_t nf = header.size();
  std::vector<double> t;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != nf) {
      throw FormatError(source, lineno,
                        "expected " + std::to_string(nf) + " fields, found " +
                            std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < nf; ++i) {
      const auto v = detail::parse_double(fields[i]);
      if (!v || !std::isfinite(*v))
        throw FormatError(source, lineno, "not a finite number: '" + fields[i] + "'");
      if (i == 0) {
        if (!t.empty() && !(*v > t.back()))
          throw FormatError(source, lineno, "time stamps must be strictly increasing");
        t.push_back(*v);
      } else {
        vals.push_back(*v);
      }
    }
  }
  if (t.empty()) throw FormatError(source, lineno, "no data rows");

  const Index n = Index(t.size()), ch = Index(nf - 1);
  VectorXd times = Eigen::Map<const VectorXd>(t.data(), n);
  MatrixXd values = Eigen::Map<const MatrixXd>(vals.data(), ch, n);
  return SampledSignal(std::move(times), std::move(values));
}

inline SampledSignal read_signal_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError(path, 0, "cannot open file");
  return read_signal_csv(f, path);
}

inline void write_signal_csv(std::ostream& out, const SampledSignal& s) {
  out << "t";
  for (Index c = 0; c < s.channels(); ++c) out << ",ch" << c;
  out << "\n";
  for (Index k = 0; k < s.samples(); ++k) {
    out << format_double(s.times()[k]);
    for (Index c = 0; c < s.channels(); ++c) out << "," << format_double(s.values()(c, k));
    out << "\n";
  }
}

/// Rows `first .. first+count-1` of a signal as a signal of their own.
inline SampledSignal select_channels(const SampledSignal& s, Index first, Index count) {
  if (first < 0 || count < 1 || first + count > s.channels())
    throw Error("channel selection out of range");
  return SampledSignal(s.times(), s.values().middleRows(first, count));
}

inline json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Row-major nested arrays. `cols_hint` sizes a matrix given as `[]`.
inline MatrixXd matrix_from_json(const json& j, const std::string& name,
                                 Index cols_hint = 0) {
  if (!j.is_array()) throw Error(name + " must be an array of rows");
  if (j.empty()) return MatrixXd::Zero(0, cols_hint);
  const Index rows = Index(j.size());
  if (!j[0].is_array()) throw Error(name + " must be an array of rows");
  const Index cols = Index(j[0].size());
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || Index(row.size()) != cols)
      throw Error(name + " rows must all have " + std::to_string(cols) + " entries");
    for (Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw Error(name + " entries must be numbers");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

inline json model_to_json(const StateSpaceModel& m) {
  json j;
  j["A"] = matrix_to_json(m.A);
  j["B"] = matrix_to_json(m.B);
  j["C"] = matrix_to_json(m.C);
  j["D"] = matrix_to_json(m.D);
  j["K"] = matrix_to_json(m.K);
  return j;
}

/// D defaults to zero and K to zero when absent.
inline StateSpaceModel model_from_json(const json& j) {
  if (!j.is_object()) throw Error("model must be an object");
  for (const char* k : {"A", "B", "C"})
    if (!j.contains(k)) throw Error(std::string("model is missing ") + k);
  MatrixXd a = matrix_from_json(j["A"], "A");
  MatrixXd b = matrix_from_json(j["B"], "B");
  MatrixXd c = matrix_from_json(j["C"], "C", a.rows());
  MatrixXd d = j.contains("D") ? matrix_from_json(j["D"], "D", b.cols())
                               : MatrixXd::Zero(c.rows(), b.cols());
  MatrixXd k = j.contains("K") ? matrix_from_json(j["K"], "K", c.rows()) : MatrixXd{};
  return StateSpaceModel(std::move(a), std::move(b), std::move(c), std::move(d),
                         std::move(k));
}

namespace detail {

/// 1-based line of the first `"key"` in the text, 0 if absent.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return std::size_t(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return std::size_t(std::count(text.begin(), text.begin() + offset, '\n')) + 1;
}

}  // namespace detail

/// A parsed JSON document that remembers its text, so that semantic errors
/// can point at the line of the offending key.
class JsonDocument {
 public:
  JsonDocument(std::string text, std::string source)
      : text_(std::move(text)), source_(std::move(source)) {
    try {
      root_ = json::parse(text_);
    } catch (const json::parse_error& e) {
      const std::size_t line = e.byte > 0 ? detail::line_of_offset(text_, e.byte - 1) : 1;
      std::string msg = e.what();
      const auto cut = msg.find("parse error");
      if (cut != std::string::npos) msg = msg.substr(cut);
      throw FormatError(source_, line, msg);
    }
    if (!root_.is_object()) throw FormatError(source_, 1, "top level must be an object");
  }

  static JsonDocument from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(path, 0, "cannot open file");
    std::stringstream ss;
    ss << f.rdbuf();
    return JsonDocument(ss.str(), path);
  }

  const json& root() const noexcept { return root_; }
  const std::string& source() const noexcept { return source_; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw FormatError(source_, detail::line_of_key(text_, key), what);
  }

 private:
  std::string text_;
  std::string source_;
  json root_;
};

namespace detail {

template <class T>
T get_as(const JsonDocument& doc, const json& obj, const std::string& key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    doc.fail(key, "'" + key + "' has the wrong type");
  }
}

inline void reject_unknown(const JsonDocument& doc, const json& obj,
                           std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return it.key() == k; });
    if (!ok) doc.fail(it.key(), "unknown key '" + it.key() + "'");
  }
}

template <class T>
void read_opt(const JsonDocument& doc, const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = get_as<T>(doc, obj, key);
}

inline std::optional<double> read_snr_entry(const JsonDocument& doc, const json& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string() && (v == "inf" || v == "none")) return std::nullopt;
  if (!v.is_number()) doc.fail("snr_db", "'snr_db' entries must be numbers or null");
  return v.get<double>();
}

}  // namespace detail

/// The `ident` block: n_max, beta, gamma, past, future, order ("auto" or an
/// integer), sv_gap_threshold.
inline IdentConfig ident_config_from_json(const JsonDocument& doc, const json& j) {
  if (!j.is_object()) doc.fail("ident", "'ident' must be an object");
  detail::reject_unknown(doc, j, {"n_max", "beta", "gamma", "past", "future", "order",
                                  "sv_gap_threshold"});
  IdentConfig c;
  detail::read_opt(doc, j, "n_max", c.n_max);
  detail::read_opt(doc, j, "beta", c.beta);
  detail::read_opt(doc, j, "gamma", c.gamma);
  detail::read_opt(doc, j, "past", c.past);
  detail::read_opt(doc, j, "future", c.future);
  detail::read_opt(doc, j, "sv_gap_threshold", c.sv_gap_threshold);
  if (j.contains("order")) {
    const json& o = j["order"];
    if (o.is_null() || o == "auto") c.order.reset();
    else if (o.is_number_integer()) c.order = o.get<int>();
    else doc.fail("order", "'order' must be an integer or \"auto\"");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw FormatError(doc.source(), 0, e.what());
  }
  return c;
}

/// Configuration file for `identify`: an optional `ident` block and the
/// number of leading channels of a combined data file that are inputs.
struct IdentifyConfig {
  IdentConfig ident;
  std::optional<int> inputs;
};

inline IdentifyConfig identify_config_from_json(const JsonDocument& doc) {
  const json& r = doc.root();
  detail::reject_unknown(doc, r, {"ident", "inputs"});
  IdentifyConfig c;
  if (r.contains("ident")) c.ident = ident_config_from_json(doc, r["ident"]);
  if (r.contains("inputs")) {
    c.inputs = detail::get_as<int>(doc, r, "inputs");
    if (*c.inputs < 1) doc.fail("inputs", "'inputs' must be at least 1");
  }
  return c;
}

/// Monte Carlo configuration. Keys: model (inline object) or model_file,
/// sweep {duration, f1, f2}, samples, oversample, bandlimit_eta (or null),
/// snr_db (array; null means noise-free), ident, trials, base_seed,
/// include_failures, jobs, bode_points.
struct MonteCarloConfig {
  ExperimentConfig experiment;
  int bode_points = 200;
};

inline MonteCarloConfig montecarlo_config_from_json(const JsonDocument& doc,
                                                    const std::string& base_dir = ".") {
  const json& r = doc.root();
  detail::reject_unknown(doc, r, {"model", "model_file", "sweep", "samples", "oversample",
                                  "bandlimit_eta", "snr_db", "ident", "trials", "base_seed",
                                  "include_failures", "jobs", "bode_points"});
  MonteCarloConfig mc;
  ExperimentConfig& c = mc.experiment;

  if (r.contains("model") == r.contains("model_file"))
    doc.fail("model", "exactly one of 'model' and 'model_file' is required");
  try {
    if (r.contains("model")) {
      c.model = model_from_json(r["model"]);
    } else {
      std::string path = detail::get_as<std::string>(doc, r, "model_file");
      if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
      c.model = model_from_json(JsonDocument::from_file(path).root());
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    doc.fail(r.contains("model") ? "model" : "model_file", e.what());
  }

  if (r.contains("sweep")) {
    const json& s = r["sweep"];
    if (!s.is_object()) doc.fail("sweep", "'sweep' must be an object");
    detail::reject_unknown(doc, s, {"duration", "f1", "f2"});
    detail::read_opt(doc, s, "duration", c.sweep.duration);
    detail::read_opt(doc, s, "f1", c.sweep.f1);
    detail::read_opt(doc, s, "f2", c.sweep.f2);
  }
  detail::read_opt(doc, r, "samples", c.samples);
  detail::read_opt(doc, r, "oversample", c.oversample);
  if (r.contains("bandlimit_eta")) {
    if (r["bandlimit_eta"].is_null()) c.bandlimit_eta.reset();
    else c.bandlimit_eta = detail::get_as<int>(doc, r, "bandlimit_eta");
  }
  if (r.contains("snr_db")) {
    const json& s = r["snr_db"];
    c.snr_db.clear();
    if (s.is_array()) {
      for (const auto& v : s) c.snr_db.push_back(detail::read_snr_entry(doc, v));
    } else {
      c.snr_db.push_back(detail::read_snr_entry(doc, s));
    }
    if (c.snr_db.empty()) doc.fail("snr_db", "'snr_db' must list at least one level");
  }
  if (r.contains("ident")) c.ident = ident_config_from_json(doc, r["ident"]);
  detail::read_opt(doc, r, "trials", c.trials);
  detail::read_opt(doc, r, "base_seed", c.base_seed);
  detail::read_opt(doc, r, "include_failures", c.include_failures);
  detail::read_opt(doc, r, "jobs", c.jobs);
  detail::read_opt(doc, r, "bode_points", mc.bode_points);
  if (mc.bode_points < 2) doc.fail("bode_points", "'bode_points' must be at least 2");
  if (c.bandlimit_eta && *c.bandlimit_eta < 0)
    doc.fail("bandlimit_eta", "'bandlimit_eta' must be non-negative");

  try {
    c.validate();
  } catch (const Error& e) {
    throw FormatError(doc.source(), 0, e.what());
  }
  return mc;
}

}  // namespace hdpbsid
