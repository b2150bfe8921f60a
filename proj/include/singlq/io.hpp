#pragma once

// JSON problem and report documents, TSV trajectories.
//
// Matrices are flat row-major arrays next to explicit n and m. Doubles are
// written in shortest round-trip form, so parse(emit(doc)) == doc exactly.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "singlq/analyzer.hpp"
#include "singlq/geometry.hpp"
#include "singlq/matlib.hpp"
#include "singlq/model.hpp"
#include "singlq/riccati.hpp"

namespace singlq {

using Json = nlohmann::json;

/// Malformed document: bad JSON, missing or ill-typed field, wrong length.
class ParseError : public Error {
 public:
  using Error::Error;
};

struct ProblemDocument {
  std::string name;
  Index n = 0;
  Index m = 0;
  Matrix A, B, Q, S, R;
  std::optional<Tolerances> tolerances;
  std::optional<RdeOptions> rde;
  std::vector<Vector> x0;
};

namespace detail {

inline Json matrix_to_json(const Matrix& M) {
  Json arr = Json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) arr.push_back(M(i, j));
  }
  return arr;
}

inline Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline double number_field(const Json& j, std::string_view field) {
  if (!j.is_number()) throw ParseError("field '" + std::string(field) + "': expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ParseError("field '" + std::string(field) + "': non-finite number");
  return x;
}

inline Index count_field(const Json& doc, const char* field) {
  if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
  const Json& j = doc.at(field);
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    throw ParseError(std::string("field '") + field + "': expected a positive integer");
  }
  return static_cast<Index>(j.get<long long>());
}

inline Matrix matrix_field(const Json& doc, const char* field, Index rows, Index cols) {
  if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
  const Json& j = doc.at(field);
  if (!j.is_array()) throw ParseError(std::string("field '") + field + "': expected a row-major array");
  if (static_cast<Index>(j.size()) != rows * cols) {
    std::ostringstream os;
    os << "field '" << field << "': expected " << rows * cols << " entries (" << rows << "x" << cols
       << "), got " << j.size();
    throw ParseError(os.str());
  }
  Matrix M(rows, cols);
  for (Index k = 0; k < rows * cols; ++k) {
    M(k / cols, k % cols) = number_field(j[static_cast<std::size_t>(k)], field);
  }
  return M;
}

inline Vector vector_field(const Json& j, std::string_view field, Index n) {
  if (!j.is_array() || static_cast<Index>(j.size()) != n) {
    std::ostringstream os;
    os << "field '" << field << "': expected an array of " << n << " numbers";
    throw ParseError(os.str());
  }
  Vector v(n);
  for (Index k = 0; k < n; ++k) v(k) = number_field(j[static_cast<std::size_t>(k)], field);
  return v;
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> known,
                           std::string_view where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || item.key() == k;
    if (!ok) throw ParseError("unknown field '" + item.key() + "' in " + std::string(where));
  }
}

inline Tolerances tolerances_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("field 'tolerances': expected an object");
  reject_unknown(j, {"rank_tol", "residual_tol", "psd_tol"}, "tolerances");
  Tolerances t;
  if (j.contains("rank_tol")) t.rank_tol = number_field(j["rank_tol"], "tolerances.rank_tol");
  if (j.contains("residual_tol")) t.residual_tol = number_field(j["residual_tol"], "tolerances.residual_tol");
  if (j.contains("psd_tol")) t.psd_tol = number_field(j["psd_tol"], "tolerances.psd_tol");
  return t;
}

inline Json tolerances_to_json(const Tolerances& t) {
  return Json{{"rank_tol", t.rank_tol}, {"residual_tol", t.residual_tol}, {"psd_tol", t.psd_tol}};
}

inline RdeOptions rde_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("field 'rde': expected an object");
  reject_unknown(j,
                 {"step", "max_time", "conv_tol", "div_bound", "rel_tol", "abs_tol", "max_step",
                  "sample_interval"},
                 "rde");
  RdeOptions o;
  const auto take = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = number_field(j[key], std::string("rde.") + key);
  };
  take("step", o.step);
  take("max_time", o.max_time);
  take("conv_tol", o.conv_tol);
  take("rel_tol", o.rel_tol);
  take("abs_tol", o.abs_tol);
  take("max_step", o.max_step);
  take("sample_interval", o.sample_interval);
  if (j.contains("div_bound")) o.div_bound = number_field(j["div_bound"], "rde.div_bound");
  return o;
}

inline Json rde_to_json(const RdeOptions& o) {
  Json j{{"step", o.step},       {"max_time", o.max_time}, {"conv_tol", o.conv_tol},
         {"rel_tol", o.rel_tol}, {"abs_tol", o.abs_tol},   {"max_step", o.max_step},
         {"sample_interval", o.sample_interval}};
  if (o.div_bound) j["div_bound"] = *o.div_bound;
  return j;
}

// 1-based line and column of a byte offset.
inline std::string position_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline ProblemDocument problem_document_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("problem document must be a JSON object");
  detail::reject_unknown(doc, {"name", "n", "m", "A", "B", "Q", "S", "R", "tolerances", "rde", "x0"},
                         "problem document");
  ProblemDocument d;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw ParseError("field 'name': expected a string");
    d.name = doc["name"].get<std::string>();
  }
  d.n = detail::count_field(doc, "n");
  d.m = detail::count_field(doc, "m");
  d.A = detail::matrix_field(doc, "A", d.n, d.n);
  d.B = detail::matrix_field(doc, "B", d.n, d.m);
  d.Q = detail::matrix_field(doc, "Q", d.n, d.n);
  d.S = detail::matrix_field(doc, "S", d.n, d.m);
  d.R = detail::matrix_field(doc, "R", d.m, d.m);
  if (doc.contains("tolerances")) d.tolerances = detail::tolerances_from_json(doc["tolerances"]);
  if (doc.contains("rde")) d.rde = detail::rde_from_json(doc["rde"]);
  if (doc.contains("x0")) {
    const Json& x = doc["x0"];
    if (!x.is_array()) throw ParseError("field 'x0': expected an array");
    const bool single = !x.empty() && x[0].is_number();
    if (single) {
      d.x0.push_back(detail::vector_field(x, "x0", d.n));
    } else {
      for (std::size_t k = 0; k < x.size(); ++k) {
        d.x0.push_back(detail::vector_field(x[k], "x0[" + std::to_string(k) + "]", d.n));
      }
    }
  }
  return d;
}

/// Parses a problem document; errors name the offending line or field.
inline ProblemDocument parse_problem_document(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError("malformed JSON at " + detail::position_of(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  return problem_document_from_json(doc);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ProblemDocument read_problem_document(const std::string& path) {
  try {
    return parse_problem_document(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline Json problem_document_to_json(const ProblemDocument& d) {
  Json j;
  j["name"] = d.name;
  j["n"] = d.n;
  j["m"] = d.m;
  j["A"] = detail::matrix_to_json(d.A);
  j["B"] = detail::matrix_to_json(d.B);
  j["Q"] = detail::matrix_to_json(d.Q);
  j["S"] = detail::matrix_to_json(d.S);
  j["R"] = detail::matrix_to_json(d.R);
  if (d.tolerances) j["tolerances"] = detail::tolerances_to_json(*d.tolerances);
  if (d.rde) j["rde"] = detail::rde_to_json(*d.rde);
  if (!d.x0.empty()) {
    Json xs = Json::array();
    for (const Vector& v : d.x0) xs.push_back(detail::vector_to_json(v));
    j["x0"] = xs;
  }
  return j;
}

inline std::string emit_problem_document(const ProblemDocument& d) {
  return problem_document_to_json(d).dump(2) + "\n";
}

inline ProblemDocument document_of(const Problem& P, std::string name = {}) {
  ProblemDocument d;
  d.name = std::move(name);
  d.n = P.n();
  d.m = P.m();
  d.A = P.A();
  d.B = P.B();
  d.Q = P.Q();
  d.S = P.S();
  d.R = P.R();
  d.tolerances = P.tolerances();
  return d;
}

/// Validated Problem; `override_tol` replaces the document's tolerances.
inline Problem to_problem(const ProblemDocument& d, std::optional<Tolerances> override_tol = std::nullopt) {
  const Tolerances tol = override_tol ? *override_tol : d.tolerances.value_or(Tolerances{});
  return validate_problem(d.A, d.B, d.Q, d.S, d.R, tol);
}

inline Problem parse_problem(const std::string& path) { return to_problem(read_problem_document(path)); }

struct CostEntry {
  Vector x0;
  double expected = 0.0;
  std::optional<double> simulated;
  std::optional<double> relative_error;
  std::string status;
};

struct ReportDocument {
  std::string name;
  std::string A, B, C, D, finiteness;
  bool sstar_eq_rstar = false;
  bool consistency_ok = true;
  bool fragile = false;
  std::string rde_status;
  double rde_final_time = 0.0;
  std::optional<Matrix> X_bar;
  std::optional<Matrix> K;
  std::map<std::string, Index> dims;
  std::vector<CostEntry> costs;
  std::vector<std::string> notes;
  std::map<std::string, Matrix> bases;

  bool any_undecided() const {
    for (const auto* v : {&A, &B, &C, &D, &finiteness}) {
      if (*v == "undecided") return true;
    }
    return false;
  }
};

inline ReportDocument make_report_document(const Report& rep, const std::vector<Vector>& x0s = {},
                                           bool with_bases = false, const Problem* P = nullptr) {
  ReportDocument d;
  d.name = rep.name;
  const ConditionVerdicts& v = rep.verdicts;
  d.A = to_string(v.A);
  d.B = to_string(v.B);
  d.C = to_string(v.C);
  d.D = to_string(v.D);
  d.finiteness = to_string(v.finiteness);
  d.sstar_eq_rstar = v.sstar_eq_rstar;
  d.consistency_ok = v.consistency_ok;
  d.fragile = rep.condition_d.fragile;
  d.rde_status = to_string(rep.condition_b.rde.status);
  d.rde_final_time = rep.condition_b.rde.final_time;
  d.notes = v.notes;
  const GeometricSummary& g = rep.condition_d.summary;
  d.dims = {{"p", rep.factorization.p()},    {"vstar", g.vstar.dim()},         {"sstar", g.sstar.dim()},
            {"rstar", g.rstar.dim()},        {"reachable", g.reachable.dim()}, {"xstab", g.xstab.dim()}};
  if (rep.synthesis) {
    d.X_bar = rep.synthesis->X_bar;
    d.K = rep.synthesis->K;
    if (P) {
      for (const Vector& x0 : x0s) {
        const CostVerification cv = verify_optimal_cost(*P, *rep.synthesis, x0);
        CostEntry e{x0, cv.expected_cost, cv.simulated_cost, cv.relative_error, to_string(cv.status)};
        if (cv.horizon == 0.0 && cv.status == Verdict::undecided) {
          e.simulated.reset();
          e.relative_error.reset();
        }
        d.costs.push_back(std::move(e));
      }
    }
  }
  if (with_bases) {
    d.bases = {{"vstar", g.vstar.basis()},         {"sstar", g.sstar.basis()}, {"rstar", g.rstar.basis()},
               {"reachable", g.reachable.basis()}, {"xstab", g.xstab.basis()}};
  }
  return d;
}

namespace detail {

inline Json sized_matrix_to_json(const Matrix& M) {
  return Json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", matrix_to_json(M)}};
}

inline Matrix sized_matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols")) {
    throw ParseError("field '" + field + "': expected {rows, cols, data}");
  }
  const auto rows = j["rows"].get<long long>(), cols = j["cols"].get<long long>();
  if (rows < 0 || cols < 0) throw ParseError("field '" + field + "': negative size");
  if (rows * cols == 0) return Matrix(rows, cols);
  return matrix_field(j, "data", static_cast<Index>(rows), static_cast<Index>(cols));
}

}  // namespace detail

inline Json report_document_to_json(const ReportDocument& d) {
  Json j;
  j["name"] = d.name;
  j["verdicts"] = Json{{"A", d.A}, {"B", d.B}, {"C", d.C}, {"D", d.D}, {"finiteness", d.finiteness}};
  j["sstar_eq_rstar"] = d.sstar_eq_rstar;
  j["consistency_ok"] = d.consistency_ok;
  j["fragile"] = d.fragile;
  j["rde"] = Json{{"status", d.rde_status}, {"final_time", d.rde_final_time}};
  j["dims"] = Json(d.dims);
  if (d.X_bar) j["X_bar"] = detail::sized_matrix_to_json(*d.X_bar);
  if (d.K) j["K"] = detail::sized_matrix_to_json(*d.K);
  Json costs = Json::array();
  for (const CostEntry& e : d.costs) {
    Json c{{"x0", detail::vector_to_json(e.x0)}, {"expected", e.expected}, {"status", e.status}};
    c["simulated"] = e.simulated ? Json(*e.simulated) : Json(nullptr);
    c["relative_error"] = e.relative_error ? Json(*e.relative_error) : Json(nullptr);
    costs.push_back(std::move(c));
  }
  j["costs"] = costs;
  j["notes"] = d.notes;
  if (!d.bases.empty()) {
    Json b = Json::object();
    for (const auto& [key, M] : d.bases) b[key] = detail::sized_matrix_to_json(M);
    j["bases"] = b;
  }
  return j;
}

inline ReportDocument report_document_from_json(const Json& j) {
  try {
    ReportDocument d;
    d.name = j.at("name").get<std::string>();
    const Json& v = j.at("verdicts");
    d.A = v.at("A").get<std::string>();
    d.B = v.at("B").get<std::string>();
    d.C = v.at("C").get<std::string>();
    d.D = v.at("D").get<std::string>();
    d.finiteness = v.at("finiteness").get<std::string>();
    d.sstar_eq_rstar = j.at("sstar_eq_rstar").get<bool>();
    d.consistency_ok = j.at("consistency_ok").get<bool>();
    d.fragile = j.at("fragile").get<bool>();
    d.rde_status = j.at("rde").at("status").get<std::string>();
    d.rde_final_time = j.at("rde").at("final_time").get<double>();
    d.dims = j.at("dims").get<std::map<std::string, Index>>();
    if (j.contains("X_bar")) d.X_bar = detail::sized_matrix_from_json(j["X_bar"], "X_bar");
    if (j.contains("K")) d.K = detail::sized_matrix_from_json(j["K"], "K");
    for (const Json& c : j.at("costs")) {
      CostEntry e;
      const Json& x = c.at("x0");
      e.x0 = detail::vector_field(x, "costs.x0", static_cast<Index>(x.size()));
      e.expected = c.at("expected").get<double>();
      e.status = c.at("status").get<std::string>();
      if (!c.at("simulated").is_null()) e.simulated = c["simulated"].get<double>();
      if (!c.at("relative_error").is_null()) e.relative_error = c["relative_error"].get<double>();
      d.costs.push_back(std::move(e));
    }
    d.notes = j.at("notes").get<std::vector<std::string>>();
    if (j.contains("bases")) {
      for (const auto& item : j["bases"].items()) {
        d.bases[item.key()] = detail::sized_matrix_from_json(item.value(), "bases." + item.key());
      }
    }
    return d;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed report document: ") + e.what());
  }
}

inline std::string emit_report_document(const ReportDocument& d) {
  return report_document_to_json(d).dump(2) + "\n";
}

inline ReportDocument parse_report_document(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError("malformed JSON at " + detail::position_of(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  return report_document_from_json(j);
}

/// Human-readable summary.
inline void print_report(std::ostream& os, const ReportDocument& d) {
  os << "problem: " << (d.name.empty() ? "(unnamed)" : d.name) << "\n";
  os << "  A: " << d.A << "  B: " << d.B << "  C: " << d.C << "  D: " << d.D << "\n";
  os << "  finiteness: " << d.finiteness << "  S* = R*: " << (d.sstar_eq_rstar ? "true" : "false")
     << "  consistency: " << (d.consistency_ok ? "ok" : "VIOLATED") << "\n";
  os << "  riccati flow: " << d.rde_status << " at t = " << d.rde_final_time << "\n";
  os << "  dims:";
  for (const auto& [key, dim] : d.dims) os << " " << key << "=" << dim;
  os << "\n";
  const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, ", ", "; ", "", "", "[", "]");
  if (d.X_bar) os << "  X_bar = " << d.X_bar->format(fmt) << "\n";
  if (d.K) os << "  K = " << d.K->format(fmt) << "\n";
  for (const CostEntry& e : d.costs) {
    os << "  cost from x0 = " << e.x0.transpose().format(fmt) << ": expected " << e.expected;
    if (e.simulated) os << ", simulated " << *e.simulated << ", relative error " << *e.relative_error;
    os << " (" << e.status << ")\n";
  }
  for (const std::string& note : d.notes) os << "  note: " << note << "\n";
}

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// TSV: header `t x[0].. u[0].. J`, one row per sample, 17 significant
/// digits; a final comment line carries the expected cost and relative error.
inline void write_trajectory(std::ostream& os, const Trajectory& tr, std::optional<double> expected_cost) {
  const Index n = tr.states.cols(), m = tr.inputs.cols();
  os << "t";
  for (Index i = 0; i < n; ++i) os << "\tx[" << i << "]";
  for (Index i = 0; i < m; ++i) os << "\tu[" << i << "]";
  os << "\tJ\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const auto row = static_cast<Index>(k);
    os << format_g17(tr.times[k]);
    for (Index i = 0; i < n; ++i) os << '\t' << format_g17(tr.states(row, i));
    for (Index i = 0; i < m; ++i) os << '\t' << format_g17(tr.inputs(row, i));
    os << '\t' << format_g17(tr.running_cost[k]) << '\n';
  }
  if (expected_cost) {
    const double J = tr.running_cost.empty() ? 0.0 : tr.running_cost.back();
    const double rel = std::abs(J - *expected_cost) / (1.0 + *expected_cost);
    os << "# expected_cost\t" << format_g17(*expected_cost) << "\trelative_error\t" << format_g17(rel) << '\n';
  } else {
    os << "# expected_cost\tNA\trelative_error\tNA\n";
  }
}

}  // namespace singlq
