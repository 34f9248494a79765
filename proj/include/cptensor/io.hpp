#pragma once

// JSON tensor files (1-based sorted labels) and versioned report documents.

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cptensor/cpalgos.hpp"

namespace cptensor {

/// Malformed or inconsistent tensor file.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kReportSchema = "cptensor-report/1";

struct TensorFile {
  SymTensor tensor;
  /// Completion targets as 0-based sorted labels; absent when the file has no "unknown" key.
  std::optional<std::vector<std::vector<int>>> unknown;
};

namespace detail {

inline std::vector<int> read_label(const nlohmann::json& j, int n, int d, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + ": idx must be an array");
  if (static_cast<int>(j.size()) != d) throw FormatError(where + ": idx length must equal d");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw FormatError(where + ": idx entries must be integers");
    const int i = v.get<int>();
    if (i < 1 || i > n) throw FormatError(where + ": idx entry out of range 1.." + std::to_string(n));
    out.push_back(i - 1);
  }
  if (!std::is_sorted(out.begin(), out.end())) throw FormatError(where + ": idx must be sorted ascending");
  return out;
}

}  // namespace detail

inline TensorFile parse_tensor_file(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("tensor file must be a JSON object");
  for (const char* key : {"n", "d", "entries"})
    if (!doc.contains(key)) throw FormatError(std::string("missing key \"") + key + "\"");
  if (!doc["n"].is_number_integer() || !doc["d"].is_number_integer())
    throw FormatError("\"n\" and \"d\" must be integers");
  const int n = doc["n"].get<int>();
  const int d = doc["d"].get<int>();
  if (n < 1 || d < 1) throw FormatError("need n >= 1 and d >= 1");
  if (!doc["entries"].is_array()) throw FormatError("\"entries\" must be an array");

  TensorFile tf;
  tf.tensor = SymTensor(n, d);
  std::set<std::vector<int>> seen;
  std::size_t pos = 0;
  for (const auto& e : doc["entries"]) {
    const std::string where = "entries[" + std::to_string(pos++) + "]";
    if (!e.is_object() || !e.contains("idx") || !e.contains("val"))
      throw FormatError(where + ": expected {\"idx\", \"val\"}");
    if (!e["val"].is_number()) throw FormatError(where + ": val must be a number");
    auto label = detail::read_label(e["idx"], n, d, where);
    if (!seen.insert(label).second) throw FormatError(where + ": duplicate idx");
    tf.tensor.set(label, e["val"].get<double>());
  }
  if (doc.contains("unknown")) {
    if (!doc["unknown"].is_array()) throw FormatError("\"unknown\" must be an array");
    std::vector<std::vector<int>> unk;
    std::set<std::vector<int>> unk_seen;
    pos = 0;
    for (const auto& u : doc["unknown"]) {
      const std::string where = "unknown[" + std::to_string(pos++) + "]";
      auto label = detail::read_label(u, n, d, where);
      if (seen.count(label)) throw FormatError(where + ": entry is both known and unknown");
      if (unk_seen.insert(label).second) unk.push_back(std::move(label));
    }
    tf.unknown = std::move(unk);
  }
  return tf;
}

inline TensorFile parse_tensor_file(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  return parse_tensor_file(doc);
}

inline TensorFile load_tensor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tensor_file(ss.str());
}

/// Inverse of parse_tensor_file; zero entries are kept so the file lists every label.
inline nlohmann::json tensor_to_json(const SymTensor& t, const std::optional<std::vector<std::vector<int>>>& unknown = {}) {
  std::set<std::vector<int>> unk;
  if (unknown)
    for (const auto& u : *unknown) {
      auto s = u;
      std::sort(s.begin(), s.end());
      unk.insert(s);
    }
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < t.size(); ++k) {
    auto label = t.labels(k);
    if (unk.count(label)) continue;
    for (int& i : label) ++i;
    entries.push_back({{"idx", label}, {"val", t[k]}});
  }
  nlohmann::json doc = {{"n", t.n()}, {"d", t.d()}, {"entries", entries}};
  if (unknown) {
    nlohmann::json u = nlohmann::json::array();
    for (auto label : unk) {
      for (int& i : label) ++i;
      u.push_back(label);
    }
    doc["unknown"] = u;
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportOptions {
  std::uint64_t seed = 20231;
  bool timings = false;  // wall times break byte-identical reruns, so they are opt-in
};

namespace detail {

inline nlohmann::json decomposition_json(const CpDecomposition& dec) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : dec.atoms) arr.push_back({{"lambda", a.weight}, {"u", a.point}});
  return arr;
}

inline nlohmann::json solves_json(const std::vector<std::pair<int, SolveStatus>>& solves) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [k, s] : solves) arr.push_back({{"order", k}, {"status", to_string(s)}});
  return arr;
}

inline nlohmann::json membership_body(const MembershipReport& r, const ReportOptions& ro) {
  nlohmann::json j;
  j["verdict"] = to_string(r.verdict);
  j["order"] = r.order;
  if (r.verdict == Verdict::CP) {
    j["flat_t"] = r.flat_t;
    j["decomposition"] = decomposition_json(r.decomposition);
    j["residual"] = r.residual;
    j["relative_residual"] = r.relative_residual;
    j["polished"] = r.polished;
  }
  nlohmann::json trail = nlohmann::json::array();
  for (const auto& f : r.flat_trail)
    trail.push_back({{"t", f.t}, {"rank_prev", f.rank_prev}, {"rank", f.rank}, {"tau", f.tau}, {"flat", f.flat}});
  j["flat_trail"] = trail;
  j["solves"] = solves_json(r.solves);
  j["solver_iterations"] = r.solver_iterations;
  j["program_variables"] = r.program_variables;
  if (r.certificate)
    j["certificate"] = {{"kind", "separating_polynomial"},
                        {"valid", r.certificate->valid},
                        {"value", r.certificate->value},
                        {"slack", r.certificate->slack}};
  if (ro.timings) j["timings"] = r.timings;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

}  // namespace detail

inline nlohmann::json membership_report_json(const MembershipReport& r, const ReportOptions& ro = {}) {
  nlohmann::json j = {{"schema", kReportSchema}, {"command", "check-cp"}, {"seed", ro.seed}};
  j.update(detail::membership_body(r, ro));
  return j;
}

inline nlohmann::json conic_report_json(const CpConicResult& r, const std::string& command,
                                        const ReportOptions& ro = {}) {
  nlohmann::json j = {{"schema", kReportSchema}, {"command", command}, {"seed", ro.seed}};
  j["status"] = to_string(r.status);
  j["order"] = r.order;
  if (r.status == ConicStatus::Optimal) {
    j["value"] = r.value;
    j["relaxation_value"] = r.relaxation_value;
    j["w"] = std::vector<double>(r.w.data(), r.w.data() + r.w.size());
    j["flat_at_relaxation"] = r.flat_at_relaxation;
    j["membership"] = detail::membership_body(r.membership, ro);
  }
  if (r.certificate) {
    j["certificate"] = {{"gap", r.certificate->gap},
                        {"constraint_residual", r.certificate->constraint_residual},
                        {"zero_gap", r.certificate->zero_gap},
                        {"eta", std::vector<double>(r.certificate->eta.data(),
                                                    r.certificate->eta.data() + r.certificate->eta.size())}};
  }
  j["solves"] = detail::solves_json(r.solves);
  j["solver_iterations"] = r.solver_iterations;
  if (ro.timings) j["timings"] = r.timings;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

inline nlohmann::json copositivity_report_json(const CoposResult& r, const ReportOptions& ro = {}) {
  nlohmann::json j = {{"schema", kReportSchema}, {"command", "check-copositive"}, {"seed", ro.seed}};
  j["verdict"] = to_string(r.verdict);
  j["status"] = to_string(r.status);
  j["order"] = r.order;
  j["value"] = r.bound;
  j["certificate"] = {{"valid", r.certificate_valid}, {"identity_residual", r.identity_residual}};
  j["solver_iterations"] = r.solver_iterations;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

}  // namespace cptensor
