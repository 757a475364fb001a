#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "brqst/completion.hpp"
#include "brqst/estimators.hpp"
#include "brqst/experiments.hpp"
#include "brqst/povm.hpp"

namespace brqst {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::json;

namespace io {

[[noreturn]] inline void parse_error(const std::string& what) { fail(ErrorKind::parse, what); }

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) parse_error(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) parse_error(std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    parse_error(std::string("field '") + key + "': " + e.what());
  }
}

inline Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    parse_error("complex numbers are [re, im] pairs");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

/// Row-major nested arrays of [re, im] pairs.
inline Json matrix_to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(complex_to_json(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CMatrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) parse_error("matrix must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  const auto cols = j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  if (cols == 0) parse_error("matrix rows must be non-empty arrays");
  CMatrix m(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      parse_error("matrix rows differ in length");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = complex_from_json(row[static_cast<std::size_t>(k)]);
  }
  return m;
}

inline HermitianMatrix hermitian_from_json(const Json& j) {
  const CMatrix m = matrix_from_json(j);
  if (m.rows() != m.cols()) parse_error("Hermitian matrix must be square");
  try {
    return HermitianMatrix(m, 1e-9);
  } catch (const Error& e) {
    parse_error(e.what());
  }
}

inline Json vector_to_json(const RVector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline RVector vector_from_json(const Json& j) {
  if (!j.is_array()) parse_error("expected an array of numbers");
  RVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_error("expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace io

inline Json to_json(const Provenance& p) {
  Json j{{"construction", p.construction}, {"rank", p.rank}, {"note", p.note}};
  if (!p.a.empty()) j["a"] = p.a;
  if (!p.b.empty()) j["b"] = p.b;
  if (p.construction == "flammia_sequential") j["sequential_index"] = p.sequential_index;
  if (!p.basis_groups.empty()) {
    Json groups = Json::array();
    for (const auto& [begin, end] : p.basis_groups) groups.push_back({begin, end});
    j["basis_groups"] = groups;
  }
  if (p.seed) j["seed"] = *p.seed;
  return j;
}

inline Provenance provenance_from_json(const Json& j) {
  Provenance p;
  if (j.is_null()) return p;
  try {
    p.construction = j.value("construction", std::string("custom"));
    p.rank = j.value("rank", std::size_t{0});
    p.note = j.value("note", std::string());
    p.a = j.value("a", std::vector<double>{});
    p.b = j.value("b", std::vector<double>{});
    p.sequential_index = j.value("sequential_index", std::size_t{0});
    if (j.contains("basis_groups")) {
      for (const auto& g : j.at("basis_groups")) {
        p.basis_groups.emplace_back(g.at(0).get<std::size_t>(), g.at(1).get<std::size_t>());
      }
    }
    if (j.contains("seed") && !j.at("seed").is_null()) p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    io::parse_error(std::string("provenance: ") + e.what());
  }
  return p;
}

inline Json to_json(const Povm& povm) {
  Json elems = Json::array();
  for (const auto& e : povm.elements()) elems.push_back(io::matrix_to_json(e.matrix()));
  return {{"type", "povm"},
          {"dim", povm.dim()},
          {"elements", elems},
          {"provenance", to_json(povm.provenance())}};
}

inline Povm povm_from_json(const Json& j) {
  const auto dim = io::get<Eigen::Index>(j, "dim");
  const Json& elems = io::field(j, "elements");
  if (!elems.is_array() || elems.empty()) io::parse_error("'elements' must be a non-empty array");
  std::vector<HermitianMatrix> out;
  for (const auto& e : elems) {
    out.push_back(io::hermitian_from_json(e));
    if (out.back().dim() != dim) io::parse_error("POVM element dimension differs from 'dim'");
  }
  return Povm(std::move(out), provenance_from_json(j.value("provenance", Json())));
}

inline Json to_json(const BasisSet& bs) {
  Json bases = Json::array();
  for (const auto& u : bs.bases) bases.push_back(io::matrix_to_json(u));
  return {{"type", "basis_set"},
          {"dim", bs.dim},
          {"bases", bases},
          {"provenance", to_json(bs.provenance)}};
}

inline BasisSet basis_set_from_json(const Json& j) {
  BasisSet bs;
  bs.dim = io::get<Eigen::Index>(j, "dim");
  const Json& bases = io::field(j, "bases");
  if (!bases.is_array() || bases.empty()) io::parse_error("'bases' must be a non-empty array");
  for (const auto& b : bases) {
    CMatrix u = io::matrix_from_json(b);
    if (u.rows() != bs.dim || u.cols() != bs.dim) io::parse_error("basis dimension differs from 'dim'");
    if ((u.adjoint() * u - CMatrix::Identity(bs.dim, bs.dim)).cwiseAbs().maxCoeff() > 1e-10) {
      io::parse_error("basis matrix is not unitary");
    }
    bs.bases.push_back(std::move(u));
  }
  bs.provenance = provenance_from_json(j.value("provenance", Json()));
  return bs;
}

/// A measurement file holds either a POVM or a basis set; both become a POVM.
inline Povm measurement_from_json(const Json& j) {
  const std::string type = j.is_object() ? j.value("type", std::string()) : std::string();
  if (type == "basis_set" || (j.is_object() && j.contains("bases"))) {
    return bases_to_povm(basis_set_from_json(j));
  }
  return povm_from_json(j);
}

inline std::string to_string(MeasurementKind k) {
  return k == MeasurementKind::ideal_probabilities ? "ideal_probabilities" : "empirical_frequencies";
}

inline Json to_json(const MeasurementVector& mv) {
  Json j{{"type", "measurement"}, {"kind", to_string(mv.kind)}, {"values", io::vector_to_json(mv.values)}};
  j["total_shots"] = mv.total_shots ? Json(*mv.total_shots) : Json();
  return j;
}

inline MeasurementVector measurement_vector_from_json(const Json& j) {
  MeasurementVector mv;
  mv.values = io::vector_from_json(io::field(j, "values"));
  const std::string kind = j.value("kind", std::string("ideal_probabilities"));
  if (kind == "ideal_probabilities") {
    mv.kind = MeasurementKind::ideal_probabilities;
  } else if (kind == "empirical_frequencies") {
    mv.kind = MeasurementKind::empirical_frequencies;
  } else {
    io::parse_error("unknown measurement kind '" + kind + "'");
  }
  if (j.contains("total_shots") && !j.at("total_shots").is_null()) {
    mv.total_shots = io::get<std::uint64_t>(j, "total_shots");
  }
  if ((mv.values.array() < -1e-12).any()) io::parse_error("measurement values must be nonnegative");
  return mv;
}

inline Json state_to_json(const HermitianMatrix& rho) {
  return {{"type", "state"}, {"dim", rho.dim()}, {"matrix", io::matrix_to_json(rho.matrix())}};
}

/// Accepts {"matrix": ...}, {"vector": [[re, im], ...]} (a pure state), or a
/// bare matrix.
inline HermitianMatrix state_from_json(const Json& j) {
  if (j.is_object() && j.contains("vector")) {
    const Json& v = j.at("vector");
    if (!v.is_array() || v.empty()) io::parse_error("'vector' must be a non-empty array");
    CVector psi(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) psi(static_cast<Eigen::Index>(i)) = io::complex_from_json(v[i]);
    if (psi.norm() == 0.0) io::parse_error("state vector is zero");
    return HermitianMatrix::projector(psi.normalized());
  }
  return io::hermitian_from_json(j.is_object() ? io::field(j, "matrix") : j);
}

inline Json to_json(const PartialMatrix& pm) {
  Json entries = Json::array();
  for (Eigen::Index i = 0; i < pm.dim(); ++i) {
    for (Eigen::Index k = i; k < pm.dim(); ++k) {
      if (pm.is_measured(i, k)) entries.push_back({i, k, pm(i, k).real(), pm(i, k).imag()});
    }
  }
  return {{"type", "partial_matrix"}, {"dim", pm.dim()}, {"entries", entries}};
}

inline PartialMatrix partial_matrix_from_json(const Json& j) {
  const auto dim = io::get<Eigen::Index>(j, "dim");
  if (dim < 1) io::parse_error("'dim' must be >= 1");
  PartialMatrix pm(dim);
  const Json& entries = io::field(j, "entries");
  if (!entries.is_array()) io::parse_error("'entries' must be an array");
  for (const auto& e : entries) {
    if (!e.is_array() || e.size() != 4) io::parse_error("entries are [i, j, re, im]");
    try {
      const auto i = e[0].get<Eigen::Index>();
      const auto k = e[1].get<Eigen::Index>();
      if (i < 0 || k < 0 || i >= dim || k >= dim) io::parse_error("entry index out of range");
      pm.set(i, k, Complex(e[2].get<double>(), e[3].get<double>()));
    } catch (const nlohmann::json::exception& ex) {
      io::parse_error(std::string("entry: ") + ex.what());
    }
  }
  return pm;
}

inline Json to_json(const EstimateReport& r) {
  return {{"type", "estimate"},
          {"estimate", io::matrix_to_json(r.estimate.matrix())},
          {"raw", io::matrix_to_json(r.raw.matrix())},
          {"objective", r.objective},
          {"residual_norm", r.residual_norm},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

inline EstimateReport estimate_report_from_json(const Json& j) {
  EstimateReport r;
  r.estimate = io::hermitian_from_json(io::field(j, "estimate"));
  r.raw = io::hermitian_from_json(io::field(j, "raw"));
  r.objective = io::get<double>(j, "objective");
  r.residual_norm = io::get<double>(j, "residual_norm");
  r.iterations = io::get<std::size_t>(j, "iterations");
  r.converged = io::get<bool>(j, "converged");
  return r;
}

inline Json to_json(const SweepResult& s, double threshold) {
  Json per_b = Json::array();
  for (std::size_t i = 0; i < s.basis_counts.size(); ++i) {
    const auto& v = s.infidelities[i];
    per_b.push_back({{"bases", s.basis_counts[i]},
                     {"max_infidelity", *std::max_element(v.begin(), v.end())},
                     {"median_infidelity", median(v)},
                     {"failing_states",
                      std::count_if(v.begin(), v.end(), [&](double x) { return !(x < threshold); })}});
  }
  Json j{{"dim", s.dim}, {"rank", s.rank}, {"family", to_string(s.family)},
         {"states", s.infidelities.empty() ? 0 : s.infidelities.front().size()},
         {"threshold", threshold}, {"per_basis_count", per_b}};
  j["minimal_sufficient"] = s.minimal_sufficient ? Json(*s.minimal_sufficient) : Json();
  return j;
}

inline Json to_json(const RobustnessResult& r) {
  Json cells = Json::array();
  for (const auto& s : r.summary) {
    cells.push_back({{"bases", s.bases}, {"estimator", to_string(s.estimator)},
                     {"median", s.median}, {"q1", s.q1}, {"q3", s.q3},
                     {"successes", s.successes}, {"failures", s.failures}});
  }
  return {{"dim", r.dim}, {"family", to_string(r.family)},
          {"shots_per_basis", r.shots_per_basis}, {"cells", cells}};
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180).

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void write_strictness_csv(std::ostream& os, const std::vector<SweepResult>& results,
                                 std::uint64_t seed) {
  os << "dim,rank,family,b,seed,state,infidelity,estimator\r\n";
  for (const auto& s : results) {
    for (std::size_t i = 0; i < s.basis_counts.size(); ++i) {
      for (std::size_t k = 0; k < s.infidelities[i].size(); ++k) {
        os << s.dim << ',' << s.rank << ',' << to_string(s.family) << ',' << s.basis_counts[i]
           << ',' << seed << ',' << k << ',' << format_double(s.infidelities[i][k]) << ",ls\r\n";
      }
    }
  }
}

inline void write_robustness_csv(std::ostream& os, const RobustnessResult& r, std::uint64_t seed) {
  os << "dim,rank,family,b,seed,state,infidelity,estimator,error\r\n";
  for (const auto& rec : r.records) {
    os << r.dim << ",1," << to_string(r.family) << ',' << rec.bases << ',' << seed << ','
       << rec.state << ',' << (rec.ok ? format_double(rec.infidelity) : std::string()) << ','
       << to_string(rec.estimator) << ',' << csv_field(rec.error) << "\r\n";
  }
}

// ---------------------------------------------------------------------------
// Files.

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::parse, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::invalid_argument, "failed writing '" + path + "'");
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace brqst
