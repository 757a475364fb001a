#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "brqst/io.hpp"
#include "support.hpp"

namespace brqst {
namespace {

double rel_error(const CMatrix& a, const CMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

// Serialize through text, not just the in-memory tree.
Json through_text(const Json& j) { return Json::parse(j.dump()); }

TEST(Io, PovmRoundTrip) {
  const Povm p = build_flammia_rankr(6, 2);
  const Povm q = povm_from_json(through_text(to_json(p)));
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LE(rel_error(q[i].matrix(), p[i].matrix()), 1e-15);
  EXPECT_EQ(p.provenance(), q.provenance());
}

TEST(Io, BasisSetRoundTrip) {
  RandomStream rng(4);
  BasisSet bs = build_random_bases(5, 3, rng);
  const BasisSet back = basis_set_from_json(through_text(to_json(bs)));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(rel_error(back.bases[i], bs.bases[i]), 1e-15);
  EXPECT_EQ(back.provenance, bs.provenance);
  const Povm via = measurement_from_json(to_json(bs));
  EXPECT_EQ(via.size(), 15u);
  EXPECT_EQ(via.provenance().basis_groups.size(), 3u);
}

TEST(Io, RejectsNonUnitaryBasis) {
  Json j = to_json(build_goyeneche_bases(4, 1));
  j["bases"][1][0][0] = Json::array({2.0, 0.0});
  EXPECT_THROW(basis_set_from_json(j), Error);
}

TEST(Io, MeasurementAndStateRoundTrip) {
  MeasurementVector mv{RVector{{0.25, 0.5, 0.25}}, MeasurementKind::empirical_frequencies, 40};
  const auto back = measurement_vector_from_json(through_text(to_json(mv)));
  EXPECT_EQ(back.values, mv.values);
  EXPECT_EQ(back.kind, mv.kind);
  EXPECT_EQ(back.total_shots, mv.total_shots);

  RandomStream rng(5);
  const HermitianMatrix rho = random_mixed_hs(3, rng);
  EXPECT_LE(rel_error(state_from_json(through_text(state_to_json(rho))).matrix(), rho.matrix()), 1e-15);

  const Json pure = Json::parse(R"({"vector": [[1, 0], [0, 1]]})");
  const HermitianMatrix p = state_from_json(pure);
  EXPECT_NEAR(p(0, 1).imag(), -0.5, 1e-15);
}

TEST(Io, PartialMatrixUpperTriangle) {
  PartialMatrix pm(3);
  pm.set(0, 0, 0.5);
  pm.set(2, 0, Complex(0.1, 0.2));
  const Json j = to_json(pm);
  ASSERT_EQ(j["entries"].size(), 2u);
  EXPECT_EQ(j["entries"][1], Json::parse("[0, 2, 0.1, -0.2]"));
  const PartialMatrix back = partial_matrix_from_json(through_text(j));
  EXPECT_EQ(back(2, 0), Complex(0.1, 0.2));
  EXPECT_EQ(back.measured_count(), 3u);
}

TEST(Io, EstimateReportRoundTrip) {
  EstimateReport r;
  r.raw = HermitianMatrix::diagonal(RVector{{0.6, 0.6}});
  r.estimate = HermitianMatrix::diagonal(RVector{{0.5, 0.5}});
  r.objective = 1.25;
  r.residual_norm = 0.01;
  r.iterations = 12;
  r.converged = true;
  const auto back = estimate_report_from_json(through_text(to_json(r)));
  EXPECT_EQ(back.raw.matrix(), r.raw.matrix());
  EXPECT_EQ(back.objective, 1.25);
  EXPECT_EQ(back.iterations, 12u);
  EXPECT_TRUE(back.converged);
}

TEST(Io, ParseErrorsCarryKind) {
  const auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::invalid_argument;
  };
  EXPECT_EQ(kind_of([] { povm_from_json(Json::parse(R"({"dim": 2})")); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([] { measurement_vector_from_json(Json::parse(R"({"values": [0.5, "x"]})")); }),
            ErrorKind::parse);
  EXPECT_EQ(kind_of([] { state_from_json(Json::parse(R"({"matrix": [[[1, 0], [0, 1]], [[0, 0], [0, 0]]]})")); }),
            ErrorKind::parse);

  const auto path = std::filesystem::temp_directory_path() / "brqst_io_bad.json";
  write_text_file(path.string(), "{not json");
  EXPECT_EQ(kind_of([&] { read_json_file(path.string()); }), ErrorKind::parse);
  std::filesystem::remove(path);
  EXPECT_EQ(kind_of([] { read_json_file("/nonexistent/brqst.json"); }), ErrorKind::parse);
}

TEST(Io, CsvQuotingAndPrecision) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
}

TEST(Io, StrictnessCsvHasHeaderAndRows) {
  SweepResult s;
  s.dim = 4;
  s.rank = 1;
  s.family = BasisFamily::haar_global;
  s.basis_counts = {1, 2};
  s.infidelities = {{0.5, 0.25}, {1e-9, 2e-9}};
  std::ostringstream os;
  write_strictness_csv(os, {s}, 7);
  const std::string out = os.str();
  EXPECT_EQ(out.rfind("dim,rank,family,b,seed,state,infidelity,estimator\r\n", 0), 0u);
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 5);
  EXPECT_NE(out.find("4,1,haar_global,2,7,1,"), std::string::npos);
}

}  // namespace
}  // namespace brqst
