// brqst command-line front end.
//
// Exit codes: 0 success, 1 domain failure (failure set, infeasible,
// degenerate estimate, non-converged solver), 2 usage or parse error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "brqst/completion.hpp"
#include "brqst/estimators.hpp"
#include "brqst/experiments.hpp"
#include "brqst/io.hpp"
#include "brqst/povm.hpp"

namespace {

using namespace brqst;
namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  double tol = 1e-9;
  std::size_t max_iter = 200000;
  std::size_t threads = 1;
  std::vector<std::string> argv;

  SolverConfig solver() const {
    SolverConfig c;
    c.relative_tolerance = tol;
    c.max_iterations = max_iter;
    return c;
  }
};

/// Thrown for domain outcomes that are not library errors (e.g. a solver
/// that ran out of iterations).
struct DomainFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_manifest(const Globals& g, const std::string& command, const Json& params,
                    const std::vector<std::string>& outputs, const std::string& path,
                    std::chrono::steady_clock::time_point start) {
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json m{{"command", command},         {"arguments", g.argv},
         {"parameters", params},       {"seed", g.seed},
         {"version", kVersion},        {"outputs", outputs},
         {"wall_clock_seconds", secs}};
  write_json_file(path, m);
}

void emit(const Json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json_file(out, j);
  }
}

// ---------------------------------------------------------------------------

struct BuildArgs {
  std::string family;
  Eigen::Index dim = 0;
  Eigen::Index rank = 1;
  std::size_t bases = 0;
  std::string out;
};

int cmd_build(const Globals& g, const BuildArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  Json artifact;
  Json report;
  Json params{{"family", a.family}, {"dim", a.dim}, {"rank", a.rank}, {"bases", a.bases}};
  const auto check = [&](const Povm& p) {
    const auto rep = validate_povm(p, 1e-8);
    return Json{{"is_valid", rep.is_valid},
                {"min_eigenvalue", rep.min_eigenvalue},
                {"identity_residual", rep.identity_residual},
                {"elements", p.size()}};
  };
  if (a.family == "flammia") {
    const Povm p = build_flammia_rankr(a.dim, a.rank);
    artifact = to_json(p);
    report = check(p);
  } else if (a.family == "flammia_sequential") {
    const auto ps = build_flammia_sequential(a.dim, a.rank);
    artifact = {{"type", "povm_sequence"}, {"povms", Json::array()}};
    report = Json::array();
    for (const auto& p : ps) {
      artifact["povms"].push_back(to_json(p));
      report.push_back(check(p));
    }
  } else if (a.family == "goyeneche" || a.family == "random" || a.family == "haar_global" ||
             a.family == "local" || a.family == "haar_local_qubits") {
    BasisSet bs;
    RandomStream rng(g.seed, 0);
    if (a.family == "goyeneche") {
      bs = build_goyeneche_bases(a.dim, a.rank);
    } else {
      require(a.bases >= 1, "--bases is required for random basis families");
      if (a.family == "random" || a.family == "haar_global") {
        bs = build_random_bases(a.dim, a.bases, rng);
      } else {
        require(is_power_of_two(a.dim) && a.dim >= 2, "local qubit bases need --dim = 2^n");
        std::size_t n = 0;
        while ((Eigen::Index{1} << n) < a.dim) ++n;
        bs = build_local_random_bases(n, a.bases, rng);
      }
    }
    artifact = to_json(bs);
    report = check(bases_to_povm(bs));
    report["bases"] = bs.size();
  } else {
    fail(ErrorKind::invalid_argument, "unknown family '" + a.family +
                                          "' (flammia, flammia_sequential, goyeneche, random, local)");
  }
  std::vector<std::string> outputs;
  if (!a.out.empty()) {
    write_json_file(a.out, artifact);
    write_manifest(g, "build", params, {a.out}, a.out + ".manifest.json", start);
    outputs.push_back(a.out);
  } else {
    std::cout << artifact.dump(2) << "\n";
  }
  std::cerr << Json{{"validation", report}, {"outputs", outputs}}.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MeasureArgs {
  std::string measurement;
  std::string state;
  std::optional<Eigen::Index> random_rank;
  std::string state_out;
  std::size_t shots = 0;
  std::string out;
};

int cmd_measure(const Globals& g, const MeasureArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const Json mj = read_json_file(a.measurement);
  const bool is_bases = mj.is_object() && mj.value("type", std::string()) == "basis_set";
  const Povm povm = measurement_from_json(mj);
  RandomStream rng(g.seed, 1);
  HermitianMatrix rho;
  if (!a.state.empty()) {
    rho = state_from_json(read_json_file(a.state));
  } else if (a.random_rank) {
    rho = random_rank_state(povm.dim(), *a.random_rank, rng);
  } else {
    fail(ErrorKind::invalid_argument, "give --state or --random-rank");
  }
  if (rho.dim() != povm.dim()) fail(ErrorKind::dimension_mismatch, "state and measurement dimensions differ");
  if (!a.state_out.empty()) write_json_file(a.state_out, state_to_json(rho));

  MeasurementVector mv;
  if (a.shots == 0) {
    mv = apply_measurement_map(povm, rho);
  } else if (is_bases) {
    mv = simulate_counts(basis_set_from_json(mj), rho, a.shots, rng);
  } else {
    mv = simulate_povm_counts(povm, rho, a.shots, rng);
  }
  emit(to_json(mv), a.out);
  if (!a.out.empty()) {
    write_manifest(g, "measure",
                   {{"measurement", a.measurement}, {"state", a.state}, {"shots", a.shots}},
                   {a.out}, a.out + ".manifest.json", start);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CompleteArgs {
  std::string measurement;
  std::string record;
  std::string partial;
  std::string plan;
  Eigen::Index rank = 0;
  double tol = 1e-8;
  std::string out;
};

int cmd_complete(const Globals& g, const CompleteArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  PartialMatrix pm;
  std::string kind = a.plan;
  Eigen::Index r = a.rank;
  if (!a.partial.empty()) {
    pm = partial_matrix_from_json(read_json_file(a.partial));
    require(!kind.empty() && r >= 1, "--partial needs --plan and --rank");
  } else {
    require(!a.measurement.empty() && !a.record.empty(),
            "give --measurement and --record, or --partial");
    const Json mj = read_json_file(a.measurement);
    const MeasurementVector mv = measurement_vector_from_json(read_json_file(a.record));
    if (mj.value("type", std::string()) == "basis_set") {
      const BasisSet bs = basis_set_from_json(mj);
      const Povm povm = bases_to_povm(bs);
      pm = extract_goyeneche(bs, split_by_basis(povm, mv));
      if (kind.empty()) kind = "goyeneche";
      if (r == 0) r = static_cast<Eigen::Index>(bs.provenance.rank);
    } else {
      const Povm povm = povm_from_json(mj);
      pm = extract_flammia(povm, mv);
      if (kind.empty()) kind = "flammia";
      if (r == 0) r = static_cast<Eigen::Index>(povm.provenance().rank);
    }
  }
  PlanKind pk;
  if (kind == "flammia") {
    pk = PlanKind::flammia;
  } else if (kind == "goyeneche") {
    pk = PlanKind::goyeneche;
  } else {
    fail(ErrorKind::invalid_argument, "--plan must be flammia or goyeneche");
  }
  const auto res = complete_rankr_detailed(pm, r, default_plan(pk, pm.dim(), r), a.tol);
  Json j = state_to_json(res.matrix);
  j["plan"] = kind;
  j["rank"] = r;
  j["members_used"] = res.members_used;
  j["used_alternate"] = res.used_alternate;
  j["measured_entries"] = pm.measured_count();
  emit(j, a.out);
  if (!a.out.empty()) {
    write_manifest(g, "complete", {{"plan", kind}, {"rank", r}, {"tol", a.tol}}, {a.out},
                   a.out + ".manifest.json", start);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string measurement;
  std::string record;
  std::string method = "ls";
  std::optional<double> eps;
  std::string target;
  std::string out;
};

int cmd_estimate(const Globals& g, const EstimateArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const Povm povm = measurement_from_json(read_json_file(a.measurement));
  const MeasurementVector mv = measurement_vector_from_json(read_json_file(a.record));
  if (mv.values.size() != static_cast<Eigen::Index>(povm.size())) {
    fail(ErrorKind::dimension_mismatch, "record has " + std::to_string(mv.values.size()) +
                                            " values but the measurement has " +
                                            std::to_string(povm.size()) + " outcomes");
  }
  const EstimatorKind kind = parse_estimator(a.method);
  double eps = 0.0;
  if (kind != EstimatorKind::ls) {
    if (a.eps) {
      eps = *a.eps;
    } else {
      if (!mv.total_shots) {
        fail(ErrorKind::invalid_argument,
             "--eps is required: the record carries no total_shots to derive it from");
      }
      const std::size_t b = std::max<std::size_t>(1, povm.provenance().basis_groups.size());
      eps = default_epsilon(b, static_cast<std::size_t>(povm.dim()),
                            static_cast<std::size_t>(*mv.total_shots / b));
    }
  }
  const EstimateReport rep = run_estimator(kind, povm, mv, eps, g.solver());
  Json j = to_json(rep);
  j["method"] = to_string(kind);
  if (kind != EstimatorKind::ls) j["eps"] = eps;
  if (!a.target.empty()) {
    const HermitianMatrix target = state_from_json(read_json_file(a.target));
    j["infidelity"] = infidelity(target, rep.estimate);
  }
  emit(j, a.out);
  if (!a.out.empty()) {
    write_manifest(g, "estimate", {{"method", to_string(kind)}, {"eps", eps}}, {a.out},
                   a.out + ".manifest.json", start);
  }
  if (!rep.converged) {
    throw DomainFailure("solver stopped after " + std::to_string(rep.iterations) +
                        " iterations without converging");
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CertifyArgs {
  std::string measurement;
  Eigen::Index rank = 1;
  std::size_t trials = 1000;
  std::string out;
};

int cmd_certify(const Globals& g, const CertifyArgs& a) {
  const Json mj = read_json_file(a.measurement);
  const Povm povm = measurement_from_json(mj);
  const Provenance& prov = povm.provenance();
  Json j{{"dim", povm.dim()}, {"rank", a.rank}, {"construction", prov.construction}};

  std::optional<bool> prop1;
  if (prov.construction == "goyeneche") {
    const auto r = static_cast<Eigen::Index>(prov.rank);
    const bool full = prov.basis_groups.size() == static_cast<std::size_t>(4 * r + 1);
    prop1 = full && a.rank <= r &&
            check_proposition1(goyeneche_measured_mask(povm.dim(), r, true), true);
  } else if (prov.construction == "flammia") {
    Mask m = Mask::Constant(povm.dim(), povm.dim(), false);
    const auto r = static_cast<Eigen::Index>(prov.rank);
    m.topRows(r).setConstant(true);
    m.leftCols(r).setConstant(true);
    prop1 = check_proposition1(m, a.rank <= r);
    j["note"] = prov.note;
  }
  j["diagonal_sufficient"] = prop1 ? Json(*prop1) : Json();

  RandomStream rng(g.seed, 2);
  const auto rep = falsify_strictness(povm, a.rank, a.trials, rng);
  j["kernel_dimension"] = rep.kernel_dimension;
  j["trials_run"] = rep.trials_run;
  j["falsified"] = rep.falsified;
  j["inertia_violations"] = rep.inertia_violations;
  if (rep.witness) {
    j["witness"] = {{"rho", io::matrix_to_json(rep.witness->rho.matrix())},
                    {"sigma", io::matrix_to_json(rep.witness->sigma.matrix())},
                    {"sigma_rank", numerical_rank(rep.witness->sigma, 1e-8)}};
  }
  emit(j, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string kind;
  std::string config;
  std::string out_dir;
};

/// Reads a field into `dst` if present, collecting type errors.
template <class T>
void opt_field(const Json& c, const char* key, T& dst, std::vector<std::string>& errors) {
  if (!c.contains(key)) return;
  try {
    dst = c.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    errors.push_back(std::string("'") + key + "' has the wrong type");
  }
}

void check_keys(const Json& c, const std::vector<std::string>& allowed,
                std::vector<std::string>& errors) {
  for (const auto& [k, v] : c.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      errors.push_back("unknown key '" + k + "'");
    }
  }
}

[[noreturn]] void schema_failure(const std::vector<std::string>& errors) {
  std::string msg = "config violates the schema:";
  for (const auto& e : errors) msg += " " + e + ";";
  fail(ErrorKind::parse, msg);
}

BasisFamily family_field(const Json& c, std::vector<std::string>& errors) {
  if (!c.contains("family") || !c.at("family").is_string()) {
    errors.push_back("'family' (string) is required");
    return BasisFamily::haar_global;
  }
  try {
    const BasisFamily f = parse_basis_family(c.at("family").get<std::string>());
    if (f == BasisFamily::flammia) errors.push_back("'family' must be a basis family");
    return f;
  } catch (const Error& e) {
    errors.push_back(e.what());
    return BasisFamily::haar_global;
  }
}

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const Json c = read_json_file(a.config);
  if (!c.is_object()) fail(ErrorKind::parse, "config must be a JSON object");
  std::vector<std::string> errors;
  fs::create_directories(a.out_dir);
  std::vector<std::string> outputs;

  if (a.kind == "table1") {
    check_keys(c, {"dims", "ranks", "family", "states_per_dim", "threshold", "min_bases",
                   "max_bases", "confirm"},
               errors);
    StrictnessSweepConfig cfg;
    if (!c.contains("dims")) errors.push_back("'dims' is required");
    opt_field(c, "dims", cfg.dims, errors);
    opt_field(c, "ranks", cfg.ranks, errors);
    cfg.family = family_field(c, errors);
    opt_field(c, "states_per_dim", cfg.states_per_dim, errors);
    opt_field(c, "threshold", cfg.threshold, errors);
    opt_field(c, "min_bases", cfg.min_bases, errors);
    opt_field(c, "max_bases", cfg.max_bases, errors);
    opt_field(c, "confirm", cfg.confirm, errors);
    if (c.contains("dims") && cfg.dims.empty()) errors.push_back("'dims' must not be empty");
    if (cfg.ranks.empty()) errors.push_back("'ranks' must not be empty");
    for (auto d : cfg.dims) {
      if (d < 2) errors.push_back("every dim must be >= 2");
    }
    if (!(cfg.threshold > 0.0)) errors.push_back("'threshold' must be positive");
    if (cfg.min_bases < 1 || cfg.min_bases > cfg.max_bases) {
      errors.push_back("need 1 <= min_bases <= max_bases");
    }
    if (!errors.empty()) schema_failure(errors);
    cfg.seed = g.seed;
    cfg.solver = g.solver();
    cfg.threads = g.threads;
    const auto results = run_strictness_sweep(cfg);
    std::ostringstream csv;
    write_strictness_csv(csv, results, g.seed);
    const std::string csv_path = (fs::path(a.out_dir) / "table1.csv").string();
    const std::string sum_path = (fs::path(a.out_dir) / "table1_summary.json").string();
    write_text_file(csv_path, csv.str());
    Json summary = Json::array();
    for (const auto& r : results) summary.push_back(to_json(r, cfg.threshold));
    write_json_file(sum_path, summary);
    outputs = {csv_path, sum_path};
    std::cout << summary.dump(2) << "\n";
  } else if (a.kind == "fig2") {
    check_keys(c, {"dim", "family", "n_states", "q", "shots", "min_bases", "max_bases"}, errors);
    RobustnessConfig cfg;
    if (!c.contains("dim")) errors.push_back("'dim' is required");
    opt_field(c, "dim", cfg.dim, errors);
    cfg.family = family_field(c, errors);
    opt_field(c, "n_states", cfg.n_states, errors);
    opt_field(c, "q", cfg.noise.q, errors);
    std::size_t shots = 0;
    opt_field(c, "shots", shots, errors);
    if (shots > 0) cfg.noise.shots = shots;
    opt_field(c, "min_bases", cfg.min_bases, errors);
    opt_field(c, "max_bases", cfg.max_bases, errors);
    if (cfg.dim < 2) errors.push_back("'dim' must be >= 2");
    if (cfg.n_states < 1) errors.push_back("'n_states' must be >= 1");
    if (!(cfg.noise.q >= 0.0 && cfg.noise.q <= 1.0)) errors.push_back("'q' must be in [0, 1]");
    if (cfg.min_bases < 1 || cfg.min_bases > cfg.max_bases) {
      errors.push_back("need 1 <= min_bases <= max_bases");
    }
    if (!errors.empty()) schema_failure(errors);
    cfg.seed = g.seed;
    cfg.solver = g.solver();
    cfg.threads = g.threads;
    const auto res = run_robustness_sweep(cfg);
    std::ostringstream csv;
    write_robustness_csv(csv, res, g.seed);
    const std::string csv_path = (fs::path(a.out_dir) / "fig2.csv").string();
    const std::string sum_path = (fs::path(a.out_dir) / "fig2_summary.json").string();
    write_text_file(csv_path, csv.str());
    write_json_file(sum_path, to_json(res));
    outputs = {csv_path, sum_path};
    std::cout << to_json(res).dump(2) << "\n";
  } else {
    fail(ErrorKind::invalid_argument, "--kind must be table1 or fig2");
  }
  write_manifest(g, "sweep", {{"kind", a.kind}, {"config", c}}, outputs,
                 (fs::path(a.out_dir) / "manifest.json").string(), start);
  return 0;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank quantum state tomography: measurements, completion, estimation"};
  app.require_subcommand(1);
  Globals g;
  g.argv.assign(argv, argv + argc);
  app.add_option("--seed", g.seed, "master random seed")->envname("BRQST_SEED");
  app.add_option("--tol", g.tol, "solver relative tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", g.max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "construct a POVM or basis set");
  b->add_option("--family", build.family, "flammia | flammia_sequential | goyeneche | random | local")
      ->required();
  b->add_option("--dim,-d", build.dim, "Hilbert-space dimension")->required()->check(CLI::PositiveNumber);
  b->add_option("--rank,-r", build.rank, "target rank")->check(CLI::PositiveNumber);
  b->add_option("--bases,-b", build.bases, "number of random bases");
  b->add_option("--out,-o", build.out, "output file (stdout if omitted)");

  MeasureArgs meas;
  auto* m = app.add_subcommand("measure", "ideal probabilities or simulated counts");
  m->add_option("--measurement", meas.measurement, "POVM or basis-set file")->required();
  m->add_option("--state", meas.state, "state file");
  m->add_option("--random-rank", meas.random_rank, "draw a random state of this rank instead");
  m->add_option("--state-out", meas.state_out, "write the measured state here");
  m->add_option("--shots", meas.shots, "shots per basis (0: ideal probabilities)");
  m->add_option("--out,-o", meas.out, "output file");

  CompleteArgs comp;
  auto* c = app.add_subcommand("complete", "algebraic low-rank completion");
  c->add_option("--measurement", comp.measurement, "flammia POVM or goyeneche basis-set file");
  c->add_option("--record", comp.record, "measurement record");
  c->add_option("--partial", comp.partial, "partial-matrix file instead of a record");
  c->add_option("--plan", comp.plan, "flammia | goyeneche");
  c->add_option("--rank,-r", comp.rank, "rank (default: from provenance)");
  c->add_option("--completion-tol", comp.tol, "relative singular-value threshold for pivot blocks");
  c->add_option("--out,-o", comp.out, "output file");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "convex state estimation");
  e->add_option("--measurement", est.measurement, "POVM or basis-set file")->required();
  e->add_option("--record", est.record, "measurement record")->required();
  e->add_option("--method", est.method, "ls | trace | mle");
  e->add_option("--eps", est.eps, "residual bound in per-basis frequency units");
  e->add_option("--target", est.target, "state file; adds an infidelity field");
  e->add_option("--out,-o", est.out, "output file");

  CertifyArgs cert;
  auto* ce = app.add_subcommand("certify", "kernel, diagonal sufficiency check and strictness falsification");
  ce->add_option("--measurement", cert.measurement, "POVM or basis-set file")->required();
  ce->add_option("--rank,-r", cert.rank, "rank to certify")->check(CLI::PositiveNumber);
  ce->add_option("--trials", cert.trials, "falsification trials")->check(CLI::PositiveNumber);
  ce->add_option("--out,-o", cert.out, "output file");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "strictness (table1) or robustness (fig2) sweeps");
  s->add_option("--kind", sw.kind, "table1 | fig2")->required();
  s->add_option("--config", sw.config, "JSON config")->required();
  s->add_option("--out-dir", sw.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    return report_error("usage", err.what(), 2);
  }

  try {
    if (*b) return cmd_build(g, build);
    if (*m) return cmd_measure(g, meas);
    if (*c) return cmd_complete(g, comp);
    if (*e) return cmd_estimate(g, est);
    if (*ce) return cmd_certify(g, cert);
    if (*s) return cmd_sweep(g, sw);
  } catch (const Error& err) {
    return report_error(std::string(to_string(err.kind())), err.what(),
                        err.is_domain_failure() ? 1 : 2);
  } catch (const DomainFailure& err) {
    return report_error("not_converged", err.what(), 1);
  } catch (const fs::filesystem_error& err) {
    return report_error("io", err.what(), 2);
  }
  return 2;
}
