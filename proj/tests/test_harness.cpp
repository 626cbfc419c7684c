// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "rfwi/experiment.hpp"
#include "rfwi/io.hpp"

using namespace rfwi;
namespace fs = std::filesystem;

namespace
{

ExperimentConfig small_config(const std::string &name)
{
  ExperimentConfig c;
  c.grid = Grid2D{21, 31, 20.0};
  c.frequencies_hz = {4.0, 6.0};
  c.num_sources = 5;
  c.num_receivers = 12;
  c.anomalies = {{200.0, 300.0, 80.0, 0.2}};
  c.smoothing = 3.0;
  c.max_iter = 5;
  c.output_dir = (fs::temp_directory_path() / "rfwi_harness" / name).string();
  fs::remove_all(c.output_dir);
  return c;
}

std::map<std::string, std::string> artifacts(const fs::path &dir)
{
  std::map<std::string, std::string> out;
  for (const char *name : {"run.csv", "residual_hist.csv", "model_final.csv", "schedule.csv"})
    if (fs::exists(dir / name))
      out[name] = read_file(dir / name);
  return out;
}

// Scoped environment variable.
class EnvGuard
{
public:
  EnvGuard(const char *name, const std::string &value) : name_(name)
  {
    ::setenv(name, value.c_str(), 1);
  }
  ~EnvGuard() { ::unsetenv(name_); }

private:
  const char *name_;
};

}  // namespace

TEST_CASE("config text round trip")
{
  ExperimentConfig c = small_config("roundtrip");
  c.huber_mu = 0.25;
  c.penalty = "huber";
  c.label = "a b";
  c.frequencies_hz = {2.5, 3.0 + 1e-9};
  const ExperimentConfig back = parse_config(to_text(c));
  CHECK(config_entries(back) == config_entries(c));
  CHECK(back.frequencies_hz == c.frequencies_hz);
  CHECK(back.anomalies == c.anomalies);
  CHECK(back.huber_mu == c.huber_mu);

  const auto parsed = parse_config("# comment\nseed = 7  # trailing\n\nmodel.anomalies = none\n");
  CHECK(parsed.seed == 7);
  CHECK(parsed.anomalies.empty());
}

TEST_CASE("config errors")
{
  CHECK_THROWS_WITH_AS(parse_config("solver.maxiter = 3"), doctest::Contains("unknown key"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse_config("seed = 1\ngrid.nz 5"), doctest::Contains("line 2"),
                       ValidationError);
  CHECK_THROWS_AS(parse_config("grid.h = fast"), ValidationError);
  CHECK_THROWS_AS(parse_config("corruption.fraction = 1"), ValidationError);
  CHECK_THROWS_AS(parse_config("solver.kind = newton"), ValidationError);
  CHECK_THROWS_AS(parse_config("acquisition.sources = 80"), ValidationError);
  CHECK_THROWS_AS(parse_config("initial.fixed_rows = 51"), ValidationError);
  CHECK_THROWS_AS(parse_config("model.anomalies = 1:2:3"), ValidationError);
  CHECK_THROWS_AS(parse_config("solver.monitor_full = maybe"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/rfwi.cfg"), std::exception);
}

TEST_CASE("models respect velocity bounds")
{
  ExperimentConfig c = small_config("models");
  const ModelPair models = make_models(c);
  const double lo = 1.0 / (c.v_max * c.v_max), hi = 1.0 / (c.v_min * c.v_min);
  for (const auto *m : {&models.truth, &models.initial})
  {
    CHECK(m->values().minCoeff() >= lo * (1.0 - 1e-12));
    CHECK(m->values().maxCoeff() <= hi * (1.0 + 1e-12));
  }
  c.anomalies = {{100.0, 100.0, 60.0, -0.9}};
  CHECK_THROWS_WITH_AS(make_models(c), doctest::Contains("outside configured bounds"),
                       ValidationError);

  c.anomalies.clear();
  c.smoothing = 0.0;
  const ModelPair flat = make_models(c);
  CHECK(flat.initial.values() == flat.truth.values());
  // Layered background: constant along each row.
  const Grid2D &g = flat.truth.grid();
  for (Index iz = 0; iz < g.nz; ++iz)
    for (Index ix = 1; ix < g.nx; ++ix)
      CHECK(flat.truth.values()[g.index(iz, ix)] == flat.truth.values()[g.index(iz, 0)]);
}

TEST_CASE("smoothing preserves constants")
{
  const Grid2D g{9, 12, 10.0};
  const SlownessModel m(g, RealVector::Constant(g.size(), 4e-7));
  CHECK((smooth(m, 2.5).values().array() - 4e-7).abs().maxCoeff() <= 1e-20);
}

TEST_CASE("corruption mask")
{
  ExperimentConfig c = small_config("mask");
  c.num_sources = 20;
  c.num_receivers = 25;
  c.frequencies_hz = {3.0, 4.0, 5.0};
  const Acquisition acq = make_acquisition(c);
  RandomStream rng(3, 1);
  const CorruptionMask mask = make_mask(acq, 0.5, rng);
  const double n = static_cast<double>(mask.count_total());
  CHECK(n == 20 * 25 * 3);
  // Binomial(n, 1/2) within four standard deviations.
  CHECK(std::abs(mask.count_zeroed() - 0.5 * n) <= 4.0 * std::sqrt(0.25 * n));

  RandomStream again(3, 1);
  CHECK(make_mask(acq, 0.5, again).zeroed == mask.zeroed);
  RandomStream none(3, 1);
  CHECK(make_mask(acq, 0.0, none).count_zeroed() == 0);
}

TEST_CASE("synthetic data and residuals at the true model")
{
  ExperimentConfig c = small_config("data");
  const ExperimentSetup setup = prepare_experiment(c);
  const FwiPopulation pop(c.grid, setup.data.observed, Penalty::least_squares());
  const auto res = pop.residuals(pop.to_parameters(setup.models.truth));
  const auto &mask = setup.data.mask;
  for (std::size_t p = 0; p < res.size(); ++p)
    for (Index r = 0; r < res[p].size(); ++r)
    {
      const auto &clean = setup.data.clean[p][r];
      if (mask.zeroed[p][static_cast<std::size_t>(r)])
        CHECK(std::abs(res[p][r] + clean) <= 1e-12 * std::abs(clean));
      else
        CHECK(std::abs(res[p][r]) <= 1e-12 * std::abs(clean));
    }

  c.corruption = 0.0;
  const ExperimentSetup clean = prepare_experiment(c);
  const FwiPopulation pop0(c.grid, clean.data.observed, Penalty::least_squares());
  CHECK(full_misfit(pop0, pop0.to_parameters(clean.models.truth)).value <= 1e-20);

  // Calibrated sources: median clean magnitude equals data.scale.
  std::vector<double> mags;
  for (const auto &d : clean.data.clean)
    for (Index r = 0; r < d.size(); ++r)
      mags.push_back(std::abs(d[r]));
  std::sort(mags.begin(), mags.end());
  const double med = 0.5 * (mags[mags.size() / 2 - 1] + mags[mags.size() / 2]);
  CHECK(med == doctest::Approx(c.data_scale).epsilon(1e-10));
}

TEST_CASE("residual histogram")
{
  std::vector<ComplexVector> r(2, ComplexVector::Zero(3));
  r[0] << Complex(0.1, -5.0), Complex(10.0, 0.0), Complex(-0.4, 0.95);
  const Histogram h = residual_histogram(r, -1.0, 1.0, 4);
  double total = 0.0;
  for (double v : h.mass)
    total += v;
  CHECK(std::abs(total - 1.0) <= 1e-12);
  // Components: 0.1, 10, -0.4, -5, 0, 0.95 and six zeros.
  CHECK(h.mass[0] == doctest::Approx(1.0 / 12.0));
  CHECK(h.mass[1] == doctest::Approx(1.0 / 12.0));
  CHECK(h.mass[2] == doctest::Approx(8.0 / 12.0));
  CHECK(h.mass[3] == doctest::Approx(2.0 / 12.0));
  CHECK(h.bin_lo(2) == 0.0);
  CHECK(h.bin_hi(3) == 1.0);
  CHECK_THROWS_AS(residual_histogram(r, 1.0, 1.0, 4), ValidationError);
}

TEST_CASE("automatic Huber threshold")
{
  ExperimentConfig c = small_config("huber");
  c.penalty = "huber";
  const ExperimentSetup setup = prepare_experiment(c);
  const Penalty p = resolve_penalty(c, setup);
  CHECK(p.kind() == PenaltyKind::Huber);
  CHECK(p.parameter() > 0.0);
  c.huber_mu = 0.3;
  CHECK(resolve_penalty(c, setup) == Penalty::huber(0.3));
  c.penalty = "students-t";
  CHECK(resolve_penalty(c, setup) == Penalty::students_t(c.nu));
}

TEST_CASE("least-squares run decreases the misfit and writes a verifiable manifest")
{
  ExperimentConfig c = small_config("lsq");
  c.penalty = "least-squares";
  const ExperimentResult r = run_experiment(c);
  CHECK(r.final_misfit < r.initial_misfit);
  for (std::size_t k = 1; k < r.record.entries.size(); ++k)
    CHECK(r.record.entries[k].phi <= r.record.entries[k - 1].phi);
  CHECK(r.initial_model_error > 0.0);

  CHECK(verify_manifest(r.manifest).empty());
  const auto doc = nlohmann::json::parse(read_file(r.manifest));
  CHECK(doc.at("status") == "ok");
  CHECK(doc.at("seed") == c.seed);
  CHECK(doc.at("config").at("penalty.kind") == "least-squares");
  CHECK(doc.at("artifacts").contains("model_final.csv"));
  CHECK(read_file(r.output_dir / "run.csv").rfind("iter,phi,grad_norm,model_error,cum_evals,wall_ms\n", 0) == 0);

  const std::string hist = read_file(r.output_dir / "residual_hist.csv");
  CHECK(hist.rfind("bin_lo,bin_hi,initial,final,true\n", 0) == 0);

  // Tampering is detected.
  write_file(r.output_dir / "model_final.csv", "iz,ix,x\n");
  CHECK(verify_manifest(r.manifest) == std::vector<std::string>{"model_final.csv"});
}

TEST_CASE("runs are byte-identical across repeats and thread counts")
{
  for (const std::string solver : {"lbfgs", "growing-sample", "stochastic-gradient", "incremental"})
  {
    CAPTURE(solver);
    ExperimentConfig c = small_config("det_" + solver);
    c.solver = solver;
    c.max_iter = 4;
    c.use_schedule = solver == "growing-sample";
    c.threads = 1;
    c.label = "a";
    run_experiment(c);
    c.label = "b";
    c.threads = 4;
    run_experiment(c);
    c.label = "c";
    c.seed = 2;
    run_experiment(c);
    const fs::path root = c.output_dir;
    const auto a = artifacts(root / "a");
    CHECK(a.size() == (solver == "growing-sample" ? 4u : 3u));
    CHECK(a == artifacts(root / "b"));
    if (solver != "lbfgs")
    {
      CHECK(a.at("run.csv") != artifacts(root / "c").at("run.csv"));
    }
  }
}

TEST_CASE("output directory override")
{
  ExperimentConfig c = small_config("env_default");
  c.label = "run1";
  const fs::path target = fs::temp_directory_path() / "rfwi_harness" / "env_override";
  fs::remove_all(target);
  {
    EnvGuard env(kOutputDirEnv, target.string());
    CHECK(output_directory(c) == target / "run1");
    c.max_iter = 1;
    const auto r = run_experiment(c);
    CHECK(fs::exists(target / "run1" / "manifest.json"));
    CHECK(r.output_dir == target / "run1");
  }
  CHECK(output_directory(c) == fs::path(c.output_dir) / "run1");
}

TEST_CASE("a failing run leaves an error manifest")
{
  ExperimentConfig c = small_config("failing");
  c.solver = "stochastic-gradient";
  c.sample_size = 1000;  // exceeds the population
  CHECK_THROWS_AS(run_experiment(c), ValidationError);
  const auto doc = nlohmann::json::parse(read_file(fs::path(c.output_dir) / "manifest.json"));
  CHECK(doc.at("status") == "error");
  CHECK(doc.at("error").get<std::string>().find("sample") != std::string::npos);
  CHECK_THROWS_AS(verify_manifest(fs::path(c.output_dir) / "manifest.json"), ValidationError);
}

TEST_CASE("comparison tables")
{
  ExperimentConfig c = small_config("compare");
  c.max_iter = 3;
  c.label = "full";
  const auto full = run_experiment(c);
  c.label = "grow";
  c.solver = "growing-sample";
  c.initial_sample = 2;
  c.increment = 3;
  const auto grow = run_experiment(c);

  const ComparisonTables t = compare_runs({full.manifest, grow.manifest});
  CHECK(t.by_iteration.rfind("iter,phi_full,grad_norm_full,model_error_full,cum_evals_full,"
                             "phi_grow,grad_norm_grow,model_error_grow,cum_evals_grow\n",
                             0) == 0);
  CHECK(t.by_evaluations.rfind("cum_evals,phi_full,model_error_full,phi_grow,model_error_grow\n", 0) == 0);
  // Iteration 0 row carries both runs' first records verbatim.
  const std::string run_full = read_file(full.output_dir / "run.csv");
  const auto first_full = split_fields(run_full.substr(run_full.find('\n') + 1,
                                                       run_full.find('\n', run_full.find('\n') + 1) -
                                                           run_full.find('\n') - 1));
  const std::string row0 = t.by_iteration.substr(t.by_iteration.find('\n') + 1);
  CHECK(row0.rfind("0," + first_full[1] + "," + first_full[2] + ",", 0) == 0);

  // Single run passes through.
  CHECK(compare_runs({full.manifest}).by_iteration.find("phi_full") != std::string::npos);

  // Grid mismatch.
  ExperimentConfig other = small_config("compare_other");
  other.grid.nz = 19;
  other.max_iter = 1;
  const auto odd = run_experiment(other);
  CHECK_THROWS_WITH_AS(compare_runs({full.manifest, odd.manifest}), doctest::Contains("grid"),
                       ValidationError);
  CHECK_THROWS_AS(compare_runs({}), ValidationError);
}
