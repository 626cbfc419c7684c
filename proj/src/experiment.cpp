// SPDX-License-Identifier: Apache-2.0

#include "rfwi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rfwi/io.hpp"

namespace rfwi
{

namespace
{

constexpr std::uint64_t kMaskStream = 1;
constexpr std::uint64_t kSolverStream = 2;

double median(std::vector<double> v)
{
  if (v.empty())
    throw ValidationError("median of an empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1)
    return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double relative_error(const RealVector &x, const RealVector &ref)
{
  return (x - ref).norm() / ref.norm();
}

std::string histogram_csv(const Histogram &initial, const Histogram &final_h,
                          const Histogram &truth)
{
  std::ostringstream out;
  out << "bin_lo,bin_hi,initial,final,true\n";
  for (int b = 0; b < static_cast<int>(initial.mass.size()); ++b)
  {
    const auto i = static_cast<std::size_t>(b);
    out << format_double(initial.bin_lo(b)) << ',' << format_double(initial.bin_hi(b)) << ','
        << format_double(initial.mass[i]) << ',' << format_double(final_h.mass[i]) << ','
        << format_double(truth.mass[i]) << '\n';
  }
  return out.str();
}

std::string model_csv(const SlownessModel &model)
{
  std::ostringstream out;
  out << "iz,ix,x\n";
  const Grid2D &g = model.grid();
  for (Index ix = 0; ix < g.nx; ++ix)
    for (Index iz = 0; iz < g.nz; ++iz)
      out << iz << ',' << ix << ',' << format_double(model.values()[g.index(iz, ix)]) << '\n';
  return out.str();
}

std::string schedule_csv(const std::vector<ScheduleRow> &rows)
{
  std::ostringstream out;
  out << "k,s_without,s_with,s_deterministic,cum_without,cum_with,cum_deterministic\n";
  for (const auto &r : rows)
    out << r.k << ',' << r.s_without << ',' << r.s_with << ',' << r.s_deterministic << ','
        << r.cum_without << ',' << r.cum_with << ',' << r.cum_deterministic << '\n';
  return out.str();
}

nlohmann::json number_or_null(double v)
{
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
}

}  // namespace

ExperimentSetup prepare_experiment(const ExperimentConfig &config)
{
  config.validate();
  ExperimentSetup setup{config, make_models(config), {}, 1.0};
  Acquisition acq = make_acquisition(config);

  if (config.data_scale > 0.0)
  {
    std::vector<double> magnitudes;
    for (const auto &d : forward_all(setup.models.truth, acq))
      for (Index r = 0; r < d.size(); ++r)
        magnitudes.push_back(std::abs(d[r]));
    const double med = median(std::move(magnitudes));
    if (!(med > 0.0))
      throw ValidationError("clean data vanish; cannot calibrate sources");
    setup.source_scale = config.data_scale / med;
    for (auto &s : acq.sources)
      for (auto &w : s.weights)
        w *= setup.source_scale;
  }

  RandomStream mask_rng(config.seed, kMaskStream);
  const CorruptionMask mask = make_mask(acq, config.corruption, mask_rng);
  setup.data = make_data(setup.models.truth, acq, mask);
  return setup;
}

Penalty resolve_penalty(const ExperimentConfig &config, const ExperimentSetup &setup)
{
  if (config.penalty != "huber" || config.huber_mu)
    return parse_penalty(config.penalty, config.huber_mu.value_or(1.0), config.nu);

  const FwiPopulation probe(config.grid, setup.data.observed, Penalty::least_squares());
  std::vector<double> components;
  for (const auto &r : probe.residuals(probe.to_parameters(setup.models.initial)))
    for (Index k = 0; k < r.size(); ++k)
      for (double c : {r[k].real(), r[k].imag()})
        if (c != 0.0)
          components.push_back(std::abs(c));
  if (components.empty())
    throw ValidationError("all residuals vanish at the initial model; set penalty.mu");
  return Penalty::huber(config.mu_fraction * median(std::move(components)));
}

std::filesystem::path output_directory(const ExperimentConfig &config)
{
  std::filesystem::path dir = config.output_dir;
  if (const char *env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0')
    dir = env;
  if (!config.label.empty())
    dir /= config.label;
  return dir;
}

ExperimentResult run_experiment(const ExperimentConfig &config)
{
  const std::filesystem::path dir = output_directory(config);
  std::filesystem::create_directories(dir);
  ExperimentResult result;
  result.output_dir = dir;
  result.manifest = dir / "manifest.json";

  nlohmann::json manifest;
  manifest["config"] = config_entries(config);
  manifest["seed"] = config.seed;
  manifest["solver"] = config.solver;

  try
  {
    config.validate();
#ifdef _OPENMP
    if (config.threads > 0)
      omp_set_num_threads(config.threads);
#endif
    const ExperimentSetup setup = prepare_experiment(config);
    result.penalty = resolve_penalty(config, setup);

    const SlownessModel &truth = setup.models.truth;
    const double scale = setup.models.initial.values().mean();
    const Granularity granularity =
        config.granularity == "source" ? Granularity::Source : Granularity::Pair;
    FwiPopulation population(config.grid, setup.data.observed, result.penalty, granularity,
                             scale);
    population.fix_top_rows(config.fixed_rows);
    const ObjectiveOracle oracle(population);
    const RealVector x0 = population.to_parameters(setup.models.initial);

    SolverOptions options;
    options.max_iter = config.max_iter;
    options.grad_tol = config.grad_tol;
    options.memory = config.memory;
    options.record_every = config.record_every;
    options.monitor_full = config.monitor_full;
    options.model_error = [&](const RealVector &x)
    { return relative_error(scale * x, truth.values()); };

    RandomStream rng(config.seed, kSolverStream);
    if (config.solver == "lbfgs")
    {
      result.record = lbfgs(oracle, x0, options);
    }
    else if (config.solver == "growing-sample")
    {
      GrowingSampleOptions growth;
      growth.initial_size = config.initial_sample;
      growth.increment = config.increment;
      if (config.use_schedule)
      {
        ScheduleParams params;
        params.m = oracle.m();
        params.rate = config.schedule_rate;
        params.iterations = config.max_iter;
        result.schedule = schedule(params);
        growth.schedule = schedule_sizes(params, ScheduleStrategy::WithoutReplacement);
      }
      result.record = growing_sample(oracle, x0, growth, rng, options);
    }
    else if (config.solver == "stochastic-gradient")
    {
      const SamplePlan plan = parse_sample_plan(config.sample_kind, config.sample_size);
      result.record = stochastic_gradient(oracle, x0, plan,
                                          parse_step_policy(config.step_policy, config.step), rng,
                                          options);
    }
    else
    {
      result.record = incremental_gradient(oracle, x0,
                                           parse_step_policy(config.step_policy, config.step),
                                           rng, options, config.cyclic);
    }

    const RealVector &xf = result.record.final_x;
    result.initial_model_error = options.model_error(x0);
    result.final_model_error = options.model_error(xf);
    result.initial_misfit = oracle.full(x0).value;
    result.final_misfit = oracle.full(xf).value;

    const auto hist = [&](const RealVector &x)
    {
      return residual_histogram(population.residuals(x), config.hist_min, config.hist_max,
                                config.hist_bins);
    };
    result.hist_initial = hist(x0);
    result.hist_final = hist(xf);
    result.hist_true = hist(population.to_parameters(truth));

    std::map<std::string, std::string> artifacts;
    {
      std::ostringstream run;
      result.record.write_csv(run, config.wall_time);
      artifacts["run.csv"] = run.str();
    }
    artifacts["residual_hist.csv"] =
        histogram_csv(result.hist_initial, result.hist_final, result.hist_true);
    artifacts["model_final.csv"] = model_csv(population.to_model(xf));
    if (!result.schedule.empty())
      artifacts["schedule.csv"] = schedule_csv(result.schedule);

    for (const auto &[name, text] : artifacts)
    {
      write_file(dir / name, text);
      manifest["artifacts"][name] = sha256_hex(text);
    }
    manifest["summary"] = {
        {"penalty", result.penalty.name()},
        {"penalty_parameter", number_or_null(result.penalty.parameter())},
        {"termination", result.record.termination},
        {"iterations", result.record.entries.empty() ? 0 : result.record.entries.back().iter},
        {"cum_evals", result.record.entries.empty() ? 0 : result.record.entries.back().cum_evals},
        {"initial_model_error", number_or_null(result.initial_model_error)},
        {"final_model_error", number_or_null(result.final_model_error)},
        {"initial_misfit", number_or_null(result.initial_misfit)},
        {"final_misfit", number_or_null(result.final_misfit)},
        {"zeroed_data", setup.data.mask.count_zeroed()},
        {"total_data", setup.data.mask.count_total()},
        {"source_scale", setup.source_scale},
    };
    manifest["status"] = "ok";
    write_file(result.manifest, manifest.dump(2) + "\n");
  }
  catch (const std::exception &e)
  {
    manifest["status"] = "error";
    manifest["error"] = e.what();
    write_file(result.manifest, manifest.dump(2) + "\n");
    throw;
  }
  return result;
}

std::vector<std::string> verify_manifest(const std::filesystem::path &manifest)
{
  const auto doc = nlohmann::json::parse(read_file(manifest));
  if (doc.value("status", std::string()) != "ok")
    throw ValidationError(manifest.string() + ": run did not complete");
  std::vector<std::string> bad;
  const auto dir = manifest.parent_path();
  for (const auto &[name, digest] : doc.at("artifacts").items())
  {
    const auto path = dir / name;
    if (!std::filesystem::exists(path) || sha256_file(path) != digest.get<std::string>())
      bad.push_back(name);
  }
  return bad;
}

}  // namespace rfwi
