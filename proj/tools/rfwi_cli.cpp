// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rfwi/experiment.hpp"
#include "rfwi/io.hpp"
#include "rfwi/misfit.hpp"
#include "rfwi/sampling.hpp"

namespace
{

int cmd_run(const std::string &path)
{
  const auto config = rfwi::load_config(path);
  const auto result = rfwi::run_experiment(config);
  std::cout << "solver " << config.solver << ", penalty " << result.penalty.name() << "\n"
            << "model error " << rfwi::format_double(result.initial_model_error) << " -> "
            << rfwi::format_double(result.final_model_error) << "\n"
            << "misfit " << rfwi::format_double(result.initial_misfit) << " -> "
            << rfwi::format_double(result.final_misfit) << "\n"
            << "manifest " << result.manifest.string() << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string> &paths, const std::string &out_dir)
{
  std::vector<std::filesystem::path> manifests(paths.begin(), paths.end());
  const auto tables = rfwi::compare_runs(manifests);
  std::filesystem::path dir = out_dir;
  if (dir.empty())
  {
    const char *env = std::getenv(rfwi::kOutputDirEnv);
    dir = (env != nullptr && *env != '\0') ? env : ".";
  }
  std::filesystem::create_directories(dir);
  rfwi::write_file(dir / "comparison_by_iteration.csv", tables.by_iteration);
  rfwi::write_file(dir / "comparison_by_evals.csv", tables.by_evaluations);
  std::cout << "wrote " << (dir / "comparison_by_iteration.csv").string() << " and "
            << (dir / "comparison_by_evals.csv").string() << "\n";
  return 0;
}

int cmd_schedule(long long m, double rate, int iters, double beta1, double beta2,
                 double lipschitz)
{
  rfwi::ScheduleParams params;
  params.m = m;
  params.rate = rate;
  params.iterations = iters;
  params.beta1 = beta1;
  params.beta2 = beta2;
  params.lipschitz = lipschitz;
  std::cout << "k,s_without,s_with,s_deterministic,cum_without,cum_with,cum_deterministic\n";
  for (const auto &r : rfwi::schedule(params))
    std::cout << r.k << ',' << r.s_without << ',' << r.s_with << ',' << r.s_deterministic << ','
              << r.cum_without << ',' << r.cum_with << ',' << r.cum_deterministic << '\n';
  return 0;
}

int cmd_tailcheck(const std::string &name, double t0, double t1, double t2, double alpha,
                  double mu, double nu)
{
  const auto density = rfwi::parse_density(name, alpha, mu, nu);
  const auto query = rfwi::make_tail_query(density, t0, t1, t2);
  const auto report = rfwi::tail_bound_check(query, density, density.log_concave());
  std::cout << "density " << name << (density.log_concave() ? " (log-concave)" : "") << "\n"
            << "alpha0 " << rfwi::format_double(query.alpha0) << "\n"
            << "conditional_tail " << rfwi::format_double(report.lhs) << "\n"
            << "bound " << rfwi::format_double(report.rhs) << "\n"
            << "satisfied " << (report.satisfied ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Robust frequency-domain waveform inversion with sampled objectives"};
  app.require_subcommand(1);

  std::string config_path;
  auto *run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> manifests;
  std::string compare_out;
  auto *compare = app.add_subcommand("compare", "merge run tables of several manifests");
  compare->add_option("manifests", manifests, "manifest.json files")->required();
  compare->add_option("-o,--out", compare_out, "output directory");

  long long m = 0;
  double rate = 0.9;
  int iters = 0;
  double beta1 = 1.0, beta2 = 1.0, lipschitz = 1.0;
  auto *sched = app.add_subcommand("schedule", "sample-size schedules for a linear error decay");
  sched->add_option("m", m, "population size")->required();
  sched->add_option("rate", rate, "per-iteration reduction factor")->required();
  sched->add_option("iters", iters, "number of iterations")->required();
  sched->add_option("--beta1", beta1, "gradient variance bound coefficient");
  sched->add_option("--beta2", beta2, "gradient variance bound slope");
  sched->add_option("--lipschitz", lipschitz, "Lipschitz constant");

  std::string density;
  double t0 = 0, t1 = 0, t2 = 0, alpha = 1.0, mu = 1.0, nu = 2.0;
  auto *tail = app.add_subcommand("tailcheck", "check the conditional tail bound");
  tail->add_option("density", density, "gaussian | laplace | cauchy | huber | students-t")
      ->required();
  tail->add_option("t0", t0)->required();
  tail->add_option("t1", t1)->required();
  tail->add_option("t2", t2)->required();
  tail->add_option("--alpha", alpha, "Laplace rate");
  tail->add_option("--mu", mu, "Huber threshold");
  tail->add_option("--nu", nu, "Student's t degrees of freedom");

  CLI11_PARSE(app, argc, argv);
  try
  {
    if (*run)
      return cmd_run(config_path);
    if (*compare)
      return cmd_compare(manifests, compare_out);
    if (*sched)
      return cmd_schedule(m, rate, iters, beta1, beta2, lipschitz);
    return cmd_tailcheck(density, t0, t1, t2, alpha, mu, nu);
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
