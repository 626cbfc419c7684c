// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rfwi/experiment.hpp"
#include "rfwi/io.hpp"

namespace rfwi
{

namespace
{

struct Row
{
  long iter;
  std::string phi;
  std::string grad_norm;
  std::string model_error;
  long cum_evals;
};

struct Run
{
  std::string label;
  std::vector<Row> rows;
};

std::vector<Row> read_run_csv(const std::filesystem::path &path)
{
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "iter,phi,grad_norm,model_error,cum_evals,wall_ms")
    throw ValidationError(path.string() + ": unexpected run.csv header");
  std::vector<Row> rows;
  while (std::getline(in, line))
  {
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 6)
      throw ValidationError(path.string() + ": malformed row '" + line + "'");
    rows.push_back({static_cast<long>(parse_integer(f[0])), f[1], f[2], f[3],
                    static_cast<long>(parse_integer(f[4]))});
  }
  return rows;
}

}  // namespace

ComparisonTables compare_runs(const std::vector<std::filesystem::path> &manifests)
{
  if (manifests.empty())
    throw ValidationError("compare needs at least one manifest");

  std::vector<Run> runs;
  std::map<std::string, std::string> reference_grid;
  std::set<std::string> used;
  for (std::size_t i = 0; i < manifests.size(); ++i)
  {
    const auto &path = manifests[i];
    if (const auto bad = verify_manifest(path); !bad.empty())
      throw ValidationError(path.string() + ": checksum mismatch for " + bad.front());
    const auto doc = nlohmann::json::parse(read_file(path));
    const auto &cfg = doc.at("config");

    std::map<std::string, std::string> grid;
    for (const char *key : {"grid.nz", "grid.nx", "grid.h"})
      grid[key] = cfg.at(key).get<std::string>();
    if (i == 0)
      reference_grid = grid;
    else if (grid != reference_grid)
      throw ValidationError(path.string() + ": grid " + grid["grid.nz"] + "x" + grid["grid.nx"] +
                            " (h=" + grid["grid.h"] + ") differs from " +
                            reference_grid["grid.nz"] + "x" + reference_grid["grid.nx"] +
                            " (h=" + reference_grid["grid.h"] + ")");

    std::string label = cfg.at("output.label").get<std::string>();
    if (label.empty())
      label = doc.at("solver").get<std::string>();
    for (std::string base = label; used.count(label) != 0;)
      label = base + "_" + std::to_string(i + 1);
    used.insert(label);
    runs.push_back({label, read_run_csv(path.parent_path() / "run.csv")});
  }

  ComparisonTables out;
  {
    std::ostringstream t;
    t << "iter";
    for (const auto &r : runs)
      t << ",phi_" << r.label << ",grad_norm_" << r.label << ",model_error_" << r.label
        << ",cum_evals_" << r.label;
    t << '\n';
    std::set<long> iters;
    for (const auto &r : runs)
      for (const auto &row : r.rows)
        iters.insert(row.iter);
    for (long k : iters)
    {
      t << k;
      for (const auto &r : runs)
      {
        const auto it = std::find_if(r.rows.begin(), r.rows.end(),
                                     [k](const Row &row) { return row.iter == k; });
        if (it == r.rows.end())
          t << ",,,,";
        else
          t << ',' << it->phi << ',' << it->grad_norm << ',' << it->model_error << ','
            << it->cum_evals;
      }
      t << '\n';
    }
    out.by_iteration = t.str();
  }
  {
    // Each run contributes its latest record at or before the given evaluation count.
    std::ostringstream t;
    t << "cum_evals";
    for (const auto &r : runs)
      t << ",phi_" << r.label << ",model_error_" << r.label;
    t << '\n';
    std::set<long> counts;
    for (const auto &r : runs)
      for (const auto &row : r.rows)
        counts.insert(row.cum_evals);
    for (long c : counts)
    {
      t << c;
      for (const auto &r : runs)
      {
        const Row *last = nullptr;
        for (const auto &row : r.rows)
          if (row.cum_evals <= c)
            last = &row;
        if (last == nullptr)
          t << ",,";
        else
          t << ',' << last->phi << ',' << last->model_error;
      }
      t << '\n';
    }
    out.by_evaluations = t.str();
  }
  return out;
}

}  // namespace rfwi
