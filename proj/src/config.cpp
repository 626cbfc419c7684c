// SPDX-License-Identifier: Apache-2.0

#include "rfwi/config.hpp"

#include <functional>
#include <sstream>

#include "rfwi/io.hpp"

namespace rfwi
{

namespace
{

bool parse_bool(const std::string &v)
{
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw ValidationError("not a boolean: '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string join_doubles(const std::vector<double> &v)
{
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

std::vector<double> parse_doubles(const std::string &v)
{
  std::vector<double> out;
  for (const auto &f : split_fields(v, ','))
    out.push_back(parse_double(f));
  return out;
}

std::string anomalies_text(const std::vector<Anomaly> &list)
{
  std::string out;
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    const auto &a = list[i];
    out += (i ? "; " : "") + format_double(a.z) + ":" + format_double(a.x) + ":" +
           format_double(a.radius) + ":" + format_double(a.amplitude);
  }
  return out.empty() ? "none" : out;
}

std::vector<Anomaly> parse_anomalies(const std::string &v)
{
  std::vector<Anomaly> out;
  if (v == "none" || v.empty())
    return out;
  for (const auto &item : split_fields(v, ';'))
  {
    const auto f = split_fields(item, ':');
    if (f.size() != 4)
      throw ValidationError("anomaly must be z:x:radius:amplitude, got '" + item + "'");
    out.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3])});
  }
  return out;
}

struct Field
{
  std::function<void(ExperimentConfig &, const std::string &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

template <typename T>
Field integer_field(T ExperimentConfig::*member)
{
  return {[member](ExperimentConfig &c, const std::string &v)
          { c.*member = static_cast<T>(parse_integer(v)); },
          [member](const ExperimentConfig &c) { return std::to_string(c.*member); }};
}

Field double_field(double ExperimentConfig::*member)
{
  return {[member](ExperimentConfig &c, const std::string &v) { c.*member = parse_double(v); },
          [member](const ExperimentConfig &c) { return format_double(c.*member); }};
}

Field string_field(std::string ExperimentConfig::*member)
{
  return {[member](ExperimentConfig &c, const std::string &v) { c.*member = v; },
          [member](const ExperimentConfig &c) { return c.*member; }};
}

Field bool_field(bool ExperimentConfig::*member)
{
  return {[member](ExperimentConfig &c, const std::string &v) { c.*member = parse_bool(v); },
          [member](const ExperimentConfig &c) { return bool_text(c.*member); }};
}

const std::map<std::string, Field> &fields()
{
  static const std::map<std::string, Field> table = {
      {"grid.nz", {[](ExperimentConfig &c, const std::string &v) { c.grid.nz = parse_integer(v); },
                   [](const ExperimentConfig &c) { return std::to_string(c.grid.nz); }}},
      {"grid.nx", {[](ExperimentConfig &c, const std::string &v) { c.grid.nx = parse_integer(v); },
                   [](const ExperimentConfig &c) { return std::to_string(c.grid.nx); }}},
      {"grid.h", {[](ExperimentConfig &c, const std::string &v) { c.grid.h = parse_double(v); },
                  [](const ExperimentConfig &c) { return format_double(c.grid.h); }}},
      {"acquisition.frequencies",
       {[](ExperimentConfig &c, const std::string &v) { c.frequencies_hz = parse_doubles(v); },
        [](const ExperimentConfig &c) { return join_doubles(c.frequencies_hz); }}},
      {"acquisition.sources", integer_field(&ExperimentConfig::num_sources)},
      {"acquisition.source_depth", integer_field(&ExperimentConfig::source_depth)},
      {"acquisition.receivers", integer_field(&ExperimentConfig::num_receivers)},
      {"acquisition.receiver_depth", integer_field(&ExperimentConfig::receiver_depth)},
      {"data.scale", double_field(&ExperimentConfig::data_scale)},
      {"penalty.kind", string_field(&ExperimentConfig::penalty)},
      {"penalty.mu",
       {[](ExperimentConfig &c, const std::string &v)
        {
          if (v == "auto")
            c.huber_mu.reset();
          else
            c.huber_mu = parse_double(v);
        },
        [](const ExperimentConfig &c)
        { return c.huber_mu ? format_double(*c.huber_mu) : std::string("auto"); }}},
      {"penalty.mu_fraction", double_field(&ExperimentConfig::mu_fraction)},
      {"penalty.nu", double_field(&ExperimentConfig::nu)},
      {"solver.kind", string_field(&ExperimentConfig::solver)},
      {"solver.max_iter", integer_field(&ExperimentConfig::max_iter)},
      {"solver.memory", integer_field(&ExperimentConfig::memory)},
      {"solver.grad_tol", double_field(&ExperimentConfig::grad_tol)},
      {"solver.step", double_field(&ExperimentConfig::step)},
      {"solver.step_policy", string_field(&ExperimentConfig::step_policy)},
      {"solver.initial_sample", integer_field(&ExperimentConfig::initial_sample)},
      {"solver.increment", integer_field(&ExperimentConfig::increment)},
      {"solver.use_schedule", bool_field(&ExperimentConfig::use_schedule)},
      {"solver.schedule_rate", double_field(&ExperimentConfig::schedule_rate)},
      {"solver.cyclic", bool_field(&ExperimentConfig::cyclic)},
      {"solver.record_every", integer_field(&ExperimentConfig::record_every)},
      {"solver.monitor_full", bool_field(&ExperimentConfig::monitor_full)},
      {"sample.kind", string_field(&ExperimentConfig::sample_kind)},
      {"sample.size", integer_field(&ExperimentConfig::sample_size)},
      {"sample.granularity", string_field(&ExperimentConfig::granularity)},
      {"corruption.fraction", double_field(&ExperimentConfig::corruption)},
      {"seed", integer_field(&ExperimentConfig::seed)},
      {"run.threads", integer_field(&ExperimentConfig::threads)},
      {"output.dir", string_field(&ExperimentConfig::output_dir)},
      {"output.label", string_field(&ExperimentConfig::label)},
      {"output.wall_time", bool_field(&ExperimentConfig::wall_time)},
      {"model.v_top", double_field(&ExperimentConfig::v_top)},
      {"model.v_bottom", double_field(&ExperimentConfig::v_bottom)},
      {"model.layers", integer_field(&ExperimentConfig::layers)},
      {"model.anomalies",
       {[](ExperimentConfig &c, const std::string &v) { c.anomalies = parse_anomalies(v); },
        [](const ExperimentConfig &c) { return anomalies_text(c.anomalies); }}},
      {"model.v_min", double_field(&ExperimentConfig::v_min)},
      {"model.v_max", double_field(&ExperimentConfig::v_max)},
      {"initial.smoothing", double_field(&ExperimentConfig::smoothing)},
      {"initial.fixed_rows", integer_field(&ExperimentConfig::fixed_rows)},
      {"hist.min", double_field(&ExperimentConfig::hist_min)},
      {"hist.max", double_field(&ExperimentConfig::hist_max)},
      {"hist.bins", integer_field(&ExperimentConfig::hist_bins)},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const
{
  grid.validate();
  if (frequencies_hz.empty())
    throw ValidationError("at least one frequency is required");
  for (double f : frequencies_hz)
    if (!(f > 0.0))
      throw ValidationError("frequencies must be positive");
  if (num_sources < 1 || num_receivers < 1)
    throw ValidationError("need at least one source and one receiver");
  if (source_depth < 0 || source_depth >= grid.nz || receiver_depth < 0 ||
      receiver_depth >= grid.nz)
    throw ValidationError("source/receiver depth off grid");
  if (num_sources > grid.nx - 2 || num_receivers > grid.nx - 2)
    throw ValidationError("more sources or receivers than interior columns");
  if (!(corruption >= 0.0 && corruption < 1.0))
    throw ValidationError("corruption fraction must lie in [0, 1)");
  if (data_scale < 0.0)
    throw ValidationError("data.scale must be non-negative");
  if (max_iter < 0 || memory < 1 || record_every < 1)
    throw ValidationError("invalid solver iteration settings");
  if (granularity != "pair" && granularity != "source")
    throw ValidationError("sample.granularity must be 'pair' or 'source'");
  if (solver != "lbfgs" && solver != "growing-sample" && solver != "incremental" &&
      solver != "stochastic-gradient")
    throw ValidationError("unknown solver '" + solver + "'");
  if (!(v_min > 0.0) || !(v_max > v_min))
    throw ValidationError("velocity bounds must satisfy 0 < v_min < v_max");
  if (!(v_top > 0.0) || !(v_bottom > 0.0) || layers < 1)
    throw ValidationError("invalid background recipe");
  if (smoothing < 0.0)
    throw ValidationError("smoothing radius must be non-negative");
  if (fixed_rows < 0 || fixed_rows >= grid.nz)
    throw ValidationError("initial.fixed_rows must lie in [0, nz)");
  if (!(hist_max > hist_min) || hist_bins < 1)
    throw ValidationError("invalid histogram binning");
}

ExperimentConfig parse_config(std::string_view text)
{
  ExperimentConfig config;
  const auto &table = fields();
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    const std::string body = trim(line);
    if (body.empty())
      continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ValidationError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end())
      throw ValidationError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try
    {
      it->second.set(config, value);
    }
    catch (const ValidationError &e)
    {
      throw ValidationError("line " + std::to_string(lineno) + " (" + key + "): " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string &path)
{
  return parse_config(read_file(path));
}

std::map<std::string, std::string> config_entries(const ExperimentConfig &config)
{
  std::map<std::string, std::string> out;
  for (const auto &[key, field] : fields())
    out[key] = field.get(config);
  return out;
}

std::string to_text(const ExperimentConfig &config)
{
  std::string out;
  for (const auto &[key, value] : config_entries(config))
    out += key + " = " + value + "\n";
  return out;
}

}  // namespace rfwi
