// SPDX-License-Identifier: Apache-2.0

#include "rfwi/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rfwi
{

namespace
{

std::vector<double> gaussian_kernel(double sigma)
{
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int j = -half; j <= half; ++j)
  {
    const double v = std::exp(-0.5 * j * j / (sigma * sigma));
    w[static_cast<std::size_t>(j + half)] = v;
    total += v;
  }
  for (auto &v : w)
    v /= total;
  return w;
}

}  // namespace

SlownessModel smooth(const SlownessModel &model, double sigma)
{
  if (sigma < 0.0)
    throw ValidationError("smoothing radius must be non-negative");
  if (sigma == 0.0)
    return model;
  const Grid2D &g = model.grid();
  const auto w = gaussian_kernel(sigma);
  const int half = static_cast<int>(w.size() / 2);
  const Eigen::Map<const Eigen::MatrixXd> in(model.values().data(), g.nz, g.nx);

  Eigen::MatrixXd pass(g.nz, g.nx);
  for (Index ix = 0; ix < g.nx; ++ix)
    for (Index iz = 0; iz < g.nz; ++iz)
    {
      double acc = 0.0;
      for (int j = -half; j <= half; ++j)
        acc += w[static_cast<std::size_t>(j + half)] * in(std::clamp<Index>(iz + j, 0, g.nz - 1), ix);
      pass(iz, ix) = acc;
    }
  RealVector out(g.size());
  Eigen::Map<Eigen::MatrixXd> res(out.data(), g.nz, g.nx);
  for (Index ix = 0; ix < g.nx; ++ix)
    for (Index iz = 0; iz < g.nz; ++iz)
    {
      double acc = 0.0;
      for (int j = -half; j <= half; ++j)
        acc += w[static_cast<std::size_t>(j + half)] * pass(iz, std::clamp<Index>(ix + j, 0, g.nx - 1));
      res(iz, ix) = acc;
    }
  return SlownessModel(g, std::move(out));
}

ModelPair make_models(const ExperimentConfig &config)
{
  config.validate();
  const Grid2D &g = config.grid;
  RealVector x(g.size());
  for (Index ix = 0; ix < g.nx; ++ix)
  {
    for (Index iz = 0; iz < g.nz; ++iz)
    {
      const Index layer = iz * config.layers / g.nz;
      double v = config.v_top;
      if (config.layers > 1)
        v += (config.v_bottom - config.v_top) * static_cast<double>(layer) / (config.layers - 1);
      const double z = static_cast<double>(iz) * g.h;
      const double xl = static_cast<double>(ix) * g.h;
      for (const auto &a : config.anomalies)
      {
        const double d2 = (z - a.z) * (z - a.z) + (xl - a.x) * (xl - a.x);
        v *= 1.0 + a.amplitude * std::exp(-0.5 * d2 / (a.radius * a.radius));
      }
      if (!(v >= config.v_min && v <= config.v_max))
        throw ValidationError("velocity " + std::to_string(v) + " m/s at node (" +
                              std::to_string(iz) + ", " + std::to_string(ix) +
                              ") outside configured bounds");
      x[g.index(iz, ix)] = 1.0 / (v * v);
    }
  }
  SlownessModel truth(g, std::move(x));
  SlownessModel initial = smooth(truth, config.smoothing);
  return {std::move(truth), std::move(initial)};
}

Acquisition make_acquisition(const ExperimentConfig &config)
{
  config.validate();
  const Grid2D &g = config.grid;
  Acquisition acq;
  for (double f : config.frequencies_hz)
    acq.frequencies.push_back(2.0 * std::numbers::pi * f);

  // Evenly spread over the interior columns 1 .. nx-2.
  auto spread = [&](Index count, Index depth)
  {
    std::vector<Index> nodes;
    const double span = static_cast<double>(g.nx - 3);
    for (Index j = 0; j < count; ++j)
    {
      const double t = count == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(count - 1);
      nodes.push_back(g.index(depth, 1 + static_cast<Index>(std::lround(t * span))));
    }
    return nodes;
  };

  for (Index p : spread(config.num_sources, config.source_depth))
    acq.sources.push_back({p, std::vector<Complex>(acq.frequencies.size(), Complex(1.0, 0.0))});
  acq.receivers = spread(config.num_receivers, config.receiver_depth);
  acq.validate(g);
  return acq;
}

Index CorruptionMask::count_zeroed() const
{
  Index n = 0;
  for (const auto &row : zeroed)
    n += std::count(row.begin(), row.end(), true);
  return n;
}

Index CorruptionMask::count_total() const
{
  Index n = 0;
  for (const auto &row : zeroed)
    n += static_cast<Index>(row.size());
  return n;
}

CorruptionMask make_mask(const Acquisition &acq, double fraction, RandomStream &rng)
{
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ValidationError("corruption fraction must lie in [0, 1)");
  CorruptionMask mask;
  mask.fraction = fraction;
  mask.seed = rng.seed();
  std::bernoulli_distribution zero(fraction);
  const Index pairs = acq.num_sources() * acq.num_frequencies();
  mask.zeroed.resize(static_cast<std::size_t>(pairs));
  for (auto &row : mask.zeroed)
  {
    row.resize(static_cast<std::size_t>(acq.num_receivers()));
    for (std::size_t r = 0; r < row.size(); ++r)
      row[r] = zero(rng.engine());
  }
  return mask;
}

std::vector<ComplexVector> forward_all(const SlownessModel &model, const Acquisition &acq)
{
  acq.validate(model.grid());
  std::vector<ComplexVector> out(static_cast<std::size_t>(acq.num_sources() * acq.num_frequencies()));
  for (Index f = 0; f < acq.num_frequencies(); ++f)
  {
    const HelmholtzSystem system = assemble(model, acq.frequencies[static_cast<std::size_t>(f)]);
    for (Index s = 0; s < acq.num_sources(); ++s)
      out[static_cast<std::size_t>(acq.pair_index(s, f))] = forward(system, acq, s, f);
  }
  return out;
}

SyntheticData make_data(const SlownessModel &truth, const Acquisition &acq,
                        const CorruptionMask &mask)
{
  SyntheticData out;
  out.clean = forward_all(truth, acq);
  if (mask.zeroed.size() != out.clean.size())
    throw ValidationError("mask does not match the acquisition");
  out.observed = acq;
  out.observed.data = out.clean;
  for (std::size_t p = 0; p < out.clean.size(); ++p)
  {
    if (static_cast<Index>(mask.zeroed[p].size()) != acq.num_receivers())
      throw ValidationError("mask row does not match receiver count");
    for (Index r = 0; r < acq.num_receivers(); ++r)
      if (mask.zeroed[p][static_cast<std::size_t>(r)])
        out.observed.data[p][r] = Complex(0.0, 0.0);
  }
  out.mask = mask;
  return out;
}

int Histogram::bin_of(double v) const
{
  const int bins = static_cast<int>(mass.size());
  const double width = (hi - lo) / bins;
  const double pos = std::floor((v - lo) / width);
  if (!(pos >= 0.0))
    return 0;
  return pos >= bins ? bins - 1 : static_cast<int>(pos);
}

double Histogram::bin_lo(int b) const
{
  return lo + (hi - lo) * b / static_cast<double>(mass.size());
}

double Histogram::bin_hi(int b) const
{
  return lo + (hi - lo) * (b + 1) / static_cast<double>(mass.size());
}

Histogram residual_histogram(const std::vector<ComplexVector> &residuals, double lo, double hi,
                             int bins)
{
  if (!(hi > lo) || bins < 1)
    throw ValidationError("invalid histogram binning");
  Histogram h{lo, hi, std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
  std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
  long long total = 0;
  for (const auto &r : residuals)
  {
    for (Index k = 0; k < r.size(); ++k)
      ++counts[static_cast<std::size_t>(h.bin_of(r[k].real()))];
    for (Index k = 0; k < r.size(); ++k)
      ++counts[static_cast<std::size_t>(h.bin_of(r[k].imag()))];
    total += 2 * r.size();
  }
  if (total == 0)
    throw ValidationError("no residuals to histogram");
  for (int b = 0; b < bins; ++b)
    h.mass[static_cast<std::size_t>(b)] = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                                          static_cast<double>(total);
  return h;
}

}  // namespace rfwi
