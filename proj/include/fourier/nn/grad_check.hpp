#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fourier/error.hpp"
#include "fourier/nn/autograd.hpp"

namespace fourier::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;   // at the worst coordinate
  double numeric = 0.0;
};

/// |a - n| / (max(|a|, |n|) + floor). The floor keeps coordinates whose true
/// gradient is zero from reporting rounding noise as a huge relative error.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / (std::max(std::abs(analytic), std::abs(numeric)) + floor);
}

/// Compares reverse-mode gradients of `loss(graph)` against central
/// differences. `loss` builds a fresh scalar from the current parameter
/// values each time it is called. When `max_coordinates` is nonzero and
/// smaller than the parameter count, that many coordinates are sampled
/// uniformly without replacement using `seed`.
template <typename LossFn>
GradCheckReport grad_check(ParameterSet<double>& params, LossFn&& loss, double eps = 1e-5,
                           std::size_t max_coordinates = 0, std::uint64_t seed = 0) {
  auto evaluate = [&] {
    Graph<double> g(false);
    const double v = loss(g)->value[0];
    if (!std::isfinite(v)) throw NumericalError("grad_check: loss is not finite (" + std::to_string(v) + ")");
    return v;
  };

  params.zero_grad();
  {
    Graph<double> g(true);
    auto out = loss(g);
    if (!std::isfinite(out->value[0])) throw NumericalError("grad_check: loss is not finite");
    g.backward(out);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params.at(p).data.size(); ++i) coords.emplace_back(p, i);
  if (max_coordinates != 0 && max_coordinates < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coordinates);
  }

  GradCheckReport report;
  report.coordinates = coords.size();
  for (auto [p, i] : coords) {
    Parameter<double>& param = params.at(p);
    const double saved = param.data[i];
    param.data[i] = saved + eps;
    const double up = evaluate();
    param.data[i] = saved - eps;
    const double down = evaluate();
    param.data[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = param.grad[i];
    const double err = relative_error(analytic, numeric);
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_parameter = param.name;
      report.worst_index = i;
      report.analytic = analytic;
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace fourier::nn
