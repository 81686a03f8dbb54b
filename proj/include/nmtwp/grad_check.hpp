#pragma once
// Central finite-difference verification of analytic gradients. Runs in
// double precision; the relative error is taken against the analytic value.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nmtwp/tensor.hpp"

namespace nmtwp {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "tensor[i]" of the worst coordinate
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// loss_fn(tape) must rebuild the same scalar loss from the given parameters
// on every call (tape == nullptr means evaluation only).
inline GradCheckResult grad_check_params(
    const std::function<Tensor<double>(Tape<double>*)>& loss_fn,
    const std::vector<std::pair<std::string, Tensor<double>>>& params, double h = 1e-5) {
  for (auto& [name, p] : params) {
    (void)name;
    p.zero_grad();
  }
  {
    Tape<double> tape;
    Tensor<double> loss = loss_fn(&tape);
    tape.backward(loss);
  }
  GradCheckResult res;
  for (auto& [name, t] : params) {
    t.ensure_grad();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double up = loss_fn(nullptr).item();
      t.data()[i] = saved - h;
      const double dn = loss_fn(nullptr).item();
      t.data()[i] = saved;
      const double numeric = (up - dn) / (2.0 * h);
      const double analytic = t.grad()[i];
      const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "]";
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

// Variant with the numeric side evaluated on an extended-precision mirror of
// the parameters. Plain double differencing bottoms out near 1e-11 absolute,
// which a coordinate with a near-zero gradient turns into a large relative
// error no matter how correct the backward rule is; the mirror keeps the
// oracle honest for those coordinates. mirror[i] aliases params[i].
template <class LossD, class LossL>
GradCheckResult grad_check_mirror(
    LossD&& loss_d, LossL&& loss_l,
    const std::vector<std::pair<std::string, Tensor<double>>>& params,
    const std::vector<Tensor<long double>>& mirror, double h = 1e-5) {
  if (params.size() != mirror.size())
    throw std::invalid_argument("mirror does not align with params");
  for (auto& [name, p] : params) {
    (void)name;
    p.zero_grad();
  }
  {
    Tape<double> tape;
    Tensor<double> loss = loss_d(&tape);
    tape.backward(loss);
  }
  const long double hl = static_cast<long double>(h);
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [name, t] = params[k];
    const auto& tl = mirror[k];
    if (t.numel() != tl.numel())
      throw std::invalid_argument("mirror tensor shape mismatch at " + name);
    t.ensure_grad();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const long double saved = tl.data()[i];
      tl.data()[i] = saved + hl;
      const long double up = loss_l();
      tl.data()[i] = saved - hl;
      const long double dn = loss_l();
      tl.data()[i] = saved;
      const double numeric = static_cast<double>((up - dn) / (2.0L * hl));
      const double analytic = t.grad()[i];
      const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "]";
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

// Single-input form: f(tape, x) -> scalar.
inline double grad_check(
    const std::function<Tensor<double>(Tape<double>*, const Tensor<double>&)>& f,
    Tensor<double> point, double h = 1e-5) {
  point.set_requires_grad(true);
  auto loss_fn = [&](Tape<double>* tape) { return f(tape, point); };
  return grad_check_params(loss_fn, {{"x", point}}, h).max_rel_err;
}

}  // namespace nmtwp
