#pragma once

#include <functional>
#include <vector>

#include "atat/ops.hpp"

namespace atat {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int worst_input = -1;
  Index worst_elem = -1;
};

// Central finite differences against one reverse pass, on 64-bit graphs.
// `build` assembles the graph from leaf vars (one per input tensor) and
// returns a scalar. Relative error uses max(|a|,|b|,1e-6) as denominator so
// near-zero gradients do not amplify finite-difference noise.
inline GradCheckReport grad_check(
    const std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>& build,
    std::vector<Tensor<double>> inputs, double h = 1e-4) {
  auto eval = [&](const std::vector<Tensor<double>>& pts) {
    Graph<double> g;
    std::vector<Var<double>> vars;
    vars.reserve(pts.size());
    for (const auto& t : pts) vars.push_back(g.leaf(t, false));
    Var<double> out = build(g, vars);
    require(g.val(out).size() == 1, Errc::ShapeError, "grad_check target must be scalar");
    return g.val(out)[0];
  };

  // analytic gradients
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Var<double>> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(g.leaf(t, true));
    Var<double> out = build(g, vars);
    require(g.val(out).size() == 1, Errc::ShapeError, "grad_check target must be scalar");
    g.backward(out);
    for (auto v : vars) analytic.push_back(g.grad(v));
  }

  GradCheckReport rep;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (Index e = 0; e < inputs[i].size(); ++e) {
      const double orig = inputs[i][e];
      inputs[i][e] = orig + h;
      const double fp = eval(inputs);
      inputs[i][e] = orig - h;
      const double fm = eval(inputs);
      inputs[i][e] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[i][e];
      const double denom = std::max({std::abs(ad), std::abs(fd), 1e-6});
      const double rel = std::abs(ad - fd) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_analytic = ad;
        rep.worst_numeric = fd;
        rep.worst_input = static_cast<int>(i);
        rep.worst_elem = e;
      }
    }
  }
  return rep;
}

}  // namespace atat
