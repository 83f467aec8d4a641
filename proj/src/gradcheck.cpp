#include "dbr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dbr/ops.hpp"

namespace dbr {

GradCheckReport grad_check(std::string name, const GradFn& fn, std::vector<Tensor> inputs,
                           const GradCheckOptions& opt) {
  GradCheckReport report;
  report.op = std::move(name);
  report.tolerance = opt.tol;

  std::mt19937_64 rng(opt.seed);
  Tensor projection;
  auto objective = [&]() {
    Tensor out = fn(inputs);
    if (out.numel() == 1) return out;
    if (!projection.defined()) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      std::vector<double> w(out.numel());
      for (auto& v : w) v = u(rng);
      projection = Tensor::from_data(out.shape(), std::move(w));
    }
    return reduce_sum(mul(out, projection));
  };

  for (auto& t : inputs) {
    if (t.requires_grad()) t.zero_grad();
  }
  objective().backward();

  std::vector<std::pair<std::size_t, std::size_t>> probes;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (!inputs[t].requires_grad()) continue;
    for (std::size_t i = 0; i < inputs[t].numel(); ++i) probes.emplace_back(t, i);
  }
  if (opt.max_probes > 0 && probes.size() > opt.max_probes) {
    std::shuffle(probes.begin(), probes.end(), rng);
    probes.resize(opt.max_probes);
    std::sort(probes.begin(), probes.end());
  }

  double worst = 0.0;
  for (auto [t, i] : probes) {
    const double analytic = inputs[t].has_grad() ? inputs[t].grad()[i] : 0.0;
    auto vals = inputs[t].mutable_values();
    const double orig = vals[i];
    vals[i] = orig + opt.h;
    const double fp = objective().item();
    vals[i] = orig - opt.h;
    const double fm = objective().item();
    vals[i] = orig;
    const double numeric = (fp - fm) / (2.0 * opt.h);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    const double rel = std::fabs(analytic - numeric) / denom;
    if (!(rel <= worst)) worst = rel;  // NaN propagates as failure
  }
  report.max_rel_error = worst;
  report.probes = probes.size();
  report.passed = worst <= opt.tol;
  return report;
}

}  // namespace dbr
