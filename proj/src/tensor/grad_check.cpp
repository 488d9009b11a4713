#include "vitnerf/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace vitnerf {

template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& loss,
                           const std::map<std::string, Tensor<T>>& params,
                           const GradCheckOptions& options) {
  for (const auto& [name, p] : params) {
    Tensor<T> h = p;
    h.zero_grad();
  }
  loss().backward();

  std::map<std::string, std::vector<T>> analytic;
  for (const auto& [name, p] : params)
    analytic[name] = p.has_grad() ? std::vector<T>(p.grad().begin(), p.grad().end())
                                  : std::vector<T>(p.numel(), T(0));

  Rng rng(options.seed);
  GradCheckReport report;
  report.error = -1.0;
  NoGradGuard no_grad;
  for (const auto& [name, p] : params) {
    Tensor<T> param = p;
    const std::size_t n = param.numel();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.samples_per_tensor != 0 && n > options.samples_per_tensor) {
      // Partial Fisher-Yates for a sample without replacement.
      for (std::size_t i = 0; i < options.samples_per_tensor; ++i)
        std::swap(idx[i], idx[i + rng.index(n - i)]);
      idx.resize(options.samples_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    auto values = param.mutable_data();
    for (std::size_t i : idx) {
      const T orig = values[i];
      values[i] = orig + static_cast<T>(options.step);
      const double fp = static_cast<double>(loss().item());
      values[i] = orig - static_cast<T>(options.step);
      const double fm = static_cast<double>(loss().item());
      values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * options.step);
      const double a = static_cast<double>(analytic[name][i]);
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      ++report.checked;
      if (err > report.error) {
        report.error = err;
        report.worst_name = name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  if (report.error < 0) report.error = 0;
  report.passed = report.error <= options.tolerance;
  return report;
}

template GradCheckReport grad_check<float>(const std::function<Tensor<float>()>&,
                                           const std::map<std::string, Tensor<float>>&,
                                           const GradCheckOptions&);
template GradCheckReport grad_check<double>(const std::function<Tensor<double>()>&,
                                            const std::map<std::string, Tensor<double>>&,
                                            const GradCheckOptions&);

}  // namespace vitnerf
