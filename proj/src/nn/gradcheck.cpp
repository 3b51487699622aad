#include "gfm/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gfm::nn {

std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x,
                                     double h, std::span<const std::size_t> coords) {
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) all[i] = i;
    coords = all;
  }
  std::vector<double> g(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const std::size_t i = coords[k];
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(std::max(na, nb)), floor);
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace gfm::nn
