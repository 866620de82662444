#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "omarl/autodiff.hpp"
#include "omarl/nn.hpp"

namespace testing_support {

using omarl::Array;
namespace ad = omarl::ad;

inline Array random_array(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Array a = Array::matrix(rows, cols);
  for (auto& v : a.data()) v = u(rng);
  return a;
}

struct GradCheck {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double numeric_norm = 0.0;
};

// Central finite differences on every entry of every parameter, compared to
// the reverse-mode gradient as a whole vector.
inline GradCheck grad_check(const std::function<ad::Var()>& loss, std::vector<ad::Var> params, double h = 1e-6) {
  for (auto& p : params) p.zero_grad();
  ad::backward(loss());
  std::vector<double> analytic, numeric;
  for (auto& p : params) {
    const Array g = p.grad();
    analytic.insert(analytic.end(), g.data().begin(), g.data().end());
  }
  for (auto& p : params) {
    Array& v = p.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = loss().item();
      v[i] = keep - h;
      const double down = loss().item();
      v[i] = keep;
      numeric.push_back((up - down) / (2.0 * h));
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  GradCheck r;
  r.numeric_norm = std::sqrt(nn);
  const double scale = std::max(std::sqrt(na), std::sqrt(nn));
  r.rel_error = scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
  return r;
}

inline std::vector<double> entries(const Array& a) { return a.vec(); }

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace testing_support
