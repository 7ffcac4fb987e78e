#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace transonic {

/// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGaussNodes8 = {
    -0.96028985649753618, -0.79666647741362673, -0.52553240991632899, -0.18343464249564978,
    0.18343464249564978,  0.52553240991632899,  0.79666647741362673,  0.96028985649753618};
inline constexpr std::array<double, 8> kGaussWeights8 = {
    0.10122853629037669, 0.22238103445337434, 0.31370664587788705, 0.36268378337836177,
    0.36268378337836177, 0.31370664587788705, 0.22238103445337434, 0.10122853629037669};

/// Composite 8-point Gauss-Legendre on [a, b] with panels no wider than max_panel.
template <class F>
double gauss_integral(F&& f, double a, double b, double max_panel = 1.0 / 128.0) {
  if (a == b) return 0.0;
  std::size_t panels = std::size_t(std::ceil(std::abs(b - a) / max_panel));
  if (panels == 0) panels = 1;
  const double w = (b - a) / double(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + w * double(p), mid = lo + 0.5 * w;
    double s = 0.0;
    for (std::size_t q = 0; q < 8; ++q) s += kGaussWeights8[q] * f(mid + 0.5 * w * kGaussNodes8[q]);
    total += 0.5 * w * s;
  }
  return total;
}

}  // namespace transonic
