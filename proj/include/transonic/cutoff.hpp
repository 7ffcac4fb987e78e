#pragma once

#include "transonic/jet.hpp"

namespace transonic {

/// Smooth step: 0 for t <= 0, 1 for t >= 1, exp(-1/t) blend in between.
template <std::size_t N>
Jet<N> smooth_step(const Jet<N>& t) {
  if (t.c[0] <= 1e-3) return Jet<N>::constant(0.0);
  if (t.c[0] >= 1.0 - 1e-3) return Jet<N>::constant(1.0);
  Jet<N> a = exp(-1.0 / t);
  Jet<N> b = exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

/// 1 for x <= x_a, 0 for x >= x_b, smooth and nonincreasing between.
template <std::size_t N>
Jet<N> falling_step(const Jet<N>& x, double xa, double xb) {
  return 1.0 - smooth_step((x - xa) * (1.0 / (xb - xa)));
}

/// Cutoffs for the duct [L0, L1] and its extension to L2 = 2 L1, with ell = L1 / 20.
struct CutoffFamily {
  double L0 = -1.0, L1 = 1.0;

  double ell() const { return L1 / 20.0; }

  /// Entrance cutoff: 1 on [L0, 0.95 L0], 0 from 0.9 L0 on.
  template <std::size_t N>
  Jet<N> eta0(const Jet<N>& x) const { return falling_step(x, 0.95 * L0, 0.9 * L0); }
  double eta0(double x) const { return eta0(Jet<0>::variable(x)).c[0]; }

  /// Drops on [L1 + 2 ell, L1 + 4 ell].
  template <std::size_t N>
  Jet<N> zeta1(const Jet<N>& x) const { return falling_step(x, L1 + 2 * ell(), L1 + 4 * ell()); }

  /// Drops on [L1 + ell, L1 + 2 ell].
  template <std::size_t N>
  Jet<N> zeta2(const Jet<N>& x) const { return falling_step(x, L1 + ell(), L1 + 2 * ell()); }
};

}  // namespace transonic
