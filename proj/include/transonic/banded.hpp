#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "transonic/error.hpp"

namespace transonic {

/// Banded matrix with LU factorization and partial pivoting.
/// Column-major band storage with kl extra rows reserved for pivot fill-in.
class BandedMatrix {
 public:
  BandedMatrix(std::size_t n, std::size_t kl, std::size_t ku)
      : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1), ab_(ld_ * n, 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t lower() const { return kl_; }
  std::size_t upper() const { return ku_; }

  double& at(std::size_t i, std::size_t j) {
    if (i > j + kl_ || j > i + ku_)
      throw Error(ErrorKind::dimension, "banded entry outside band");
    return ab_[idx(i, j)];
  }
  void add(std::size_t i, std::size_t j, double v) { at(i, j) += v; }

  /// In-place LU; throws singular_system when a pivot is below tol * max|row|.
  void factorize(double rel_tol = 1e-14) {
    piv_.assign(n_, 0);
    double scale = 0.0;
    for (double v : ab_) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) throw Error(ErrorKind::singular_system, "zero matrix");
    std::size_t ju = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      std::size_t km = std::min(kl_, n_ - 1 - k);
      std::size_t p = 0;
      double best = std::abs(ab_[idx(k, k)]);
      for (std::size_t i = 1; i <= km; ++i) {
        double v = std::abs(ab_[idx(k + i, k)]);
        if (v > best) { best = v; p = i; }
      }
      piv_[k] = k + p;
      if (best <= rel_tol * scale)
        throw Error(ErrorKind::singular_system, "zero pivot at row " + std::to_string(k));
      ju = std::max(ju, std::min(k + ku_ + p, n_ - 1));
      if (p != 0)
        for (std::size_t j = k; j <= ju; ++j) std::swap(ab_[idx(k, j)], ab_[idx(k + p, j)]);
      double inv = 1.0 / ab_[idx(k, k)];
      for (std::size_t i = 1; i <= km; ++i) ab_[idx(k + i, k)] *= inv;
      for (std::size_t j = k + 1; j <= ju; ++j) {
        double akj = ab_[idx(k, j)];
        if (akj == 0.0) continue;
        for (std::size_t i = 1; i <= km; ++i) ab_[idx(k + i, j)] -= ab_[idx(k + i, k)] * akj;
      }
    }
    factored_ = true;
  }

  bool factored() const { return factored_; }

  /// Solves in place after factorize().
  void solve(double* b) const {
    if (!factored_) throw Error(ErrorKind::validation, "banded solve before factorization");
    for (std::size_t k = 0; k < n_; ++k) {
      std::size_t p = piv_[k];
      if (p != k) std::swap(b[k], b[p]);
      std::size_t km = std::min(kl_, n_ - 1 - k);
      double bk = b[k];
      if (bk != 0.0)
        for (std::size_t i = 1; i <= km; ++i) b[k + i] -= ab_[idx(k + i, k)] * bk;
    }
    std::size_t w = kl_ + ku_;
    for (std::size_t kk = n_; kk-- > 0;) {
      double s = b[kk];
      std::size_t jmax = std::min(n_ - 1, kk + w);
      for (std::size_t j = kk + 1; j <= jmax; ++j) s -= ab_[idx(kk, j)] * b[j];
      b[kk] = s / ab_[idx(kk, kk)];
    }
  }

  void solve(std::vector<double>& b) const {
    if (b.size() != n_) throw Error(ErrorKind::dimension, "rhs size mismatch");
    solve(b.data());
  }

 private:
  std::size_t idx(std::size_t i, std::size_t j) const { return (kl_ + ku_ + i - j) + j * ld_; }

  std::size_t n_, kl_, ku_, ld_;
  std::vector<double> ab_;
  std::vector<std::size_t> piv_;
  bool factored_ = false;
};

}  // namespace transonic
