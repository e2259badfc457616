// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference interpolants written independently of the library: the natural
// cubic spline is solved in coefficient form (a + b t + c t^2 + d t^3) with a
// dense Gaussian elimination, and the 3D resize oracle evaluates the tensor
// product spline at each target point, contracting width first.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace viptt::testing {

inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

inline double oracle_linear(const std::vector<double>& y, double x) {
  if (y.size() == 1) return y[0];
  std::size_t i = static_cast<std::size_t>(std::floor(x));
  if (i >= y.size() - 1) i = y.size() - 2;
  const double t = x - static_cast<double>(i);
  return y[i] + t * (y[i + 1] - y[i]);
}

inline double oracle_natural_cubic(const std::vector<double>& y, double x) {
  const std::size_t n = y.size();
  if (n < 2) throw std::invalid_argument("need 2 samples");
  // c_0 = c_{n-1} = 0; c_{i-1} + 4 c_i + c_{i+1} = 3 (y_{i+1} - 2 y_i + y_{i-1}).
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> rhs(n, 0.0);
  a[0][0] = 1.0;
  a[n - 1][n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    a[i][i - 1] = 1.0;
    a[i][i] = 4.0;
    a[i][i + 1] = 1.0;
    rhs[i] = 3.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
  }
  const std::vector<double> c = solve_dense(a, rhs);
  std::size_t i = static_cast<std::size_t>(std::floor(x));
  if (i >= n - 1) i = n - 2;
  const double t = x - static_cast<double>(i);
  const double b = (y[i + 1] - y[i]) - (2.0 * c[i] + c[i + 1]) / 3.0;
  const double d = (c[i + 1] - c[i]) / 3.0;
  return y[i] + b * t + c[i] * t * t + d * t * t * t;
}

inline double oracle_interp(const std::vector<double>& y, double x, bool cubic) {
  return cubic && y.size() >= 2 ? oracle_natural_cubic(y, x) : oracle_linear(y, x);
}

inline double oracle_coordinate(std::size_t i, std::size_t source, std::size_t target) {
  if (target == 1) return (static_cast<double>(source) - 1.0) / 2.0;
  return static_cast<double>(i) * (static_cast<double>(source) - 1.0) / (static_cast<double>(target) - 1.0);
}

/// Brute-force separable resize of a (D, H, W) grid stored depth-major.
inline std::vector<double> oracle_resize(const std::vector<double>& v, std::size_t d, std::size_t h, std::size_t w,
                                         std::size_t td, std::size_t th, std::size_t tw, bool cubic) {
  std::vector<double> out(td * th * tw);
  for (std::size_t i = 0; i < td; ++i) {
    const double qd = oracle_coordinate(i, d, td);
    for (std::size_t j = 0; j < th; ++j) {
      const double qh = oracle_coordinate(j, h, th);
      for (std::size_t k = 0; k < tw; ++k) {
        const double qw = oracle_coordinate(k, w, tw);
        std::vector<double> along_d(d);
        for (std::size_t a = 0; a < d; ++a) {
          std::vector<double> along_h(h);
          for (std::size_t b = 0; b < h; ++b) {
            std::vector<double> row(v.begin() + static_cast<std::ptrdiff_t>((a * h + b) * w),
                                    v.begin() + static_cast<std::ptrdiff_t>((a * h + b + 1) * w));
            along_h[b] = tw == w ? row[k] : oracle_interp(row, qw, cubic);
          }
          along_d[a] = th == h ? along_h[j] : oracle_interp(along_h, qh, cubic);
        }
        out[(i * th + j) * tw + k] = td == d ? along_d[i] : oracle_interp(along_d, qd, cubic);
      }
    }
  }
  return out;
}

}  // namespace viptt::testing
