#pragma once

// Reference implementations for tests: dense Kronecker-product operators,
// brute-force enumeration and matrix-function propagation. Deliberately
// share no code with the library beyond the bit layout (site i = bit i-1).

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using cd = std::complex<double>;

// Local basis index 0 = down ('.'), 1 = excited ('*').
inline Mat pauli_x() { Mat m(2, 2); m << 0, 1, 1, 0; return m; }
inline Mat pauli_y() { Mat m(2, 2); m << 0, cd(0, 1), cd(0, -1), 0; return m; }  // <*|Y|.> = -i
inline Mat pauli_z() { Mat m(2, 2); m << -1, 0, 0, 1; return m; }
inline Mat down_projector() { Mat m(2, 2); m << 1, 0, 0, 0; return m; }
inline Mat id2() { return Mat::Identity(2, 2); }

// Tensor product with site n as the most significant factor, so the
// dense index equals the configuration bits.
inline Mat embed(int n, const std::vector<std::pair<int, Mat>>& factors) {
  Mat out = Mat::Identity(1, 1);
  for (int site = n; site >= 1; --site) {
    Mat f = id2();
    for (const auto& [s, m] : factors)
      if (s == site) f = f * m;
    out = Eigen::kroneckerProduct(out, f).eval();
  }
  return out;
}

inline int wrap(int site, int n) { return (site - 1 + n) % n + 1; }

// Sum_i P_{i-1} X_i P_{i+1}; on an open chain missing neighbours drop out.
inline Mat pxp(int n, bool periodic) {
  const auto dim = Eigen::Index{1} << n;
  Mat h = Mat::Zero(dim, dim);
  for (int i = 1; i <= n; ++i) {
    std::vector<std::pair<int, Mat>> f{{i, pauli_x()}};
    if (periodic || i > 1) f.push_back({wrap(i - 1, n), down_projector()});
    if (periodic || i < n) f.push_back({wrap(i + 1, n), down_projector()});
    h += embed(n, f);
  }
  return h;
}

struct Field {
  double x, y, z;
};

inline Mat local_field(const Field& h) { return h.x * pauli_x() + h.y * pauli_y() + h.z * pauli_z(); }

inline Mat perturbation(int n, const std::vector<Field>& h) {
  const auto dim = Eigen::Index{1} << n;
  Mat out = Mat::Zero(dim, dim);
  for (int i = 1; i <= n; ++i) out += embed(n, {{i, local_field(h[static_cast<std::size_t>(i - 1)])}});
  return out;
}

inline Mat sandwiched_perturbation(int n, bool periodic, const std::vector<Field>& h) {
  const auto dim = Eigen::Index{1} << n;
  Mat out = Mat::Zero(dim, dim);
  for (int i = 1; i <= n; ++i) {
    std::vector<std::pair<int, Mat>> f{{i, local_field(h[static_cast<std::size_t>(i - 1)])}};
    if (periodic || i > 1) f.push_back({wrap(i - 1, n), down_projector()});
    if (periodic || i < n) f.push_back({wrap(i + 1, n), down_projector()});
    out += embed(n, f);
  }
  return out;
}

inline bool allowed(std::uint64_t bits, int n, bool periodic) {
  for (int i = 1; i < n; ++i)
    if (((bits >> (i - 1)) & 1) && ((bits >> i) & 1)) return false;
  if (periodic && n > 2 && (bits & 1) && ((bits >> (n - 1)) & 1)) return false;
  if (periodic && n == 2 && bits == 3) return false;
  return true;
}

inline std::vector<std::uint64_t> constrained_configs(int n, bool periodic) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b)
    if (allowed(b, n, periodic)) out.push_back(b);
  return out;
}

inline Mat restrict(const Mat& m, const std::vector<std::uint64_t>& configs) {
  const auto d = static_cast<Eigen::Index>(configs.size());
  Mat out(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      out(a, b) = m(static_cast<Eigen::Index>(configs[static_cast<std::size_t>(a)]),
                    static_cast<Eigen::Index>(configs[static_cast<std::size_t>(b)]));
  return out;
}

inline Vec propagate(const Mat& h, const Vec& psi, double t) {
  const Mat u = (Mat(cd(0, -t) * h)).exp();
  return u * psi;
}

// Von Neumann entropy of sites 1..cut from the full 2^N amplitude vector.
inline double entropy(const Vec& full, int n, int cut) {
  const auto rows = Eigen::Index{1} << cut;
  const auto cols = Eigen::Index{1} << (n - cut);
  Mat m = Mat::Zero(rows, cols);
  for (Eigen::Index k = 0; k < full.size(); ++k) m(k & (rows - 1), k >> cut) = full[k];
  const Eigen::JacobiSVD<Mat> svd(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double p = svd.singularValues()[i] * svd.singularValues()[i];
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

}  // namespace oracle
