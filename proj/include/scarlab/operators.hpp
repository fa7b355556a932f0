#pragma once

// Sparse Hermitian operators on a BasisMap: the PXP Hamiltonian and the
// single-site disorder terms (plain and blockade-projected).
//
// Pauli conventions, with '*' (excited) playing the role of spin up:
//   Z|*> = +|*>,  Z|.> = -|.>
//   X = |*><.| + |.><*|
//   Y = -i|*><.| + i|.><*|      (standard sigma_y)

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scarlab/lattice_basis.hpp"

namespace scarlab {

using Complex = std::complex<double>;

/// Compressed-row sparse matrix over a basis. Columns within each row are
/// strictly increasing and exact zeros are never stored.
class OperatorMatrix {
 public:
  OperatorMatrix(BasisPtr basis, std::vector<std::size_t> row_offsets,
                 std::vector<std::uint32_t> cols, std::vector<Complex> values);

  /// All-zero operator on `basis`.
  static OperatorMatrix zero(BasisPtr basis);

  const BasisPtr& basis() const noexcept { return basis_; }
  std::size_t dim() const noexcept { return row_offsets_.size() - 1; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::uint32_t> cols() const noexcept { return cols_; }
  std::span<const Complex> values() const noexcept { return values_; }

  /// <row|H|col>; zero when not stored.
  Complex entry(std::size_t row, std::size_t col) const;

  /// y = H x. `y` must not alias `x`.
  void apply(std::span<const Complex> x, std::span<Complex> y) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

  Eigen::MatrixXcd to_dense() const;
  Complex trace() const;

  /// Largest |entry(a,b) - conj(entry(b,a))|.
  double hermiticity_defect() const;

  /// FNV-1a over the basis triple and the CSR arrays.
  std::uint64_t digest() const;

  friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b);

 private:
  BasisPtr basis_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::uint32_t> cols_;
  std::vector<Complex> values_;
};

struct FieldTriple {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const FieldTriple&, const FieldTriple&) = default;
};

/// Per-site fields h^i_{X,Y,Z}, i.i.d. uniform on [-W/2, W/2].
struct DisorderRealization {
  int n_sites = 0;
  double strength = 0.0;
  std::uint64_t seed = 0;
  std::vector<FieldTriple> fields;  // fields[i-1] belongs to site i
};

/// Draw 3N fields from std::mt19937_64 seeded with `seed`. Sites are visited
/// 1..N and each consumes three raw outputs in the order x, y, z; an output r
/// maps to W * ((r >> 11) * 2^-53 - 1/2). W = 0 yields exact zeros.
DisorderRealization sample_disorder(int n_sites, double strength, std::uint64_t seed);

/// Seed of realization r in an ensemble: master_seed + r.
constexpr std::uint64_t realization_seed(std::uint64_t master_seed, std::uint64_t r) {
  return master_seed + r;
}

/// Sum_i P_{i-1} X_i P_{i+1}. Periodic chains wrap the neighbours; open chains
/// use the bulk sum over i = 2..N-1 plus the edge terms X_1 P_2 + P_{N-1} X_N.
OperatorMatrix build_pxp(const BasisPtr& basis);

/// Sum_i (hX X_i + hY Y_i + hZ Z_i) on the full tensor-product space.
OperatorMatrix build_perturbation_full(const BasisPtr& basis, const DisorderRealization& fields);

/// Sum_i P_{i-1} (hX X_i + hY Y_i + hZ Z_i) P_{i+1} on the constrained sector,
/// with the same edge handling as build_pxp.
OperatorMatrix build_perturbation_projected(const BasisPtr& basis,
                                            const DisorderRealization& fields);

/// PXP plus the disorder term matching the basis sector (full-space terms on a
/// Full basis, projected terms on a Constrained one).
OperatorMatrix build_disordered_pxp(const BasisPtr& basis, const DisorderRealization& fields);

}  // namespace scarlab
