#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "scarlab/dynamics.hpp"
#include "scarlab/operators.hpp"

namespace scarlab {

/// Full spectrum of a Hermitian operator; column k of `vectors` is the
/// eigenvector for energies[k], energies ascending.
struct EigenDecomposition {
  BasisPtr basis;
  Eigen::VectorXd energies;
  Eigen::MatrixXcd vectors;

  std::size_t size() const { return static_cast<std::size_t>(energies.size()); }
  StateVector state(std::size_t k) const;
};

struct EntropyPoint {
  double energy = 0.0;
  double entropy = 0.0;
};

struct EntropyScatter {
  std::vector<EntropyPoint> points;  // one per eigenstate, ascending energy
  double strength = 0.0;
  std::uint64_t seed = 0;
  int cut = 0;
};

/// Dense Hermitian eigensolver. Throws SizeError above `ceiling`.
EigenDecomposition diagonalize(const OperatorMatrix& h, std::size_t ceiling = kDenseCeiling);

/// (E_k, S(v_k)) for every eigenstate. The operator must live on a
/// constrained basis.
EntropyScatter entropy_scan(const EigenDecomposition& eigen, int cut);
EntropyScatter entropy_scan(const OperatorMatrix& h, int cut, std::size_t ceiling = kDenseCeiling);

}  // namespace scarlab
