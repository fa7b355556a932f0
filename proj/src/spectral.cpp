#include "scarlab/spectral.hpp"

#include <Eigen/Eigenvalues>

#include "scarlab/errors.hpp"
#include "scarlab/observables.hpp"

namespace scarlab {

StateVector EigenDecomposition::state(std::size_t k) const {
  if (k >= size()) throw ParameterError("eigenstate index out of range");
  return {basis, vectors.col(static_cast<Eigen::Index>(k))};
}

EigenDecomposition diagonalize(const OperatorMatrix& h, std::size_t ceiling) {
  if (h.dim() > ceiling)
    throw SizeError("dense diagonalization limited to dimension " + std::to_string(ceiling) +
                    ", got " + std::to_string(h.dim()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h.to_dense());
  if (eig.info() != Eigen::Success)
    throw ConvergenceError("Hermitian eigensolver did not converge", 0.0);
  return {h.basis(), eig.eigenvalues(), eig.eigenvectors()};
}

EntropyScatter entropy_scan(const EigenDecomposition& eigen, int cut) {
  if (eigen.basis->sector() != Sector::Constrained)
    throw SectorError("entropy scans run on the constrained sector");
  EntropyScatter out;
  out.cut = cut;
  out.points.reserve(eigen.size());
  for (std::size_t k = 0; k < eigen.size(); ++k)
    out.points.push_back({eigen.energies[static_cast<Eigen::Index>(k)],
                          entanglement_entropy(eigen.state(k), cut)});
  return out;
}

EntropyScatter entropy_scan(const OperatorMatrix& h, int cut, std::size_t ceiling) {
  if (h.basis()->sector() != Sector::Constrained)
    throw SectorError("entropy scans run on the constrained sector");
  return entropy_scan(diagonalize(h, ceiling), cut);
}

}  // namespace scarlab
