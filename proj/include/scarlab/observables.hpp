#pragma once

#include <string>
#include <vector>

#include "scarlab/dynamics.hpp"
#include "scarlab/lattice_basis.hpp"

namespace scarlab {

struct EigenDecomposition;

struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::string label;
};

/// Weights |<E_k|psi>|^2 paired with ascending energies.
struct OverlapSpectrum {
  std::vector<double> energies;
  std::vector<double> overlaps;

  /// (sum_k overlap_k^2)^-1
  double participation_ratio() const;
};

/// |<psi0|psi>|^2
double fidelity(const StateVector& psi0, const StateVector& psi);

TimeSeries fidelity_series(const Trajectory& trajectory, const StateVector& psi0);

/// Bond-averaged Z_i Z_{i+1} of a single configuration: N bonds on a ring,
/// N-1 on an open chain, each contributing s_i s_{i+1} with s = +1 excited.
double bond_average_zz(Bits bits, int n_sites, Boundary boundary);

/// Expectation of the bond-averaged Z_i Z_{i+1} operator (diagonal in the
/// configuration basis).
double avg_zz_correlation(const StateVector& psi);

/// bond_average_zz for every configuration of `basis`; pass it to the
/// two-argument overload when evaluating many states on one basis.
Eigen::VectorXd zz_diagonal(const BasisMap& basis);
double avg_zz_correlation(const StateVector& psi, const Eigen::VectorXd& diagonal);

/// Von Neumann entropy (natural log) of sites 1..cut. Amplitudes are
/// arranged as a (left, right) matrix over the configurations that actually
/// occur in the basis; requires 1 <= cut <= N-1.
double entanglement_entropy(const StateVector& psi, int cut);

OverlapSpectrum overlap_spectrum(const EigenDecomposition& eigen, const StateVector& psi);

}  // namespace scarlab
