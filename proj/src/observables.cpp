#include "scarlab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/SVD>

#include "scarlab/errors.hpp"
#include "scarlab/spectral.hpp"

namespace scarlab {

namespace {

// Dense compression of the distinct values taken by `key(config)`.
template <typename Key>
std::unordered_map<Bits, Eigen::Index> compress(std::span<const Bits> configs, Key&& key) {
  std::vector<Bits> values;
  values.reserve(configs.size());
  for (Bits b : configs) values.push_back(key(b));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::unordered_map<Bits, Eigen::Index> index;
  index.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) index.emplace(values[k], static_cast<Eigen::Index>(k));
  return index;
}

}  // namespace

double OverlapSpectrum::participation_ratio() const {
  double sum = 0.0;
  for (double p : overlaps) sum += p * p;
  return sum > 0.0 ? 1.0 / sum : 0.0;
}

double fidelity(const StateVector& psi0, const StateVector& psi) {
  return std::norm(inner(psi0, psi));
}

TimeSeries fidelity_series(const Trajectory& trajectory, const StateVector& psi0) {
  TimeSeries out{trajectory.times, {}, "fidelity"};
  out.values.reserve(trajectory.snapshots.size());
  for (const auto& psi : trajectory.snapshots) out.values.push_back(fidelity(psi0, psi));
  return out;
}

double bond_average_zz(Bits bits, int n_sites, Boundary boundary) {
  const int bonds = boundary == Boundary::Periodic ? n_sites : n_sites - 1;
  int sum = 0;
  for (int site = 1; site <= bonds; ++site) {
    const int next = site == n_sites ? 1 : site + 1;
    const bool a = (bits & site_mask(site)) != 0;
    const bool b = (bits & site_mask(next)) != 0;
    sum += a == b ? 1 : -1;
  }
  return static_cast<double>(sum) / bonds;
}

double avg_zz_correlation(const StateVector& psi) {
  const auto& basis = *psi.basis;
  const auto configs = basis.configs();
  double acc = 0.0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const double w = std::norm(psi.amplitudes[static_cast<Eigen::Index>(k)]);
    if (w != 0.0) acc += w * bond_average_zz(configs[k], basis.n_sites(), basis.boundary());
  }
  return acc;
}

Eigen::VectorXd zz_diagonal(const BasisMap& basis) {
  const auto configs = basis.configs();
  Eigen::VectorXd d(static_cast<Eigen::Index>(configs.size()));
  for (std::size_t k = 0; k < configs.size(); ++k)
    d[static_cast<Eigen::Index>(k)] = bond_average_zz(configs[k], basis.n_sites(), basis.boundary());
  return d;
}

double avg_zz_correlation(const StateVector& psi, const Eigen::VectorXd& diagonal) {
  if (diagonal.size() != psi.amplitudes.size()) throw SizeError("ZZ diagonal does not match the state");
  return psi.amplitudes.cwiseAbs2().dot(diagonal);
}

double entanglement_entropy(const StateVector& psi, int cut) {
  const auto& basis = *psi.basis;
  const int n = basis.n_sites();
  if (cut < 1 || cut > n - 1)
    throw ParameterError("entanglement cut must lie in 1.." + std::to_string(n - 1) + ", got " +
                         std::to_string(cut));
  const auto configs = basis.configs();
  const Bits left_mask = low_mask(cut);
  auto left_of = [&](Bits b) { return b & left_mask; };
  auto right_of = [&](Bits b) { return b >> cut; };

  Eigen::MatrixXcd m;
  if (basis.sector() == Sector::Full) {
    m = Eigen::MatrixXcd::Zero(Eigen::Index{1} << cut, Eigen::Index{1} << (n - cut));
    for (std::size_t k = 0; k < configs.size(); ++k)
      m(static_cast<Eigen::Index>(left_of(configs[k])), static_cast<Eigen::Index>(right_of(configs[k]))) =
          psi.amplitudes[static_cast<Eigen::Index>(k)];
  } else {
    const auto rows = compress(configs, left_of);
    const auto cols = compress(configs, right_of);
    m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < configs.size(); ++k)
      m(rows.at(left_of(configs[k])), cols.at(right_of(configs[k]))) =
          psi.amplitudes[static_cast<Eigen::Index>(k)];
  }

  const Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  const auto& sigma = svd.singularValues();
  const double norm2 = sigma.squaredNorm();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double p = sigma[i] * sigma[i] / norm2;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::max(entropy, 0.0);
}

OverlapSpectrum overlap_spectrum(const EigenDecomposition& eigen, const StateVector& psi) {
  require_same_space(*eigen.basis, *psi.basis, "overlap_spectrum");
  OverlapSpectrum out;
  const Eigen::VectorXcd proj = eigen.vectors.adjoint() * psi.amplitudes;
  out.energies.assign(eigen.energies.data(), eigen.energies.data() + eigen.energies.size());
  out.overlaps.resize(static_cast<std::size_t>(proj.size()));
  for (Eigen::Index k = 0; k < proj.size(); ++k) out.overlaps[static_cast<std::size_t>(k)] = std::norm(proj[k]);
  return out;
}

}  // namespace scarlab
