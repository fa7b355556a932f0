#include "scarlab/dynamics.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "scarlab/errors.hpp"

namespace scarlab {

namespace {

constexpr double kBreakdown = 1e-13;

// Krylov basis of a single restart: q_0 = v/‖v‖, tridiagonal projection T
// and its eigendecomposition for cheap evaluation of exp(-i T tau) e_1.
class LanczosExponential {
 public:
  LanczosExponential(const OperatorMatrix& h, int max_dim) : h_(h), max_dim_(max_dim) {
    const auto n = static_cast<Eigen::Index>(h.dim());
    max_dim_ = static_cast<int>(std::min<Eigen::Index>(max_dim_, n));
    q_.resize(n, max_dim_);
    work_.resize(n);
  }

  void build(const Eigen::VectorXcd& v, EvolutionStats& stats) {
    norm0_ = v.norm();
    if (norm0_ == 0.0) throw ParameterError("cannot propagate the zero vector");
    Eigen::VectorXd alpha(max_dim_), beta(max_dim_);
    q_.col(0) = v / norm0_;
    dim_ = max_dim_;
    exact_ = false;
    for (int j = 0; j < max_dim_; ++j) {
      auto& w = work_;
      h_.apply(std::span<const Complex>(q_.col(j).data(), static_cast<std::size_t>(q_.rows())),
               std::span<Complex>(w.data(), static_cast<std::size_t>(w.size())));
      ++stats.matvecs;
      alpha[j] = q_.col(j).dot(w).real();
      w -= alpha[j] * q_.col(j);
      if (j > 0) w -= beta[j - 1] * q_.col(j - 1);
      beta[j] = w.norm();
      if (beta[j] <= kBreakdown * (std::abs(alpha[j]) + (j > 0 ? beta[j - 1] : 0.0) + 1.0)) {
        dim_ = j + 1;
        exact_ = true;
        break;
      }
      if (j + 1 < max_dim_) q_.col(j + 1) = w / beta[j];
    }
    residual_beta_ = exact_ ? 0.0 : beta[dim_ - 1];
    // With a full Krylov space of the whole operator the projection is exact.
    if (static_cast<std::size_t>(dim_) == h_.dim()) {
      exact_ = true;
      residual_beta_ = 0.0;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    if (dim_ == 1) {
      eigvals_ = alpha.head(1);
      first_row_ = Eigen::VectorXd::Ones(1);
      eigvecs_ = Eigen::MatrixXd::Ones(1, 1);
    } else {
      eig.computeFromTridiagonal(alpha.head(dim_), beta.head(dim_ - 1), Eigen::ComputeEigenvectors);
      eigvals_ = eig.eigenvalues();
      eigvecs_ = eig.eigenvectors();
      first_row_ = eigvecs_.row(0).transpose();
    }
    ++stats.krylov_builds;
  }

  // exp(-i T tau) e_1 in the Krylov basis.
  Eigen::VectorXcd coefficients(double tau) const {
    Eigen::VectorXcd phase(dim_);
    for (int k = 0; k < dim_; ++k)
      phase[k] = std::polar(first_row_[k], -eigvals_[k] * tau);
    return eigvecs_.cast<Complex>() * phase;
  }

  double error_estimate(double tau) const {
    if (exact_) return 0.0;
    return norm0_ * residual_beta_ * std::abs(coefficients(tau)[dim_ - 1]);
  }

  Eigen::VectorXcd evaluate(double tau) const {
    const Eigen::VectorXcd c = norm0_ * coefficients(tau);
    return q_.leftCols(dim_) * c;
  }

 private:
  const OperatorMatrix& h_;
  int max_dim_;
  int dim_ = 0;
  bool exact_ = false;
  double norm0_ = 1.0;
  double residual_beta_ = 0.0;
  Eigen::MatrixXcd q_;  // Lanczos vectors as columns
  Eigen::VectorXcd work_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
  Eigen::VectorXd first_row_;
};

void check_unit_norm(const StateVector& psi) {
  if (std::abs(psi.norm() - 1.0) > 1e-10)
    throw ParameterError("initial state must be unit norm (norm = " + std::to_string(psi.norm()) + ")");
}

void track_norm(Eigen::VectorXcd& v, const KrylovOptions& options, EvolutionStats& stats) {
  const double norm = v.norm();
  const double drift = std::abs(norm - 1.0);
  stats.max_norm_drift = std::max(stats.max_norm_drift, drift);
  if (drift > options.renorm_threshold) {
    v /= norm;
    ++stats.renormalisations;
  }
}

// Advances psi0 through the signed offsets (offsets[0] == 0, |offsets|
// increasing), calling visit(k, state) for every offset.
template <typename Visit>
EvolutionStats krylov_core(const OperatorMatrix& h, const StateVector& psi0,
                           const std::vector<double>& offsets, const KrylovOptions& options,
                           Visit&& visit) {
  if (options.krylov_dim < 2) throw ParameterError("krylov_dim must be >= 2");
  if (!(options.tol > 0.0)) throw ParameterError("Krylov tolerance must be positive");
  require_same_space(*h.basis(), *psi0.basis, "evolve_krylov");
  check_unit_norm(psi0);

  EvolutionStats stats;
  visit(std::size_t{0}, psi0);
  if (offsets.size() == 1) return stats;

  LanczosExponential lanczos(h, options.krylov_dim);
  StateVector current = psi0;
  StateVector snapshot{psi0.basis, {}};
  double t_current = 0.0;
  std::size_t k = 1;
  std::size_t restarts = 0;

  while (k < offsets.size()) {
    if (restarts++ > options.max_substeps)
      throw ConvergenceError("Krylov propagation exceeded the restart limit", stats.max_error_estimate);
    lanczos.build(current.amplitudes, stats);

    bool advanced = false;
    while (k < offsets.size()) {
      const double tau = offsets[k] - t_current;
      const double err = lanczos.error_estimate(tau);
      if (err > options.tol) break;
      snapshot.amplitudes = lanczos.evaluate(tau);
      track_norm(snapshot.amplitudes, options, stats);
      stats.max_error_estimate = std::max(stats.max_error_estimate, err);
      visit(k, snapshot);
      advanced = true;
      ++k;
    }
    if (advanced) {
      std::swap(current.amplitudes, snapshot.amplitudes);
      t_current = offsets[k - 1];
      continue;
    }

    // The next grid point is out of reach: halve until the estimate passes.
    double tau = offsets[k] - t_current;
    double err = 0.0;
    bool found = false;
    for (int halving = 0; halving < 60; ++halving) {
      tau *= 0.5;
      err = lanczos.error_estimate(tau);
      if (err <= options.tol) {
        found = true;
        break;
      }
    }
    if (!found)
      throw ConvergenceError("Krylov step failed to reach tolerance after 60 halvings", err);
    current.amplitudes = lanczos.evaluate(tau);
    track_norm(current.amplitudes, options, stats);
    stats.max_error_estimate = std::max(stats.max_error_estimate, err);
    t_current += tau;
    ++stats.substeps;
  }
  return stats;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint64_t raw = 0;
  if constexpr (std::is_same_v<T, double>)
    raw = std::bit_cast<std::uint64_t>(value);
  else
    raw = static_cast<std::uint64_t>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((raw >> (8 * i)) & 0xff);
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw IoError("truncated trajectory file");
  std::uint64_t raw = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) raw |= std::uint64_t{buf[i]} << (8 * i);
  if constexpr (std::is_same_v<T, double>)
    return std::bit_cast<double>(raw);
  else
    return static_cast<T>(raw);
}

constexpr char kMagic[8] = {'S', 'C', 'A', 'R', 'T', 'R', 'J', '1'};

}  // namespace

std::vector<double> TimeGrid::points() const {
  if (!(dt > 0.0) || !(t_max >= 0.0) || !std::isfinite(t_max))
    throw ParameterError("time grid needs dt > 0 and t_max >= 0");
  const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

void validate_time_grid(const std::vector<double>& times) {
  if (times.empty()) throw ParameterError("time grid is empty");
  if (times.front() != 0.0) throw ParameterError("time grid must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw ParameterError("time grid must be strictly increasing (index " + std::to_string(k) + ")");
}

EvolutionStats evolve_krylov_stream(const OperatorMatrix& h, const StateVector& psi0,
                                    const std::vector<double>& times,
                                    const KrylovOptions& options, const SnapshotVisitor& visit) {
  validate_time_grid(times);
  return krylov_core(h, psi0, times, options,
                     [&](std::size_t k, const StateVector& psi) { visit(k, times[k], psi); });
}

Trajectory evolve_krylov(const OperatorMatrix& h, const StateVector& psi0,
                         const std::vector<double>& times, const KrylovOptions& options) {
  Trajectory traj;
  traj.times = times;
  traj.hamiltonian_digest = h.digest();
  traj.snapshots.reserve(times.size());
  traj.stats = evolve_krylov_stream(
      h, psi0, times, options,
      [&](std::size_t, double, const StateVector& psi) { traj.snapshots.push_back(psi); });
  return traj;
}

StateVector propagate_krylov(const OperatorMatrix& h, const StateVector& psi, double dt,
                             const KrylovOptions& options, EvolutionStats* stats) {
  StateVector out = psi;
  const std::vector<double> offsets{0.0, dt};
  auto s = krylov_core(h, psi, offsets, options, [&](std::size_t k, const StateVector& v) {
    if (k == 1) out.amplitudes = v.amplitudes;
  });
  if (stats) *stats = s;
  return out;
}

Trajectory evolve_dense(const OperatorMatrix& h, const StateVector& psi0,
                        const std::vector<double>& times, std::size_t ceiling) {
  require_same_space(*h.basis(), *psi0.basis, "evolve_dense");
  if (h.dim() > ceiling)
    throw SizeError("dense evolution limited to dimension " + std::to_string(ceiling) + ", got " +
                    std::to_string(h.dim()));
  validate_time_grid(times);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h.to_dense());
  const Eigen::VectorXd& energies = eig.eigenvalues();
  const Eigen::MatrixXcd& vectors = eig.eigenvectors();
  const Eigen::VectorXcd coeffs = vectors.adjoint() * psi0.amplitudes;

  Trajectory traj;
  traj.times = times;
  traj.hamiltonian_digest = h.digest();
  traj.snapshots.reserve(times.size());
  traj.snapshots.push_back(psi0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    Eigen::VectorXcd rotated(coeffs.size());
    for (Eigen::Index j = 0; j < coeffs.size(); ++j)
      rotated[j] = coeffs[j] * std::polar(1.0, -energies[j] * times[k]);
    StateVector psi{psi0.basis, vectors * rotated};
    traj.stats.max_norm_drift = std::max(traj.stats.max_norm_drift, std::abs(psi.norm() - 1.0));
    traj.snapshots.push_back(std::move(psi));
  }
  return traj;
}

double energy_expectation(const OperatorMatrix& h, const StateVector& psi) {
  require_same_space(*h.basis(), *psi.basis, "energy_expectation");
  return psi.amplitudes.dot(h.apply(psi.amplitudes)).real();
}

TrajectoryWriter::TrajectoryWriter(std::ostream& out, const BasisMap& basis,
                                   const std::vector<double>& times, std::uint64_t digest)
    : out_(out), dim_(basis.size()), expected_(times.size()) {
  out_.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out_, static_cast<std::uint32_t>(basis.n_sites()));
  put_le<std::uint8_t>(out_, basis.boundary() == Boundary::Periodic ? 1 : 0);
  put_le<std::uint8_t>(out_, basis.sector() == Sector::Constrained ? 1 : 0);
  put_le<std::uint16_t>(out_, 0);
  put_le<std::uint64_t>(out_, dim_);
  put_le<std::uint64_t>(out_, expected_);
  put_le<std::uint64_t>(out_, digest);
  for (double t : times) put_le<double>(out_, t);
  if (!out_) throw IoError("failed to write trajectory header");
}

void TrajectoryWriter::append(const StateVector& psi) {
  if (written_ >= expected_) throw IoError("trajectory writer received too many snapshots");
  if (psi.size() != dim_) throw SizeError("snapshot dimension does not match trajectory header");
  for (Eigen::Index i = 0; i < psi.amplitudes.size(); ++i) {
    put_le<double>(out_, psi.amplitudes[i].real());
    put_le<double>(out_, psi.amplitudes[i].imag());
  }
  if (!out_) throw IoError("failed to write trajectory snapshot");
  ++written_;
}

void write_trajectory(std::ostream& out, const Trajectory& trajectory) {
  if (trajectory.snapshots.empty()) throw ParameterError("empty trajectory");
  TrajectoryWriter writer(out, *trajectory.snapshots.front().basis, trajectory.times,
                          trajectory.hamiltonian_digest);
  for (const auto& s : trajectory.snapshots) writer.append(s);
}

Trajectory read_trajectory(std::istream& in, const BasisPtr& basis) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a trajectory file (bad magic)");
  const auto n_sites = get_le<std::uint32_t>(in);
  const auto boundary = get_le<std::uint8_t>(in);
  const auto sector = get_le<std::uint8_t>(in);
  (void)get_le<std::uint16_t>(in);
  const auto dim = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  const auto digest = get_le<std::uint64_t>(in);

  if (static_cast<int>(n_sites) != basis->n_sites() ||
      (boundary != 0) != (basis->boundary() == Boundary::Periodic) ||
      (sector != 0) != (basis->sector() == Sector::Constrained))
    throw BasisMismatchError("trajectory header does not match basis " + basis->describe());
  if (dim != basis->size()) throw SizeError("trajectory dimension does not match basis");

  Trajectory traj;
  traj.hamiltonian_digest = digest;
  traj.times.resize(count);
  for (auto& t : traj.times) t = get_le<double>(in);
  traj.snapshots.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    StateVector psi{basis, Eigen::VectorXcd(static_cast<Eigen::Index>(dim))};
    for (std::uint64_t i = 0; i < dim; ++i) {
      const double re = get_le<double>(in);
      const double im = get_le<double>(in);
      psi.amplitudes[static_cast<Eigen::Index>(i)] = {re, im};
    }
    traj.snapshots.push_back(std::move(psi));
  }
  return traj;
}

}  // namespace scarlab
