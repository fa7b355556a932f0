#pragma once

// Time evolution psi(t) = exp(-i H t) psi(0) for time-independent Hermitian
// operators: a Lanczos-based Krylov propagator for production sizes and a
// dense eigendecomposition propagator used as a validation oracle.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "scarlab/lattice_basis.hpp"
#include "scarlab/operators.hpp"

namespace scarlab {

/// Uniform grid t_k = k * dt, k = 0..n-1, with n = round(t_max / dt) + 1.
struct TimeGrid {
  double t_max = 30.0;
  double dt = 0.05;

  std::vector<double> points() const;
};

struct KrylovOptions {
  int krylov_dim = 30;
  /// Bound on the a-posteriori error estimate of each accepted step.
  double tol = 1e-10;
  /// Snapshots whose norm drifts more than this are renormalised.
  double renorm_threshold = 1e-12;
  /// Total number of Lanczos restarts before giving up.
  std::size_t max_substeps = 1'000'000;
};

struct EvolutionStats {
  std::size_t krylov_builds = 0;
  std::size_t matvecs = 0;
  std::size_t substeps = 0;           // restarts at off-grid times
  std::size_t renormalisations = 0;
  double max_norm_drift = 0.0;        // |‖psi‖ - 1| before renormalisation
  double max_error_estimate = 0.0;    // largest accepted step estimate
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> snapshots;
  std::uint64_t hamiltonian_digest = 0;
  EvolutionStats stats;
};

/// Receives each snapshot in grid order; the state reference is only valid
/// for the duration of the call.
using SnapshotVisitor = std::function<void(std::size_t k, double t, const StateVector& psi)>;

/// Strictly increasing grid starting at 0 (ParameterError otherwise).
void validate_time_grid(const std::vector<double>& times);

/// Krylov propagation that hands each grid snapshot to `visit` instead of
/// storing it. Use this when the trajectory does not fit in memory.
EvolutionStats evolve_krylov_stream(const OperatorMatrix& h, const StateVector& psi0,
                                    const std::vector<double>& times,
                                    const KrylovOptions& options, const SnapshotVisitor& visit);

Trajectory evolve_krylov(const OperatorMatrix& h, const StateVector& psi0,
                         const std::vector<double>& times, const KrylovOptions& options = {});

/// exp(-i H dt) psi for a single signed interval, substepping as needed.
StateVector propagate_krylov(const OperatorMatrix& h, const StateVector& psi, double dt,
                             const KrylovOptions& options = {}, EvolutionStats* stats = nullptr);

inline constexpr std::size_t kDenseCeiling = 4096;

/// psi(t) = V exp(-i D t) V^† psi0 from a full eigendecomposition.
/// Throws SizeError when the basis exceeds `ceiling`.
Trajectory evolve_dense(const OperatorMatrix& h, const StateVector& psi0,
                        const std::vector<double>& times, std::size_t ceiling = kDenseCeiling);

/// <psi|H|psi>, real part.
double energy_expectation(const OperatorMatrix& h, const StateVector& psi);

// Binary trajectory layout (little endian, see docs/trajectory_format.md):
//   char[8]  magic "SCARTRJ1"
//   u32      n_sites, u8 boundary, u8 sector, u16 reserved
//   u64      dimension, u64 snapshot count, u64 hamiltonian digest
//   f64[n]   times
//   f64[2*dim] per snapshot, (re, im) pairs
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::ostream& out, const BasisMap& basis, const std::vector<double>& times,
                   std::uint64_t hamiltonian_digest);

  /// Append the next snapshot; exactly times.size() calls are expected.
  void append(const StateVector& psi);
  std::size_t written() const noexcept { return written_; }

 private:
  std::ostream& out_;
  std::size_t dim_;
  std::size_t expected_;
  std::size_t written_ = 0;
};

void write_trajectory(std::ostream& out, const Trajectory& trajectory);
Trajectory read_trajectory(std::istream& in, const BasisPtr& basis);

}  // namespace scarlab
