#pragma once

// Protocols built on top of the core modules: quenches with on-the-fly
// observables, seeded disorder sweeps with revival-peak statistics, the
// Gaussian decay fit of peak heights, and the defect-state study including
// the frozen-region reduction to a shorter open chain.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "scarlab/dynamics.hpp"
#include "scarlab/observables.hpp"
#include "scarlab/operators.hpp"
#include "scarlab/spectral.hpp"

namespace scarlab {

/// Runs `job(i)` for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any job is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job);

struct QuenchSeries {
  TimeSeries fidelity;
  TimeSeries correlation;
  EvolutionStats stats;
  /// max_t |<H>(t) - <H>(0)|, only filled when energy tracking is on.
  double energy_drift = 0.0;
};

/// Krylov evolution recording F(t) and the averaged ZZ correlation without
/// storing snapshots. `extra` (optional) sees every snapshot as well.
QuenchSeries run_quench(const OperatorMatrix& h, const StateVector& psi0,
                        const std::vector<double>& times, const KrylovOptions& options,
                        bool track_energy = false, const SnapshotVisitor& extra = {});

struct RevivalPeak {
  double time = 0.0;
  double value = 0.0;
  std::size_t index = 0;
};

/// Global maximum over samples with t > t_exclude, earliest on ties.
/// Throws WindowError if no sample lies in the window.
RevivalPeak find_revival_peak(const TimeSeries& series, double t_exclude = 1.0);

/// First grid time with value < threshold, if any.
std::optional<double> first_time_below(const TimeSeries& series, double threshold);

/// a * exp(-b W^2) + c
struct GaussianFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  /// All peaks equal: a = 0 and b carries no information.
  bool degenerate = false;
  int iterations = 0;

  double operator()(double w) const { return a * std::exp(-b * w * w) + c; }
};

/// Damped Gauss-Newton least squares. Starts from a = y_first - y_last,
/// c = y_last and b from a log-linear regression of (y - c)/a on W^2.
/// Needs at least four distinct abscissae.
GaussianFit fit_gaussian_decay(std::span<const double> strengths, std::span<const double> peaks,
                               int max_iterations = 500);

struct SweepConfig {
  int n_sites = 16;
  Boundary boundary = Boundary::Periodic;
  NamedState state{StateLabel::Z2, std::nullopt};
  std::vector<double> strengths;
  int realizations = 10;
  std::uint64_t master_seed = 0;
  TimeGrid grid;
  double t_exclude = 1.0;
  KrylovOptions krylov;
  int threads = 1;
};

struct SweepCell {
  double strength = 0.0;
  int realization = 0;
  std::uint64_t seed = 0;
  RevivalPeak peak;
};

struct DisorderSweepResult {
  std::vector<double> strengths;
  std::vector<double> mean_peaks;
  std::vector<double> std_errors;  // sample standard error over realizations
  int realizations = 0;
  std::uint64_t master_seed = 0;
  std::vector<SweepCell> cells;    // ordered by (strength index, realization)
};

/// For every W and realization r: full-space PXP plus disorder drawn with
/// seed master_seed + r, Krylov quench from the named state, fidelity peak.
DisorderSweepResult run_disorder_sweep(const SweepConfig& config);

/// The five sites pinned around an up-flip defect of Z2 on a ring, and the
/// open chain formed by the remaining sites.
struct FrozenRegionReduction {
  int n_sites = 0;
  int defect_site = 0;
  std::array<int, 5> frozen_sites{};
  int reduced_sites = 0;
  /// site_map[j-1] = original site of reduced site j; starts just after the
  /// frozen block and follows the ring.
  std::vector<int> site_map;
  /// Frozen block of the defect state (down, up, up, up, down).
  Bits frozen_bits = 0;
  /// Defect state restricted to the dynamic sites, in reduced numbering.
  Bits reduced_initial = 0;

  Bits embed(Bits reduced) const;
  Bits restrict_to_dynamic(Bits full) const;
};

FrozenRegionReduction reduce_frozen_chain(int n_sites, int defect_site);

struct DefectStudyConfig {
  int n_sites = 14;
  Boundary boundary = Boundary::Periodic;
  TimeGrid grid;
  KrylovOptions krylov;
  std::optional<int> up_site;    // defaults via default_defect_site
  std::optional<int> down_site;
  std::size_t dense_ceiling = kDenseCeiling;
};

struct DefectStudyResult {
  int up_site = 0;
  int down_site = 0;
  QuenchSeries z2;         // constrained basis
  QuenchSeries z2_down;    // constrained basis
  QuenchSeries z2_up;      // full basis
  std::optional<TimeSeries> reduced_fidelity;  // periodic chains only
  /// Empty when the constrained dimension exceeds the dense ceiling.
  std::optional<OverlapSpectrum> overlap_z2;
  std::optional<OverlapSpectrum> overlap_z2_down;
};

DefectStudyResult run_defect_study(const DefectStudyConfig& config);

}  // namespace scarlab
