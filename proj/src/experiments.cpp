#include "scarlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/QR>

#include "scarlab/errors.hpp"

namespace scarlab {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

QuenchSeries run_quench(const OperatorMatrix& h, const StateVector& psi0,
                        const std::vector<double>& times, const KrylovOptions& options,
                        bool track_energy, const SnapshotVisitor& extra) {
  QuenchSeries out;
  out.fidelity = {times, std::vector<double>(times.size()), "fidelity"};
  out.correlation = {times, std::vector<double>(times.size()), "zz_correlation"};
  const Eigen::VectorXd zz = zz_diagonal(*psi0.basis);
  const double e0 = track_energy ? energy_expectation(h, psi0) : 0.0;
  out.stats = evolve_krylov_stream(h, psi0, times, options,
                                   [&](std::size_t k, double t, const StateVector& psi) {
                                     out.fidelity.values[k] = fidelity(psi0, psi);
                                     out.correlation.values[k] = avg_zz_correlation(psi, zz);
                                     if (track_energy)
                                       out.energy_drift = std::max(
                                           out.energy_drift, std::abs(energy_expectation(h, psi) - e0));
                                     if (extra) extra(k, t, psi);
                                   });
  return out;
}

RevivalPeak find_revival_peak(const TimeSeries& series, double t_exclude) {
  if (series.times.size() != series.values.size())
    throw SizeError("time series has mismatched times and values");
  if (!(t_exclude >= 0.0)) throw ParameterError("t_exclude must be >= 0");
  std::optional<RevivalPeak> best;
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    if (!(series.times[k] > t_exclude)) continue;
    if (!best || series.values[k] > best->value) best = RevivalPeak{series.times[k], series.values[k], k};
  }
  if (!best) throw WindowError("no samples with t > " + std::to_string(t_exclude));
  return *best;
}

std::optional<double> first_time_below(const TimeSeries& series, double threshold) {
  for (std::size_t k = 0; k < series.values.size(); ++k)
    if (series.values[k] < threshold) return series.times[k];
  return std::nullopt;
}

GaussianFit fit_gaussian_decay(std::span<const double> w, std::span<const double> y,
                               int max_iterations) {
  if (w.size() != y.size()) throw SizeError("strengths and peaks differ in length");
  if (w.size() < 4) throw ParameterError("Gaussian fit needs at least 4 points");
  {
    std::vector<double> sorted(w.begin(), w.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ParameterError("Gaussian fit needs distinct strengths");
  }
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  Eigen::VectorXd w2(n);
  for (Eigen::Index i = 0; i < n; ++i) w2[i] = w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];

  GaussianFit fit;
  const double mean = yv.mean();
  const double spread = (yv.array() - mean).abs().maxCoeff();
  if (spread <= 1e-14 * (1.0 + std::abs(mean))) {
    fit.c = mean;
    fit.residual_norm = (yv.array() - mean).matrix().norm();
    fit.converged = true;
    fit.degenerate = true;
    return fit;
  }

  double a = y.front() - y.back();
  double c = y.back();
  double b = 0.0;
  {
    // ln((y - c)/a) ~ intercept - b W^2 over the points where it is defined
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const double z = (yv[i] - c) / a;
      if (!(z > 0.0)) continue;
      const double lz = std::log(z);
      sx += w2[i];
      sy += lz;
      sxx += w2[i] * w2[i];
      sxy += w2[i] * lz;
      ++m;
    }
    const double denom = m * sxx - sx * sx;
    if (m >= 2 && denom > 0.0) b = -(m * sxy - sx * sy) / denom;
    if (!(b > 0.0) || !std::isfinite(b)) b = 1.0 / w2.maxCoeff();
  }

  auto residual = [&](double pa, double pb, double pc) {
    return ((pa * (-pb * w2.array()).exp() + pc) - yv.array()).matrix().eval();
  };
  Eigen::VectorXd r = residual(a, b, c);
  double sse = r.squaredNorm();
  const double floor = 1e-30 * yv.squaredNorm();

  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    if (sse <= floor) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd jac(n, 3);
    const Eigen::ArrayXd e = (-b * w2.array()).exp();
    jac.col(0) = e.matrix();
    jac.col(1) = (-a * w2.array() * e).matrix();
    jac.col(2).setOnes();
    const Eigen::Vector3d step = jac.colPivHouseholderQr().solve(-r);

    double lambda = 1.0;
    bool improved = false;
    Eigen::VectorXd trial_r;
    double trial_sse = sse;
    while (lambda > 1e-12) {
      trial_r = residual(a + lambda * step[0], b + lambda * step[1], c + lambda * step[2]);
      trial_sse = trial_r.squaredNorm();
      if (trial_sse < sse) {
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) {
      // No descent left: accept as converged only at a stationary point.
      const double grad = (jac.transpose() * r).norm();
      fit.converged = grad <= 1e-8 * jac.norm() * r.norm() + floor;
      break;
    }
    a += lambda * step[0];
    b += lambda * step[1];
    c += lambda * step[2];
    const double change = (sse - trial_sse) / sse;
    r = std::move(trial_r);
    sse = trial_sse;
    if (change < 1e-10) {
      fit.converged = true;
      ++iter;
      break;
    }
  }
  fit.a = a;
  fit.b = b;
  fit.c = c;
  fit.residual_norm = std::sqrt(sse);
  fit.iterations = iter;
  return fit;
}

DisorderSweepResult run_disorder_sweep(const SweepConfig& config) {
  if (config.realizations < 1) throw ParameterError("realizations must be >= 1");
  if (config.strengths.empty()) throw ParameterError("at least one disorder strength is required");
  for (double w : config.strengths)
    if (!(w >= 0.0)) throw ParameterError("disorder strengths must be >= 0");

  const auto basis = enumerate_basis(config.n_sites, config.boundary, Sector::Full);
  const StateVector psi0 = make_state(config.state, basis);
  const OperatorMatrix pxp = build_pxp(basis);
  const auto times = config.grid.points();

  const std::size_t n_w = config.strengths.size();
  const auto n_r = static_cast<std::size_t>(config.realizations);
  DisorderSweepResult result;
  result.strengths = config.strengths;
  result.realizations = config.realizations;
  result.master_seed = config.master_seed;
  result.cells.resize(n_w * n_r);

  // All realizations coincide at W = 0, so only r = 0 is evolved there.
  std::vector<std::size_t> jobs;
  for (std::size_t i = 0; i < n_w; ++i)
    for (std::size_t r = 0; r < n_r; ++r)
      if (config.strengths[i] != 0.0 || r == 0) jobs.push_back(i * n_r + r);

  parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
    const std::size_t cell = jobs[j];
    const std::size_t i = cell / n_r;
    const std::size_t r = cell % n_r;
    const double strength = config.strengths[i];
    const std::uint64_t seed = realization_seed(config.master_seed, r);
    try {
      const auto fields = sample_disorder(config.n_sites, strength, seed);
      const OperatorMatrix h = strength == 0.0 ? pxp : pxp + build_perturbation_full(basis, fields);
      const auto quench = run_quench(h, psi0, times, config.krylov);
      result.cells[cell] = {strength, static_cast<int>(r), seed,
                            find_revival_peak(quench.fidelity, config.t_exclude)};
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "sweep cell W=" << strength << " realization=" << r << " failed: " << e.what();
      throw Error(os.str());
    }
  });

  for (std::size_t i = 0; i < n_w; ++i) {
    if (config.strengths[i] == 0.0)
      for (std::size_t r = 1; r < n_r; ++r) {
        result.cells[i * n_r + r] = result.cells[i * n_r];
        result.cells[i * n_r + r].realization = static_cast<int>(r);
        result.cells[i * n_r + r].seed = realization_seed(config.master_seed, r);
      }
    double sum = 0.0;
    for (std::size_t r = 0; r < n_r; ++r) sum += result.cells[i * n_r + r].peak.value;
    const double mean = sum / static_cast<double>(n_r);
    double var = 0.0;
    for (std::size_t r = 0; r < n_r; ++r) {
      const double d = result.cells[i * n_r + r].peak.value - mean;
      var += d * d;
    }
    const double se =
        n_r > 1 ? std::sqrt(var / static_cast<double>(n_r - 1) / static_cast<double>(n_r)) : 0.0;
    result.mean_peaks.push_back(mean);
    result.std_errors.push_back(se);
  }
  return result;
}

Bits FrozenRegionReduction::embed(Bits reduced) const {
  Bits full = frozen_bits;
  for (int j = 1; j <= reduced_sites; ++j)
    if (reduced & site_mask(j)) full |= site_mask(site_map[static_cast<std::size_t>(j - 1)]);
  return full;
}

Bits FrozenRegionReduction::restrict_to_dynamic(Bits full) const {
  Bits reduced = 0;
  for (int j = 1; j <= reduced_sites; ++j)
    if (full & site_mask(site_map[static_cast<std::size_t>(j - 1)])) reduced |= site_mask(j);
  return reduced;
}

FrozenRegionReduction reduce_frozen_chain(int n_sites, int defect_site) {
  if (n_sites % 2 != 0 || n_sites < 8)
    throw IncompatibleStateError("frozen-region reduction needs an even ring with at least 8 sites");
  if (defect_site < 1 || defect_site > n_sites)
    throw IncompatibleStateError("defect site outside the chain");
  if (defect_site % 2 != 0)
    throw IncompatibleStateError("the up-flip defect must sit on a down site (even) of z2");

  auto wrap = [n_sites](int site) { return ((site - 1) % n_sites + n_sites) % n_sites + 1; };
  FrozenRegionReduction red;
  red.n_sites = n_sites;
  red.defect_site = defect_site;
  red.reduced_sites = n_sites - 5;
  const Bits defect_state =
      named_configuration({StateLabel::Z2DefectUp, defect_site}, n_sites, Boundary::Periodic);
  for (int k = 0; k < 5; ++k) {
    const int site = wrap(defect_site - 2 + k);
    red.frozen_sites[static_cast<std::size_t>(k)] = site;
    red.frozen_bits |= defect_state & site_mask(site);
  }
  for (int j = 1; j <= red.reduced_sites; ++j) red.site_map.push_back(wrap(defect_site + 2 + j));
  red.reduced_initial = red.restrict_to_dynamic(defect_state);
  return red;
}

DefectStudyResult run_defect_study(const DefectStudyConfig& config) {
  const int n = config.n_sites;
  if (n % 2 != 0) throw IncompatibleStateError("defect study needs an even number of sites");
  DefectStudyResult out;
  out.up_site = config.up_site.value_or(*default_defect_site(StateLabel::Z2DefectUp, n));
  out.down_site = config.down_site.value_or(*default_defect_site(StateLabel::Z2DefectDown, n));
  const auto times = config.grid.points();

  const auto constrained = enumerate_basis(n, config.boundary, Sector::Constrained);
  const OperatorMatrix h_constrained = build_pxp(constrained);
  const StateVector z2 = make_state({StateLabel::Z2, std::nullopt}, constrained);
  const StateVector z2_down = make_state({StateLabel::Z2DefectDown, out.down_site}, constrained);
  out.z2 = run_quench(h_constrained, z2, times, config.krylov);
  out.z2_down = run_quench(h_constrained, z2_down, times, config.krylov);

  {
    const auto full = enumerate_basis(n, config.boundary, Sector::Full);
    const OperatorMatrix h_full = build_pxp(full);
    const StateVector z2_up = make_state({StateLabel::Z2DefectUp, out.up_site}, full);
    out.z2_up = run_quench(h_full, z2_up, times, config.krylov);
  }

  if (config.boundary == Boundary::Periodic) {
    const auto red = reduce_frozen_chain(n, out.up_site);
    const auto reduced = enumerate_basis(red.reduced_sites, Boundary::Open, Sector::Constrained);
    const auto quench = run_quench(build_pxp(reduced), basis_state(reduced, red.reduced_initial), times,
                                   config.krylov);
    out.reduced_fidelity = quench.fidelity;
  }

  if (constrained->size() <= config.dense_ceiling) {
    const auto eigen = diagonalize(h_constrained, config.dense_ceiling);
    out.overlap_z2 = overlap_spectrum(eigen, z2);
    out.overlap_z2_down = overlap_spectrum(eigen, z2_down);
  }
  return out;
}

}  // namespace scarlab
