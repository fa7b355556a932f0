// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Optional arguments select criteria by number, e.g. `scarlab_acceptance 1 2 9`.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>

#include "oracle.hpp"
#include "scarlab/cli_io.hpp"
#include "scarlab/experiments.hpp"
#include "scarlab/io.hpp"

using namespace scarlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

int hardware_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

StateVector translation_invariant_state(const BasisPtr& basis, std::uint64_t seed) {
  const int n = basis->n_sites();
  auto rotate = [&](Bits b) { return ((b << 1) | (b >> (n - 1))) & low_mask(n); };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::unordered_map<Bits, Complex> orbit;
  StateVector psi{basis, Eigen::VectorXcd(static_cast<Eigen::Index>(basis->size()))};
  for (std::size_t k = 0; k < basis->size(); ++k) {
    Bits rep = basis->config(k), b = rep;
    for (int s = 0; s < n; ++s) rep = std::min(rep, b = rotate(b));
    auto it = orbit.find(rep);
    if (it == orbit.end()) it = orbit.emplace(rep, Complex(g(rng), g(rng))).first;
    psi.amplitudes[static_cast<Eigen::Index>(k)] = it->second;
  }
  psi.amplitudes.normalize();
  return psi;
}

// 1. constrained dimensions
void basis_correctness(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  for (auto bc : {Boundary::Open, Boundary::Periodic})
    for (int n = 2; n <= 14; ++n) {
      const auto b = enumerate_basis(n, bc, Sector::Constrained);
      const auto ref = oracle::constrained_configs(n, bc == Boundary::Periodic);
      o.require(b->size() == ref.size() && std::equal(ref.begin(), ref.end(), b->configs().begin()),
                "brute force N=" + std::to_string(n) + " " + std::string(to_string(bc)));
    }
  std::vector<std::size_t> open(21), ring(21);
  for (int n = 2; n <= 20; ++n) {
    open[n] = enumerate_basis(n, Boundary::Open, Sector::Constrained)->size();
    ring[n] = enumerate_basis(n, Boundary::Periodic, Sector::Constrained)->size();
  }
  for (int n = 4; n <= 20; ++n) o.require(open[n] == open[n - 1] + open[n - 2], "Fibonacci N=" + std::to_string(n));
  for (int n = 5; n <= 20; ++n) o.require(ring[n] == ring[n - 1] + ring[n - 2], "Lucas N=" + std::to_string(n));
  o.require(ring[18] == 5778, "N=18 ring dimension");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(secs < 1.0, "runtime < 1 s");
  o.detail << "dim(N=18,pbc)=" << ring[18] << " dim(N=20,obc)=" << open[20] << " runtime=" << fmt(secs) << "s";
}

// 2. Krylov vs dense eigendecomposition
void oracle_equivalence(Outcome& o) {
  const auto basis = enumerate_basis(8, Boundary::Periodic, Sector::Full);
  const auto psi0 = make_state({StateLabel::Z2, {}}, basis);
  const auto times = TimeGrid{}.points();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto h = build_disordered_pxp(basis, sample_disorder(8, 0.3, seed));
    const auto kry = evolve_krylov(h, psi0, times);
    const auto den = evolve_dense(h, psi0, times);
    for (std::size_t k = 0; k < times.size(); ++k)
      worst = std::max(worst, (kry.snapshots[k].amplitudes - den.snapshots[k].amplitudes).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-8, "max-norm deviation < 1e-8");
  o.detail << "5 instances, N=8 full, W=0.3, max deviation=" << fmt(worst);
}

// 3. norm and energy conservation
void conservation(Outcome& o) {
  double worst_norm = 0.0, worst_energy = 0.0;
  for (int n : {8, 12, 18})
    for (double w : {0.0, 0.1, 0.5}) {
      const auto basis = enumerate_basis(n, Boundary::Periodic, Sector::Full);
      const auto h = build_disordered_pxp(basis, sample_disorder(n, w, 0));
      const auto psi0 = make_state({StateLabel::Z2, {}}, basis);
      double norm_drift = 0.0;
      const auto q = run_quench(h, psi0, TimeGrid{}.points(), {}, true,
                                [&](std::size_t, double, const StateVector& psi) {
                                  norm_drift = std::max(norm_drift, std::abs(psi.norm() - 1.0));
                                });
      norm_drift = std::max(norm_drift, q.stats.max_norm_drift);
      o.require(norm_drift < 1e-8, "norm drift N=" + std::to_string(n) + " W=" + fmt(w));
      o.require(q.energy_drift < 1e-6, "energy drift N=" + std::to_string(n) + " W=" + fmt(w));
      worst_norm = std::max(worst_norm, norm_drift);
      worst_energy = std::max(worst_energy, q.energy_drift);
    }
  o.detail << "9 trajectories, max norm drift=" << fmt(worst_norm) << " max energy drift=" << fmt(worst_energy);
}

// 4. Z2 revivals vs the all-down state, and survival at weak disorder
void scar_phenomenology(Outcome& o) {
  const int n = 18;
  const auto times = TimeGrid{}.points();
  const auto c = enumerate_basis(n, Boundary::Periodic, Sector::Constrained);
  const auto h0 = build_pxp(c);
  const auto z2 = find_revival_peak(run_quench(h0, make_state({StateLabel::Z2, {}}, c), times, {}).fidelity);
  const auto zero = find_revival_peak(run_quench(h0, make_state({StateLabel::AllDown, {}}, c), times, {}).fidelity);
  o.require(z2.value > zero.value, "max F(Z2) > max F(0) on (1,30]");

  const auto full = enumerate_basis(n, Boundary::Periodic, Sector::Full);
  const auto hw = build_disordered_pxp(full, sample_disorder(n, 0.1, 0));
  const auto z2w = find_revival_peak(run_quench(hw, make_state({StateLabel::Z2, {}}, full), times, {}).fidelity);
  o.require(z2w.value > 0.1, "Z2 peak > 0.1 at W=0.1");
  o.detail << "N=18: F_Z2 peak " << fmt(z2.value) << " @t=" << fmt(z2.time) << ", F_0 peak " << fmt(zero.value)
           << " @t=" << fmt(zero.time) << "; W=0.1 seed 0: F_Z2 peak " << fmt(z2w.value) << " @t=" << fmt(z2w.time);
}

// 5. disorder sweep: monotone mean peaks and Gaussian fit
void peak_decay(Outcome& o) {
  SweepConfig cfg;
  cfg.n_sites = 16;
  cfg.state = {StateLabel::Z2, {}};
  for (int k = 0; k <= 10; ++k) cfg.strengths.push_back(0.05 * k);
  cfg.realizations = 10;
  cfg.master_seed = 42;
  cfg.threads = hardware_threads();
  const auto r = run_disorder_sweep(cfg);
  for (std::size_t i = 0; i + 1 < r.strengths.size(); ++i) {
    const double tol = std::max(r.std_errors[i], r.std_errors[i + 1]);
    o.require(r.mean_peaks[i + 1] <= r.mean_peaks[i] + tol, "non-increasing at W=" + fmt(r.strengths[i + 1]));
  }
  const auto fit = fit_gaussian_decay(r.strengths, r.mean_peaks);
  double norm = 0.0;
  for (double y : r.mean_peaks) norm += y * y;
  norm = std::sqrt(norm);
  o.require(fit.residual_norm < 0.1 * norm, "fit residual < 10% of data norm");
  o.require(fit.b > 0.0, "b > 0");
  o.detail << "means:";
  for (std::size_t i = 0; i < r.mean_peaks.size(); ++i) o.detail << " " << fmt(r.mean_peaks[i]);
  o.detail << "; fit a=" << fmt(fit.a) << " b=" << fmt(fit.b) << " c=" << fmt(fit.c)
           << " residual/norm=" << fmt(fit.residual_norm / norm);
}

// 6. up-flip defect on the 18-site ring vs the 13-site open chain
void defect_equivalence(Outcome& o) {
  const int n = 18;
  const int d = *default_defect_site(StateLabel::Z2DefectUp, n);
  const auto red = reduce_frozen_chain(n, d);
  const auto times = TimeGrid{}.points();
  const auto full = enumerate_basis(n, Boundary::Periodic, Sector::Full);
  const auto a = run_quench(build_pxp(full), make_state({StateLabel::Z2DefectUp, d}, full), times, {});
  const auto small = enumerate_basis(red.reduced_sites, Boundary::Open, Sector::Constrained);
  const auto b = run_quench(build_pxp(small), basis_state(small, red.reduced_initial), times, {});
  double worst = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k)
    worst = std::max(worst, std::abs(a.fidelity.values[k] - b.fidelity.values[k]));
  o.require(red.reduced_sites == 13, "reduced chain has 13 sites");
  o.require(worst < 1e-8, "pointwise |dF| < 1e-8");
  o.detail << "defect site " << d << ", reduced N=" << red.reduced_sites << ", max |dF|=" << fmt(worst);
}

// 7. down-flip defect thermalizes
void thermalizing_defect(Outcome& o) {
  DefectStudyConfig cfg;
  cfg.n_sites = 14;
  const auto r = run_defect_study(cfg);
  const auto t_z2 = first_time_below(r.z2.fidelity, 0.1);
  const auto t_down = first_time_below(r.z2_down.fidelity, 0.1);
  o.require(t_z2 && t_down && *t_down < *t_z2, "Z2'' crosses F<0.1 strictly earlier than Z2");
  const double pr_z2 = r.overlap_z2->participation_ratio();
  const double pr_down = r.overlap_z2_down->participation_ratio();
  o.require(pr_down > pr_z2, "PR(Z2'') > PR(Z2)");
  o.detail << "first F<0.1: Z2 t=" << (t_z2 ? fmt(*t_z2) : "none") << ", Z2''(site " << r.down_site
           << ") t=" << (t_down ? fmt(*t_down) : "none") << "; PR Z2=" << fmt(pr_z2) << " Z2''=" << fmt(pr_down);
}

// 8. entropy scan: scar entropy and the disorder trend
void entropy_trend(Outcome& o) {
  const int n = 14;
  const int cut = n / 2;
  const auto c = enumerate_basis(n, Boundary::Periodic, Sector::Constrained);
  auto middle_third = [](const EntropyScatter& s) {
    const std::size_t d = s.points.size();
    std::vector<double> out;
    for (std::size_t k = d / 3; k < 2 * d / 3; ++k) out.push_back(s.points[k].entropy);
    std::sort(out.begin(), out.end());
    return out;
  };

  const auto eig0 = diagonalize(build_pxp(c));
  const auto scan0 = entropy_scan(eig0, cut);
  const auto overlaps = overlap_spectrum(eig0, make_state({StateLabel::Z2, {}}, c));
  std::size_t best = 0;
  double best_w = -1.0;
  for (std::size_t k = 0; k < overlaps.overlaps.size(); ++k)
    if (overlaps.energies[k] > 0.0 && overlaps.overlaps[k] > best_w) best_w = overlaps.overlaps[k], best = k;
  const auto mid0 = middle_third(scan0);
  const double median = mid0.size() % 2 ? mid0[mid0.size() / 2]
                                        : 0.5 * (mid0[mid0.size() / 2 - 1] + mid0[mid0.size() / 2]);
  o.require(scan0.points[best].entropy < median, "scar entropy below middle-third median");

  auto low10 = [&](const std::vector<double>& sorted) {
    return std::accumulate(sorted.begin(), sorted.begin() + 10, 0.0) / 10.0;
  };
  const auto scan1 = entropy_scan(build_disordered_pxp(c, sample_disorder(n, 0.1, 0)), cut);
  const double m0 = low10(mid0), m1 = low10(middle_third(scan1));
  o.require(m1 > m0, "low-entropy mean increases from W=0 to W=0.1");
  o.detail << "scar E=" << fmt(scan0.points[best].energy) << " S=" << fmt(scan0.points[best].entropy)
           << " vs median " << fmt(median) << "; low-10 mean " << fmt(m0) << " -> " << fmt(m1);
}

// 9. observable identities
void observable_identities(Outcome& o) {
  const auto ring = enumerate_basis(12, Boundary::Periodic, Sector::Full);
  o.require(std::abs(avg_zz_correlation(make_state({StateLabel::AllDown, {}}, ring)) - 1.0) < 1e-14, "C(0)=+1");
  o.require(std::abs(avg_zz_correlation(make_state({StateLabel::Z2, {}}, ring)) + 1.0) < 1e-14, "C(Z2)=-1");
  o.require(std::abs(avg_zz_correlation(make_state({StateLabel::Z3, {}}, ring)) + 1.0 / 3.0) < 1e-14, "C(Z3)=-1/3");

  const auto h = build_disordered_pxp(ring, sample_disorder(12, 0.3, 1));
  const auto psi0 = make_state({StateLabel::Z2, {}}, ring);
  double fmin = 1.0, fmax = 0.0;
  const auto q = run_quench(h, psi0, TimeGrid{}.points(), {});
  for (double f : q.fidelity.values) fmin = std::min(fmin, f), fmax = std::max(fmax, f);
  o.require(fmin >= 0.0 && fmax <= 1.0, "fidelity in [0,1]");

  double sym = 0.0;
  for (int n : {10, 12})
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto psi = translation_invariant_state(enumerate_basis(n, Boundary::Periodic, Sector::Constrained), seed);
      for (int cut = 1; cut < n; ++cut)
        sym = std::max(sym, std::abs(entanglement_entropy(psi, cut) - entanglement_entropy(psi, n - cut)));
    }
  o.require(sym < 1e-10, "S(cut) = S(N-cut)");

  double emb = 0.0;
  for (auto bc : {Boundary::Open, Boundary::Periodic})
    for (int n = 4; n <= 10; ++n) {
      const auto c = enumerate_basis(n, bc, Sector::Constrained);
      const auto psi = evolve_krylov(build_disordered_pxp(c, sample_disorder(n, 0.4, 2)),
                                     make_state({StateLabel::AllDown, {}}, c), {0.0, 1.3})
                           .snapshots.back();
      Eigen::VectorXcd full = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
      for (std::size_t k = 0; k < c->size(); ++k)
        full[static_cast<Eigen::Index>(c->config(k))] = psi.amplitudes[static_cast<Eigen::Index>(k)];
      for (int cut = 1; cut < n; ++cut)
        emb = std::max(emb, std::abs(entanglement_entropy(psi, cut) - oracle::entropy(full, n, cut)));
    }
  o.require(emb < 1e-10, "constrained entropy = full-embedding oracle");
  o.detail << "F range [" << fmt(fmin) << ", " << fmt(fmax) << "], cut asymmetry " << fmt(sym)
           << ", embedding deviation " << fmt(emb);
}

// 10. rerun from manifest
void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "scarlab-acceptance";
  fs::remove_all(root);
  std::vector<ExperimentConfig> configs(5);
  configs[0].kind = ExperimentKind::Basis;
  configs[0].n_sites = 12;
  configs[1].kind = ExperimentKind::Evolve;
  configs[1].n_sites = 12;
  configs[1].strengths = {0.1};
  configs[1].master_seed = 7;
  configs[1].states = {{StateLabel::Z2, {}}, {StateLabel::AllDown, {}}};
  configs[1].write_trajectory = true;
  configs[2].kind = ExperimentKind::DisorderSweep;
  configs[2].n_sites = 10;
  configs[2].strengths = parse_strength_list("0:0.3:0.1");
  configs[2].realizations = 3;
  configs[2].master_seed = 42;
  configs[2].threads = hardware_threads();
  configs[3].kind = ExperimentKind::EntropyScan;
  configs[3].n_sites = 12;
  configs[3].strengths = {0.0, 0.1};
  configs[3].realizations = 2;
  configs[4].kind = ExperimentKind::DefectStudy;
  configs[4].n_sites = 12;
  std::size_t files = 0;
  for (auto& c : configs) {
    const std::string kind(to_string(c.kind));
    c.output_dir = root / kind;
    const auto first = run(c);
    const auto v = verify_manifest(c.output_dir / "manifest.json", root / (kind + "-rerun"));
    o.require(v.ok() && v.matched.size() == first.files.size(), kind + " verify");
    for (const auto& f : first.files)
      if (f.extension() == ".csv")
        o.require(read_file(c.output_dir / f) == read_file(root / (kind + "-rerun") / f), kind + "/" + f.string());
    files += v.matched.size();
  }
  fs::remove_all(root);
  o.detail << "5 experiments, " << files << " files reproduced byte for byte";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"basis correctness", basis_correctness},
      {"Krylov/dense oracle equivalence", oracle_equivalence},
      {"conservation suite", conservation},
      {"scar phenomenology", scar_phenomenology},
      {"monotone peak decay + Gaussian fit", peak_decay},
      {"defect equivalence", defect_equivalence},
      {"thermalizing defect", thermalizing_defect},
      {"entropy scan trend", entropy_trend},
      {"observable identities", observable_identities},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %-36s %s  (%.1fs) %s\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL", secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
