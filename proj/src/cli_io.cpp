#include "scarlab/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scarlab/experiments.hpp"
#include "scarlab/io.hpp"

namespace scarlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kMaxKrylovDim = 200;
constexpr std::size_t kMaxGridPoints = 10'000'000;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(std::string_view text, const std::string& field) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError(field, "'" + std::string(text) + "' is not a number");
  return v;
}

std::uint64_t parse_u64(std::string_view text, const std::string& field) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError(field, "'" + std::string(text) + "' is not an unsigned 64-bit integer");
  return v;
}

// "label" or "label@site"
NamedState parse_named_state(std::string_view text) {
  const auto at = text.find('@');
  NamedState s;
  try {
    s.label = parse_state_label(trim(text.substr(0, at)));
  } catch (const Error& e) {
    throw ConfigError("states", e.what());
  }
  if (at != std::string_view::npos) {
    const auto site = parse_u64(text.substr(at + 1), "states");
    if (site > static_cast<std::uint64_t>(kMaxSites)) throw ConfigError("states", "defect site out of range");
    s.defect_site = static_cast<int>(site);
  }
  return s;
}

std::string state_text(const NamedState& s) {
  std::string out(to_string(s.label));
  if (s.defect_site) out += "@" + std::to_string(*s.defect_site);
  return out;
}

std::vector<NamedState> parse_state_list(std::string_view text) {
  std::vector<NamedState> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    if (item.empty()) throw ConfigError("states", "empty entry in state list");
    out.push_back(parse_named_state(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t constrained_count(int n, Boundary bc) {
  // a = configurations ending in 0, b = ending in 1 (open chain recursion)
  if (bc == Boundary::Open) {
    std::uint64_t a = 1, b = 1;
    for (int i = 2; i <= n; ++i) std::tie(a, b) = std::pair{a + b, a};
    return a + b;
  }
  if (n <= 2) return n == 1 ? 1 : 3;
  // ring: site 1 down -> open chain of n-1; site 1 up -> sites 2 and n down, open chain of n-3
  return constrained_count(n - 1, Boundary::Open) + (n >= 4 ? constrained_count(n - 3, Boundary::Open) : 1);
}

std::vector<NamedState> effective_states(const ExperimentConfig& c) {
  if (!c.states.empty()) return c.states;
  return {NamedState{StateLabel::Z2, std::nullopt}};
}

// Collects artifacts of one run; every file is written atomically.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, std::string_view contents) {
    write_file_atomic(dir_ / name, contents);
    record(name);
  }

  void csv(const std::string& name, std::string_view contents, json meta) {
    text(name, contents);
    meta["file"] = name;
    const auto header = contents.substr(0, contents.find('\n'));
    json columns = json::array();
    std::size_t start = 0;
    while (start <= header.size()) {
      const auto comma = header.find(',', start);
      columns.push_back(std::string(header.substr(start, comma == header.npos ? header.npos : comma - start)));
      if (comma == header.npos) break;
      start = comma + 1;
    }
    meta["columns"] = columns;
    meta["rows"] = std::count(contents.begin(), contents.end(), '\n') - 1;
    text(fs::path(name).replace_extension(".json").string(), meta.dump(2) + "\n");
  }

  // For files produced by a stream; `name` must already exist in dir.
  void record(const std::string& name) {
    std::lock_guard lock(mutex_);
    files_.push_back(name);
  }

  const fs::path& dir() const { return dir_; }

  std::vector<fs::path> sorted_files() const {
    std::vector<fs::path> out(files_.begin(), files_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  fs::path dir_;
  std::mutex mutex_;
  std::vector<std::string> files_;
};

json sidecar_base(const ExperimentConfig& c, Sector sector) {
  return {{"N", c.n_sites}, {"boundary", to_string(c.boundary)}, {"sector", to_string(sector)},
          {"experiment", to_string(c.kind)}};
}

json stats_json(const EvolutionStats& s) {
  return {{"krylov_builds", s.krylov_builds}, {"matvecs", s.matvecs},
          {"substeps", s.substeps}, {"renormalisations", s.renormalisations},
          {"max_norm_drift", s.max_norm_drift}, {"max_error_estimate", s.max_error_estimate}};
}

void run_basis(const ExperimentConfig& c, OutputSet& out) {
  const Sector sector = c.effective_sector();
  const auto basis = enumerate_basis(c.n_sites, c.boundary, sector);
  auto meta = sidecar_base(c, sector);
  meta["W"] = nullptr;
  meta["seed"] = nullptr;
  meta["state"] = nullptr;
  meta["dimension"] = basis->size();
  out.csv("basis.csv", basis_csv(*basis), meta);
}

void run_evolve(const ExperimentConfig& c, OutputSet& out) {
  const Sector sector = c.effective_sector();
  const auto basis = enumerate_basis(c.n_sites, c.boundary, sector);
  const double w = c.strengths.front();
  const std::uint64_t seed = realization_seed(c.master_seed, 0);
  const auto disorder = sample_disorder(c.n_sites, w, seed);
  const OperatorMatrix h = build_disordered_pxp(basis, disorder);
  const auto times = c.grid.points();

  if (c.dump_operator) out.text("hamiltonian.coo", operator_coo(h));
  if (c.dump_disorder) out.text("disorder.json", to_json(disorder).dump(2) + "\n");

  const auto states = effective_states(c);
  parallel_for(states.size(), c.threads, [&](std::size_t i) {
    const auto& named = states[i];
    const std::string tag(to_string(named.label));
    const StateVector psi0 = make_state(named, basis);

    std::optional<std::ofstream> traj_file;
    std::optional<TrajectoryWriter> writer;
    const std::string traj_name = "trajectory_" + tag + ".bin";
    const fs::path traj_tmp = out.dir() / (traj_name + ".tmp");
    if (c.write_trajectory) {
      fs::create_directories(out.dir());
      traj_file.emplace(traj_tmp, std::ios::binary | std::ios::trunc);
      if (!*traj_file) throw IoError("cannot open " + traj_tmp.string());
      writer.emplace(*traj_file, *basis, times, h.digest());
    }
    SnapshotVisitor extra;
    if (writer) extra = [&](std::size_t, double, const StateVector& psi) { writer->append(psi); };
    const auto q = run_quench(h, psi0, times, c.krylov, true, extra);
    if (traj_file) {
      traj_file->close();
      if (!*traj_file) throw IoError("failed writing " + traj_tmp.string());
      std::error_code ec;
      fs::rename(traj_tmp, out.dir() / traj_name, ec);
      if (ec) throw IoError("cannot move " + traj_tmp.string() + ": " + ec.message());
      out.record(traj_name);
    }

    auto meta = sidecar_base(c, sector);
    meta["W"] = w;
    meta["seed"] = seed;
    meta["state"] = state_text(named);
    meta["hamiltonian_digest"] = hex64(h.digest());
    meta["energy_drift"] = q.energy_drift;
    meta["krylov"] = stats_json(q.stats);
    out.csv("fidelity_" + tag + ".csv", time_series_csv(q.fidelity), meta);
    out.csv("correlation_" + tag + ".csv", time_series_csv(q.correlation), meta);
  });
}

void run_sweep(const ExperimentConfig& c, OutputSet& out) {
  SweepConfig sc;
  sc.n_sites = c.n_sites;
  sc.boundary = c.boundary;
  sc.state = effective_states(c).front();
  sc.strengths = c.strengths;
  sc.realizations = c.realizations;
  sc.master_seed = c.master_seed;
  sc.grid = c.grid;
  sc.t_exclude = c.t_exclude;
  sc.krylov = c.krylov;
  sc.threads = c.threads;
  const auto result = run_disorder_sweep(sc);

  auto meta = sidecar_base(c, Sector::Full);
  meta["W"] = c.strengths;
  meta["seed"] = c.master_seed;
  meta["realizations"] = c.realizations;
  meta["state"] = state_text(sc.state);
  meta["t_exclude"] = c.t_exclude;
  out.csv("sweep.csv", sweep_summary_csv(result), meta);
  out.csv("peaks.csv", sweep_cells_csv(result), meta);

  std::vector<double> distinct = c.strengths;
  std::sort(distinct.begin(), distinct.end());
  if (std::adjacent_find(distinct.begin(), distinct.end()) == distinct.end() && distinct.size() >= 4) {
    const auto fit = fit_gaussian_decay(result.strengths, result.mean_peaks);
    json j = to_json(fit);
    double data_norm = 0.0;
    for (double y : result.mean_peaks) data_norm += y * y;
    j["data_norm"] = std::sqrt(data_norm);
    out.text("fit.json", j.dump(2) + "\n");
  }
}

void run_entropy(const ExperimentConfig& c, OutputSet& out) {
  const auto basis = enumerate_basis(c.n_sites, c.boundary, Sector::Constrained);
  const int cut = c.cut.value_or(c.n_sites / 2);
  const std::size_t n_w = c.strengths.size();
  const auto n_r = static_cast<std::size_t>(c.realizations);
  parallel_for(n_w * n_r, c.threads, [&](std::size_t job) {
    const std::size_t iw = job / n_r;
    const int r = static_cast<int>(job % n_r);
    const double w = c.strengths[iw];
    const std::uint64_t seed = realization_seed(c.master_seed, r);
    const OperatorMatrix h = build_disordered_pxp(basis, sample_disorder(c.n_sites, w, seed));
    auto scatter = entropy_scan(h, cut);
    scatter.strength = w;
    scatter.seed = seed;
    auto meta = sidecar_base(c, Sector::Constrained);
    meta["W"] = w;
    meta["seed"] = seed;
    meta["realization"] = r;
    meta["state"] = nullptr;
    meta["cut"] = cut;
    char name[64];
    std::snprintf(name, sizeof(name), "entropy_w%02zu_r%02d.csv", iw, r);
    out.csv(name, entropy_csv(scatter), meta);
  });
}

void run_defect(const ExperimentConfig& c, OutputSet& out) {
  DefectStudyConfig dc;
  dc.n_sites = c.n_sites;
  dc.boundary = c.boundary;
  dc.grid = c.grid;
  dc.krylov = c.krylov;
  for (const auto& s : c.states) {
    if (s.label == StateLabel::Z2DefectUp) dc.up_site = s.defect_site;
    if (s.label == StateLabel::Z2DefectDown) dc.down_site = s.defect_site;
  }
  const auto result = run_defect_study(dc);

  const NamedState z2{StateLabel::Z2, std::nullopt};
  const NamedState up{StateLabel::Z2DefectUp, result.up_site};
  const NamedState down{StateLabel::Z2DefectDown, result.down_site};
  json summary = {{"N", c.n_sites}, {"boundary", to_string(c.boundary)},
                  {"up_site", result.up_site}, {"down_site", result.down_site}};

  auto emit = [&](const NamedState& s, Sector sector, const QuenchSeries& q) {
    const std::string tag(to_string(s.label));
    auto meta = sidecar_base(c, sector);
    meta["W"] = 0.0;
    meta["seed"] = nullptr;
    meta["state"] = state_text(s);
    meta["krylov"] = stats_json(q.stats);
    out.csv("fidelity_" + tag + ".csv", time_series_csv(q.fidelity), meta);
    out.csv("correlation_" + tag + ".csv", time_series_csv(q.correlation), meta);
    json entry;
    const auto below = first_time_below(q.fidelity, 0.1);
    entry["first_time_below_0.1"] = below ? json(*below) : json(nullptr);
    try {
      const auto peak = find_revival_peak(q.fidelity, c.t_exclude);
      entry["revival_peak"] = {{"time", peak.time}, {"value", peak.value}};
    } catch (const WindowError&) {
      entry["revival_peak"] = nullptr;
    }
    summary["states"][tag] = entry;
  };
  emit(z2, Sector::Constrained, result.z2);
  emit(down, Sector::Constrained, result.z2_down);
  emit(up, Sector::Full, result.z2_up);

  if (result.reduced_fidelity) {
    const auto red = reduce_frozen_chain(c.n_sites, result.up_site);
    json meta = {{"N", red.reduced_sites}, {"boundary", "obc"}, {"sector", "constrained"},
                 {"experiment", to_string(c.kind)}, {"W", 0.0}, {"seed", nullptr},
                 {"state", state_text(up)}, {"site_map", red.site_map}};
    out.csv("fidelity_reduced.csv", time_series_csv(*result.reduced_fidelity), meta);
  }
  auto emit_overlap = [&](const NamedState& s, const std::optional<OverlapSpectrum>& spec) {
    if (!spec) return;
    const std::string tag(to_string(s.label));
    auto meta = sidecar_base(c, Sector::Constrained);
    meta["W"] = 0.0;
    meta["seed"] = nullptr;
    meta["state"] = state_text(s);
    meta["participation_ratio"] = spec->participation_ratio();
    out.csv("overlap_" + tag + ".csv", overlap_csv(*spec), meta);
    summary["states"][tag]["participation_ratio"] = spec->participation_ratio();
  };
  emit_overlap(z2, result.overlap_z2);
  emit_overlap(down, result.overlap_z2_down);
  out.text("summary.json", summary.dump(2) + "\n");
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Basis: return "basis";
    case ExperimentKind::Evolve: return "evolve";
    case ExperimentKind::DisorderSweep: return "disorder-sweep";
    case ExperimentKind::EntropyScan: return "entropy-scan";
    case ExperimentKind::DefectStudy: return "defect-study";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view text) {
  const auto t = lower(text);
  for (auto k : {ExperimentKind::Basis, ExperimentKind::Evolve, ExperimentKind::DisorderSweep,
                 ExperimentKind::EntropyScan, ExperimentKind::DefectStudy})
    if (t == to_string(k)) return k;
  throw ConfigError("experiment", "unknown experiment '" + std::string(text) + "'");
}

Sector ExperimentConfig::effective_sector() const {
  if (sector) return *sector;
  switch (kind) {
    case ExperimentKind::Basis:
    case ExperimentKind::EntropyScan: return Sector::Constrained;
    default: return Sector::Full;
  }
}

std::vector<double> parse_strength_list(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("W", "empty strength list");
  if (t.find(':') != std::string::npos) {
    const auto c1 = t.find(':');
    const auto c2 = t.find(':', c1 + 1);
    if (c2 == std::string::npos || t.find(':', c2 + 1) != std::string::npos)
      throw ConfigError("W", "range must be start:stop:step");
    const double start = parse_real(std::string_view(t).substr(0, c1), "W");
    const double stop = parse_real(std::string_view(t).substr(c1 + 1, c2 - c1 - 1), "W");
    const double step = parse_real(std::string_view(t).substr(c2 + 1), "W");
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("W", "range step must be > 0");
    if (!(stop >= start)) throw ConfigError("W", "range stop must be >= start");
    // points start + k*step up to stop + step/2; rounding noise on the
    // last point is snapped back onto stop
    const double count = std::floor((stop - start) / step + 0.5);
    if (count > 1e6) throw ConfigError("W", "range has too many points");
    std::vector<double> out;
    for (long k = 0; k <= static_cast<long>(count); ++k) out.push_back(start + static_cast<double>(k) * step);
    if (std::abs(out.back() - stop) <= 1e-9 * step) out.back() = stop;
    return out;
  }
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= t.size()) {
    const auto comma = t.find(',', start);
    out.push_back(parse_real(std::string_view(t).substr(start, comma == std::string::npos ? std::string::npos
                                                                                          : comma - start),
                             "W"));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  if (c.n_sites < 2 || c.n_sites > kCliMaxSites)
    throw ConfigError("N", "must lie in 2.." + std::to_string(kCliMaxSites) + ", got " + std::to_string(c.n_sites));
  const Sector sector = c.effective_sector();
  const bool dynamic = c.kind == ExperimentKind::Evolve || c.kind == ExperimentKind::DisorderSweep ||
                       c.kind == ExperimentKind::DefectStudy;
  if (c.kind == ExperimentKind::DisorderSweep && sector != Sector::Full)
    throw ConfigError("sector", "disorder-sweep runs in the full space");
  if (c.kind == ExperimentKind::EntropyScan && sector != Sector::Constrained)
    throw ConfigError("sector", "entropy-scan is defined on the constrained sector");
  if (c.kind == ExperimentKind::DefectStudy && c.sector)
    throw ConfigError("sector", "defect-study chooses sectors itself; do not set one");

  if (c.kind == ExperimentKind::Evolve || c.kind == ExperimentKind::DisorderSweep) {
    if (c.kind == ExperimentKind::DisorderSweep && c.states.size() > 1)
      throw ConfigError("states", "disorder-sweep takes a single initial state");
    for (const auto& s : effective_states(c)) {
      Bits bits = 0;
      try {
        bits = named_configuration(s, c.n_sites, c.boundary);
      } catch (const Error& e) {
        throw ConfigError("states", state_text(s) + ": " + e.what());
      }
      if (sector == Sector::Constrained && !blockade_allowed(bits, c.n_sites, c.boundary))
        throw ConfigError("states", state_text(s) + " lies outside the constrained sector");
    }
  }
  if (c.kind == ExperimentKind::DefectStudy) {
    if (c.n_sites % 2 != 0 || c.n_sites < 8) throw ConfigError("N", "defect-study needs an even N >= 8");
    for (const auto& s : c.states) {
      if (s.label != StateLabel::Z2DefectUp && s.label != StateLabel::Z2DefectDown)
        throw ConfigError("states", "defect-study only accepts z2defect-up@site / z2defect-down@site");
      try {
        named_configuration(s, c.n_sites, c.boundary);
      } catch (const Error& e) {
        throw ConfigError("states", state_text(s) + ": " + e.what());
      }
    }
  }

  if (c.strengths.empty()) throw ConfigError("W", "at least one strength is required");
  for (double w : c.strengths)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("W", "strengths must be finite and >= 0");
  if (c.kind == ExperimentKind::Evolve && c.strengths.size() != 1)
    throw ConfigError("W", "evolve takes exactly one strength");
  if (c.kind == ExperimentKind::DefectStudy && (c.strengths.size() != 1 || c.strengths.front() != 0.0))
    throw ConfigError("W", "defect-study runs the clean model (W = 0)");

  if (c.realizations < 1) throw ConfigError("realizations", "must be >= 1");
  if (c.kind == ExperimentKind::Evolve && c.realizations != 1)
    throw ConfigError("realizations", "evolve runs a single realization (seed = master seed)");

  if (dynamic) {
    if (!(c.grid.dt > 0.0) || !std::isfinite(c.grid.dt)) throw ConfigError("dt", "must be finite and > 0");
    if (!(c.grid.t_max >= 0.0) || !std::isfinite(c.grid.t_max)) throw ConfigError("tmax", "must be finite and >= 0");
    if (c.grid.t_max / c.grid.dt > static_cast<double>(kMaxGridPoints))
      throw ConfigError("dt", "grid has more than " + std::to_string(kMaxGridPoints) + " points");
    if (!(c.t_exclude >= 0.0)) throw ConfigError("t_exclude", "must be >= 0");
    if (c.kind == ExperimentKind::DisorderSweep && !(c.t_exclude < c.grid.t_max))
      throw ConfigError("t_exclude", "no grid points remain after the excluded window");
    if (c.krylov.krylov_dim < 2 || c.krylov.krylov_dim > kMaxKrylovDim)
      throw ConfigError("krylov_dim", "must lie in 2.." + std::to_string(kMaxKrylovDim));
    if (!(c.krylov.tol > 0.0)) throw ConfigError("krylov_tol", "must be > 0");
  }

  if (c.kind == ExperimentKind::EntropyScan) {
    const int cut = c.cut.value_or(c.n_sites / 2);
    if (cut < 1 || cut > c.n_sites - 1)
      throw ConfigError("cut", "must lie in 1.." + std::to_string(c.n_sites - 1));
    const auto dim = constrained_count(c.n_sites, c.boundary);
    if (dim > kDenseCeiling)
      throw ConfigError("N", "constrained dimension " + std::to_string(dim) + " exceeds the dense limit " +
                                 std::to_string(kDenseCeiling));
  } else if (c.cut) {
    throw ConfigError("cut", "only entropy-scan uses a cut");
  }

  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
  if (c.output_dir.empty()) throw ConfigError("out", "output directory is required");
  if ((c.write_trajectory || c.dump_operator || c.dump_disorder) && c.kind != ExperimentKind::Evolve)
    throw ConfigError("trajectory", "trajectory and dump options belong to evolve");
}

json to_json(const ExperimentConfig& c) {
  json states = json::array();
  for (const auto& s : c.states) states.push_back(state_text(s));
  return {{"experiment", to_string(c.kind)},
          {"n", c.n_sites},
          {"bc", to_string(c.boundary)},
          {"sector", c.sector ? json(to_string(*c.sector)) : json(nullptr)},
          {"states", states},
          {"w", c.strengths},
          {"realizations", c.realizations},
          {"seed", c.master_seed},
          {"tmax", c.grid.t_max},
          {"dt", c.grid.dt},
          {"cut", c.cut ? json(*c.cut) : json(nullptr)},
          {"t_exclude", c.t_exclude},
          {"krylov_dim", c.krylov.krylov_dim},
          {"krylov_tol", c.krylov.tol},
          {"threads", c.threads},
          {"out", c.output_dir.generic_string()},
          {"trajectory", c.write_trajectory},
          {"dump_operator", c.dump_operator},
          {"dump_disorder", c.dump_disorder}};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "experiment") c.kind = parse_experiment_kind(v.get<std::string>());
      else if (key == "n") c.n_sites = v.get<int>();
      else if (key == "bc") c.boundary = parse_boundary(v.get<std::string>());
      else if (key == "sector") {
        if (v.is_null()) c.sector.reset();
        else c.sector = parse_sector(v.get<std::string>());
      } else if (key == "states" || key == "state") {
        c.states.clear();
        if (v.is_string()) c.states = parse_state_list(v.get<std::string>());
        else
          for (const auto& s : v) c.states.push_back(parse_named_state(s.get<std::string>()));
      } else if (key == "w") {
        if (v.is_string()) c.strengths = parse_strength_list(v.get<std::string>());
        else if (v.is_number()) c.strengths = {v.get<double>()};
        else c.strengths = v.get<std::vector<double>>();
      } else if (key == "realizations") c.realizations = v.get<int>();
      else if (key == "seed") c.master_seed = v.get<std::uint64_t>();
      else if (key == "tmax") c.grid.t_max = v.get<double>();
      else if (key == "dt") c.grid.dt = v.get<double>();
      else if (key == "cut") {
        if (v.is_null()) c.cut.reset();
        else c.cut = v.get<int>();
      } else if (key == "t_exclude") c.t_exclude = v.get<double>();
      else if (key == "krylov_dim") c.krylov.krylov_dim = v.get<int>();
      else if (key == "krylov_tol") c.krylov.tol = v.get<double>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "out") c.output_dir = v.get<std::string>();
      else if (key == "trajectory") c.write_trajectory = v.get<bool>();
      else if (key == "dump_operator") c.dump_operator = v.get<bool>();
      else if (key == "dump_disorder") c.dump_disorder = v.get<bool>();
      else throw ConfigError(key, "unknown configuration key");
    } catch (const json::exception& e) {
      throw ConfigError(key, e.what());
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key, e.what());
    }
  }
  return c;
}

RunReport run(const ExperimentConfig& config) {
  validate(config);
  OutputSet out(config.output_dir);
  switch (config.kind) {
    case ExperimentKind::Basis: run_basis(config, out); break;
    case ExperimentKind::Evolve: run_evolve(config, out); break;
    case ExperimentKind::DisorderSweep: run_sweep(config, out); break;
    case ExperimentKind::EntropyScan: run_entropy(config, out); break;
    case ExperimentKind::DefectStudy: run_defect(config, out); break;
  }
  RunReport report;
  report.files = out.sorted_files();
  json files = json::array();
  for (const auto& f : report.files)
    files.push_back({{"path", f.generic_string()}, {"fnv1a64", hex64(file_digest(config.output_dir / f))}});
  report.manifest = {{"schema", kManifestSchema}, {"config", to_json(config)}, {"files", files}};
  write_file_atomic(config.output_dir / "manifest.json", report.manifest.dump(2) + "\n");
  return report;
}

VerifyReport verify_manifest(const fs::path& manifest_path, const fs::path& scratch_dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ConfigError("manifest", e.what());
  }
  if (!manifest.is_object() || manifest.value("schema", std::string{}) != kManifestSchema)
    throw ConfigError("manifest", "unsupported or missing schema (expected " + std::string(kManifestSchema) + ")");
  if (!manifest.contains("config") || !manifest.contains("files"))
    throw ConfigError("manifest", "missing config or files");
  ExperimentConfig config = config_from_json(manifest.at("config"));
  config.output_dir = scratch_dir;
  const auto report = run(config);

  VerifyReport out;
  std::vector<std::string> expected;
  for (const auto& entry : manifest.at("files")) {
    const auto path = entry.at("path").get<std::string>();
    expected.push_back(path);
    const auto want = entry.at("fnv1a64").get<std::string>();
    const fs::path produced = scratch_dir / path;
    if (!fs::exists(produced) || hex64(file_digest(produced)) != want) {
      out.mismatched.push_back(path);
      continue;
    }
    const fs::path stored = manifest_path.parent_path() / path;
    if (fs::exists(stored) && hex64(file_digest(stored)) != want) {
      out.mismatched.push_back(path + " (stored copy)");
      continue;
    }
    out.matched.push_back(path);
  }
  for (const auto& f : report.files)
    if (std::find(expected.begin(), expected.end(), f.generic_string()) == expected.end())
      out.mismatched.push_back(f.generic_string() + " (not in manifest)");
  return out;
}

namespace {

struct CliOptions {
  std::string config_file;
  int n = 0;
  std::string bc, sector, states, w, out;
  int realizations = 0;
  std::uint64_t seed = 0;
  double tmax = 0, dt = 0, t_exclude = 0, krylov_tol = 0;
  int cut = 0, krylov_dim = 0, threads = 0;
  bool trajectory = false, dump_operator = false, dump_disorder = false;
};

struct BoundOptions {
  CLI::Option *config_file, *n, *bc, *sector, *states, *w, *out, *realizations, *seed, *tmax, *dt,
      *t_exclude, *krylov_tol, *cut, *krylov_dim, *threads, *trajectory, *dump_operator, *dump_disorder;
};

BoundOptions add_options(CLI::App* sub, CliOptions& o, ExperimentKind kind) {
  BoundOptions b{};
  b.config_file = sub->add_option("--config", o.config_file, "JSON configuration file (flags override it)");
  b.n = sub->add_option("-n,--n", o.n, "number of sites N");
  b.bc = sub->add_option("--bc", o.bc, "boundary: pbc | obc");
  b.out = sub->add_option("-o,--out", o.out, "output directory (default scarlab-out)");
  b.threads = sub->add_option("--threads", o.threads, "worker threads (default: hardware concurrency)");
  b.seed = sub->add_option("--seed", o.seed, "master seed; realization r uses seed + r");
  if (kind != ExperimentKind::DefectStudy)
    b.sector = sub->add_option("--sector", o.sector, "full | constrained");
  if (kind != ExperimentKind::Basis) {
    b.states = sub->add_option("--state", o.states,
                               "initial state(s), comma separated: z2, z2shift, z3, zero, "
                               "z2defect-up[@site], z2defect-down[@site]");
    b.w = sub->add_option("--w", o.w, "disorder strength(s): a list a,b,c or a range start:stop:step");
    b.realizations = sub->add_option("--realizations", o.realizations, "disorder realizations R");
  }
  if (kind == ExperimentKind::Evolve || kind == ExperimentKind::DisorderSweep ||
      kind == ExperimentKind::DefectStudy) {
    b.tmax = sub->add_option("--tmax", o.tmax, "final time (default 30)");
    b.dt = sub->add_option("--dt", o.dt, "output spacing (default 0.05)");
    b.t_exclude = sub->add_option("--t-exclude", o.t_exclude, "revival window starts after this time (default 1)");
    b.krylov_dim = sub->add_option("--krylov-dim", o.krylov_dim, "Lanczos subspace dimension (default 30)");
    b.krylov_tol = sub->add_option("--krylov-tol", o.krylov_tol, "per-step error tolerance (default 1e-10)");
  }
  if (kind == ExperimentKind::EntropyScan) b.cut = sub->add_option("--cut", o.cut, "bipartition cut (default N/2)");
  if (kind == ExperimentKind::Evolve) {
    b.trajectory = sub->add_flag("--trajectory", o.trajectory, "also write binary trajectory_<state>.bin");
    b.dump_operator = sub->add_flag("--dump-operator", o.dump_operator, "write hamiltonian.coo");
    b.dump_disorder = sub->add_flag("--dump-disorder", o.dump_disorder, "write disorder.json");
  }
  return b;
}

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

ExperimentConfig assemble_config(ExperimentKind kind, const CliOptions& o, const BoundOptions& b) {
  ExperimentConfig c;
  c.kind = kind;
  c.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (kind == ExperimentKind::DisorderSweep) c.realizations = 10;
  if (given(b.config_file)) {
    json j;
    try {
      j = json::parse(read_file(o.config_file));
    } catch (const json::exception& e) {
      throw ConfigError("config", o.config_file + ": " + e.what());
    }
    if (j.is_object() && j.contains("experiment") && parse_experiment_kind(j["experiment"].get<std::string>()) != kind)
      throw ConfigError("experiment", "config file is for '" + j["experiment"].get<std::string>() + "'");
    const int threads = c.threads;
    const int realizations = c.realizations;
    c = config_from_json(j);
    c.kind = kind;
    if (!j.contains("threads")) c.threads = threads;
    if (!j.contains("realizations")) c.realizations = realizations;
  }
  try {
    if (given(b.n)) c.n_sites = o.n;
    if (given(b.bc)) c.boundary = parse_boundary(o.bc);
  } catch (const Error& e) {
    throw ConfigError("bc", e.what());
  }
  try {
    if (given(b.sector)) c.sector = parse_sector(o.sector);
  } catch (const Error& e) {
    throw ConfigError("sector", e.what());
  }
  if (given(b.states)) c.states = parse_state_list(o.states);
  if (given(b.w)) c.strengths = parse_strength_list(o.w);
  if (given(b.realizations)) c.realizations = o.realizations;
  if (given(b.seed)) c.master_seed = o.seed;
  if (given(b.tmax)) c.grid.t_max = o.tmax;
  if (given(b.dt)) c.grid.dt = o.dt;
  if (given(b.t_exclude)) c.t_exclude = o.t_exclude;
  if (given(b.krylov_dim)) c.krylov.krylov_dim = o.krylov_dim;
  if (given(b.krylov_tol)) c.krylov.tol = o.krylov_tol;
  if (given(b.cut)) c.cut = o.cut;
  if (given(b.threads)) c.threads = o.threads;
  if (given(b.out)) c.output_dir = o.out;
  if (given(b.trajectory)) c.write_trajectory = o.trajectory;
  if (given(b.dump_operator)) c.dump_operator = o.dump_operator;
  if (given(b.dump_disorder)) c.dump_disorder = o.dump_disorder;

  if (const char* env = std::getenv("SCARLAB_SEED"); env != nullptr && *env != '\0')
    c.master_seed = parse_u64(env, "SCARLAB_SEED");
  return c;
}

constexpr const char* kFooter =
    "Exit status:\n"
    "  0  success\n"
    "  2  invalid configuration or command line\n"
    "  3  I/O failure (reading config/manifest, writing outputs)\n"
    "  4  computation failure (e.g. Krylov non-convergence)\n"
    "  5  verify: recomputed outputs differ from the manifest\n"
    "Environment:\n"
    "  SCARLAB_SEED  overrides the master seed of any experiment\n";

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"scarlab: PXP chain dynamics, disorder sweeps and eigenstate entanglement"};
  app.footer(kFooter);
  app.require_subcommand(1);

  struct Sub {
    ExperimentKind kind;
    CLI::App* app;
    CliOptions opts;
    BoundOptions bound;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add = [&](ExperimentKind kind, const std::string& help) {
    auto s = std::make_unique<Sub>();
    s->kind = kind;
    s->app = app.add_subcommand(std::string(to_string(kind)), help);
    s->bound = add_options(s->app, s->opts, kind);
    subs.push_back(std::move(s));
  };
  add(ExperimentKind::Basis, "enumerate a basis and write basis.csv");
  add(ExperimentKind::Evolve, "quench from named states; fidelity and ZZ correlation vs time");
  add(ExperimentKind::DisorderSweep, "revival peak statistics over disorder strengths and realizations");
  add(ExperimentKind::EntropyScan, "eigenstate energy vs half-chain entropy in the constrained sector");
  add(ExperimentKind::DefectStudy, "Z2, single-flip defect states and the frozen-region reduction");
  std::string manifest_path, scratch;
  auto* verify = app.add_subcommand("verify", "recompute a run from its manifest and compare digests");
  verify->add_option("manifest", manifest_path, "path to manifest.json")->required();
  verify->add_option("--scratch", scratch, "directory for recomputed files (default: a temporary directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    const int rc = app.exit(e, o, x);
    out << o.str();
    err << x.str();
    return rc == 0 ? exit_code::ok : exit_code::config;
  }

  std::string stage = "config";
  try {
    if (verify->parsed()) {
      const bool own_scratch = scratch.empty();
      const fs::path dir = own_scratch ? fs::temp_directory_path() /
                                             ("scarlab-verify-" + std::to_string(std::hash<std::string>{}(
                                                                      fs::absolute(manifest_path).string())))
                                       : fs::path(scratch);
      if (own_scratch) fs::remove_all(dir);
      stage = "verify";
      const auto report = verify_manifest(manifest_path, dir);
      if (own_scratch) fs::remove_all(dir);
      for (const auto& f : report.matched) out << "match    " << f << "\n";
      for (const auto& f : report.mismatched) out << "MISMATCH " << f << "\n";
      if (!report.ok()) {
        err << "scarlab: verify: " << report.mismatched.size() << " file(s) differ\n";
        return exit_code::verify_mismatch;
      }
      return exit_code::ok;
    }
    for (const auto& s : subs) {
      if (!s->app->parsed()) continue;
      const auto config = assemble_config(s->kind, s->opts, s->bound);
      validate(config);
      stage = "compute";
      const auto report = run(config);
      for (const auto& f : report.files) out << (config.output_dir / f).string() << "\n";
      out << (config.output_dir / "manifest.json").string() << "\n";
    }
    return exit_code::ok;
  } catch (const ConfigError& e) {
    err << "scarlab: " << stage << ": invalid configuration: " << e.what() << "\n";
    return exit_code::config;
  } catch (const IoError& e) {
    err << "scarlab: " << stage << ": I/O error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const fs::filesystem_error& e) {
    err << "scarlab: " << stage << ": I/O error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const std::exception& e) {
    err << "scarlab: " << stage << ": " << e.what() << "\n";
    return exit_code::computation;
  }
}

}  // namespace scarlab
