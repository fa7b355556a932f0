#pragma once

// Command-line front end. An ExperimentConfig is assembled from a JSON file
// and/or flags, validated field by field, executed, and persisted as CSV data,
// one JSON sidecar per CSV and a manifest.json that is enough to recompute
// everything.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scarlab/dynamics.hpp"
#include "scarlab/errors.hpp"
#include "scarlab/lattice_basis.hpp"

namespace scarlab {

enum class ExperimentKind { Basis, Evolve, DisorderSweep, EntropyScan, DefectStudy };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view text);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int io = 3;
inline constexpr int computation = 4;
inline constexpr int verify_mismatch = 5;
}  // namespace exit_code

inline constexpr int kCliMaxSites = 24;
inline constexpr std::string_view kManifestSchema = "scarlab-manifest/1";

/// Validation failure for a single configuration field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Basis;
  int n_sites = 12;
  Boundary boundary = Boundary::Periodic;
  /// Unset means the per-experiment default (constrained for basis and
  /// entropy-scan, full for evolve).
  std::optional<Sector> sector;
  std::vector<NamedState> states;
  std::vector<double> strengths{0.0};
  int realizations = 1;
  std::uint64_t master_seed = 0;
  TimeGrid grid;
  std::optional<int> cut;
  double t_exclude = 1.0;
  KrylovOptions krylov;
  int threads = 1;
  std::filesystem::path output_dir = "scarlab-out";
  bool write_trajectory = false;
  bool dump_operator = false;
  bool dump_disorder = false;

  Sector effective_sector() const;
};

/// "start:stop:step" (stop included within half a step) or a comma list.
std::vector<double> parse_strength_list(std::string_view text);

/// Throws ConfigError naming the first field that violates a precondition.
void validate(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct RunReport {
  std::vector<std::filesystem::path> files;  // relative to output_dir
  nlohmann::json manifest;
};

/// Validates, computes and writes every artifact plus manifest.json.
RunReport run(const ExperimentConfig& config);

struct VerifyReport {
  std::vector<std::string> matched;
  std::vector<std::string> mismatched;  // includes files missing on either side
  bool ok() const { return mismatched.empty(); }
};

/// Recomputes the experiment recorded in `manifest_path` into `scratch_dir`
/// and compares file digests with the manifest.
VerifyReport verify_manifest(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& scratch_dir);

/// Full CLI: parses argv, runs and maps failures to exit_code values.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scarlab
