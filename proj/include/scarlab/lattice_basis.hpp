#pragma once

// Spin-chain configurations, blockade-constrained bases and the named
// product states used as quench initial states.
//
// Site convention: sites are numbered 1..N and site i lives in bit i-1, so
// site 1 is the least significant bit. A set bit means the site is excited
// (drawn as '*' in pattern strings, '.' for the ground state).

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace scarlab {

using Bits = std::uint64_t;

inline constexpr int kMaxSites = 64;

enum class Boundary { Open, Periodic };
enum class Sector { Full, Constrained };

std::string_view to_string(Boundary b);
std::string_view to_string(Sector s);
Boundary parse_boundary(std::string_view text);
Sector parse_sector(std::string_view text);

/// Bit mask with the given (1-based) site set.
constexpr Bits site_mask(int site) { return Bits{1} << (site - 1); }

/// Mask with the low `n` bits set (valid for n in 1..64).
constexpr Bits low_mask(int n) {
  return n >= 64 ? ~Bits{0} : (Bits{1} << n) - 1;
}

/// An N-site configuration. `bits < 2^N` always holds.
struct SpinConfiguration {
  Bits bits = 0;
  int n_sites = 2;

  bool excited(int site) const { return (bits & site_mask(site)) != 0; }

  /// Site 1 leftmost, '*' excited and '.' down.
  std::string pattern() const;

  /// Binary digits of `bits`, most significant (site N) first.
  std::string bitstring() const;

  friend bool operator==(const SpinConfiguration&,
                         const SpinConfiguration&) = default;
};

/// True when no two neighbouring sites are excited. Under periodic
/// boundaries the (N, 1) bond counts as a neighbour pair.
bool blockade_allowed(Bits bits, int n_sites, Boundary boundary);

/// Canonically ordered enumeration of a Hilbert-space sector. Immutable
/// after construction; share it through `BasisPtr`.
class BasisMap {
 public:
  BasisMap(int n_sites, Boundary boundary, Sector sector);

  int n_sites() const noexcept { return n_sites_; }
  Boundary boundary() const noexcept { return boundary_; }
  Sector sector() const noexcept { return sector_; }
  std::size_t size() const noexcept { return configs_.size(); }

  std::span<const Bits> configs() const noexcept { return configs_; }
  Bits config(std::size_t k) const { return configs_.at(k); }
  SpinConfiguration configuration(std::size_t k) const {
    return {configs_.at(k), n_sites_};
  }

  /// Position of `bits`, or nullopt if the configuration is not in the sector.
  std::optional<std::size_t> find(Bits bits) const;

  /// Like find() but throws SectorError on a miss.
  std::size_t index_of(Bits bits) const;

  bool contains(Bits bits) const { return find(bits).has_value(); }

  /// Same (N, boundary, sector) triple, hence the same canonical ordering.
  bool same_space(const BasisMap& other) const noexcept {
    return n_sites_ == other.n_sites_ && boundary_ == other.boundary_ &&
           sector_ == other.sector_;
  }

  std::string describe() const;

 private:
  int n_sites_;
  Boundary boundary_;
  Sector sector_;
  std::vector<Bits> configs_;
  std::unordered_map<Bits, std::uint32_t> index_;  // constrained sector only
};

using BasisPtr = std::shared_ptr<const BasisMap>;

/// Enumerate the full or blockade-constrained sector of an N-site chain.
/// Throws SizeError unless 2 <= n_sites <= 64 and the sector fits in memory.
BasisPtr enumerate_basis(int n_sites, Boundary boundary, Sector sector);

/// Amplitudes over a basis. States built by this library are unit norm.
struct StateVector {
  BasisPtr basis;
  Eigen::VectorXcd amplitudes;

  std::size_t size() const { return static_cast<std::size_t>(amplitudes.size()); }
  double norm() const { return amplitudes.norm(); }
};

/// Throws BasisMismatchError when the two bases describe different spaces.
void require_same_space(const BasisMap& a, const BasisMap& b, std::string_view context);

/// <a|b>
std::complex<double> inner(const StateVector& a, const StateVector& b);

enum class StateLabel { Z2, Z2Shift, Z3, AllDown, Z2DefectUp, Z2DefectDown };

std::string_view to_string(StateLabel label);
StateLabel parse_state_label(std::string_view text);

struct NamedState {
  StateLabel label = StateLabel::Z2;
  std::optional<int> defect_site;
};

/// floor(N/2) moved to the nearest site of the right parity: a down site
/// (even) for Z2DefectUp, an up site (odd) for Z2DefectDown. Ties go to the
/// larger site. Returns nullopt for labels without a defect.
std::optional<int> default_defect_site(StateLabel label, int n_sites);

/// Bit pattern of a named state on an N-site chain. Validates the pattern
/// against the chain length and boundary (IncompatibleStateError).
Bits named_configuration(const NamedState& state, int n_sites, Boundary boundary);

/// Product state with amplitude 1 on the named configuration.
StateVector make_state(const NamedState& state, const BasisPtr& basis);

/// Product state on an arbitrary configuration of `basis`.
StateVector basis_state(const BasisPtr& basis, Bits bits);

}  // namespace scarlab
