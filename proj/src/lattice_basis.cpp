#include "scarlab/lattice_basis.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "scarlab/errors.hpp"

namespace scarlab {

namespace {

// Largest sector we are willing to materialise.
constexpr std::uint64_t kMaxDimension = std::uint64_t{1} << 30;

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Number of blockade-allowed strings: Fibonacci for OBC, Lucas for PBC.
std::uint64_t constrained_count(int n, Boundary boundary) {
  auto obc = [](int len) -> std::uint64_t {
    if (len <= 0) return 1;
    std::uint64_t end0 = 1, end1 = 1;
    for (int k = 2; k <= len; ++k) {
      const std::uint64_t n0 = end0 + end1;
      end1 = end0;
      end0 = n0;
    }
    return end0 + end1;
  };
  if (boundary == Boundary::Open) return obc(n);
  // first site down: any OBC string on n-1 sites; first site up: sites 2 and
  // n are forced down, leaving an OBC string on n-3 sites.
  return obc(n - 1) + obc(n - 3);
}

void enumerate_constrained(int n, Boundary boundary, std::vector<Bits>& out) {
  // Depth-first from the most significant site, 0 before 1, which yields
  // configurations in increasing numeric order.
  const Bits top = site_mask(n);
  const Bits bottom = site_mask(1);
  auto recurse = [&](auto&& self, int site, Bits bits) -> void {
    if (site == 0) {
      if (boundary == Boundary::Periodic && (bits & top) && (bits & bottom)) return;
      out.push_back(bits);
      return;
    }
    self(self, site - 1, bits);
    const bool upper_excited = site < n && (bits & site_mask(site + 1));
    if (!upper_excited) self(self, site - 1, bits | site_mask(site));
  };
  recurse(recurse, n, Bits{0});
}

}  // namespace

std::string_view to_string(Boundary b) { return b == Boundary::Open ? "obc" : "pbc"; }

std::string_view to_string(Sector s) {
  return s == Sector::Full ? "full" : "constrained";
}

Boundary parse_boundary(std::string_view text) {
  const auto t = lower(text);
  if (t == "obc" || t == "open") return Boundary::Open;
  if (t == "pbc" || t == "periodic") return Boundary::Periodic;
  throw ParameterError("unknown boundary condition '" + std::string(text) + "'");
}

Sector parse_sector(std::string_view text) {
  const auto t = lower(text);
  if (t == "full") return Sector::Full;
  if (t == "constrained") return Sector::Constrained;
  throw ParameterError("unknown sector '" + std::string(text) + "'");
}

std::string SpinConfiguration::pattern() const {
  std::string s(static_cast<std::size_t>(n_sites), '.');
  for (int site = 1; site <= n_sites; ++site)
    if (excited(site)) s[static_cast<std::size_t>(site - 1)] = '*';
  return s;
}

std::string SpinConfiguration::bitstring() const {
  std::string s(static_cast<std::size_t>(n_sites), '0');
  for (int site = 1; site <= n_sites; ++site)
    if (excited(site)) s[static_cast<std::size_t>(n_sites - site)] = '1';
  return s;
}

bool blockade_allowed(Bits bits, int n_sites, Boundary boundary) {
  if ((bits & (bits >> 1)) != 0) return false;
  if (boundary == Boundary::Periodic && (bits & site_mask(1)) && (bits & site_mask(n_sites)))
    return false;
  return true;
}

BasisMap::BasisMap(int n_sites, Boundary boundary, Sector sector)
    : n_sites_(n_sites), boundary_(boundary), sector_(sector) {
  if (n_sites < 2 || n_sites > kMaxSites)
    throw SizeError("n_sites must lie in [2, 64], got " + std::to_string(n_sites));

  if (sector == Sector::Full) {
    if (n_sites > 30)
      throw SizeError("full sector with " + std::to_string(n_sites) + " sites is too large");
    const Bits dim = Bits{1} << n_sites;
    configs_.resize(dim);
    for (Bits b = 0; b < dim; ++b) configs_[b] = b;
    return;
  }

  const auto count = constrained_count(n_sites, boundary);
  if (count > kMaxDimension)
    throw SizeError("constrained sector with " + std::to_string(count) + " states is too large");
  configs_.reserve(count);
  enumerate_constrained(n_sites, boundary, configs_);
  index_.reserve(configs_.size());
  for (std::size_t k = 0; k < configs_.size(); ++k)
    index_.emplace(configs_[k], static_cast<std::uint32_t>(k));
}

std::optional<std::size_t> BasisMap::find(Bits bits) const {
  if (sector_ == Sector::Full) {
    if (bits > low_mask(n_sites_)) return std::nullopt;
    return static_cast<std::size_t>(bits);
  }
  const auto it = index_.find(bits);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t BasisMap::index_of(Bits bits) const {
  if (auto k = find(bits)) return *k;
  throw SectorError("configuration " + SpinConfiguration{bits & low_mask(n_sites_), n_sites_}.pattern() +
                    " is not in the " + describe() + " basis");
}

std::string BasisMap::describe() const {
  std::ostringstream os;
  os << "N=" << n_sites_ << ' ' << to_string(boundary_) << ' ' << to_string(sector_);
  return os.str();
}

BasisPtr enumerate_basis(int n_sites, Boundary boundary, Sector sector) {
  return std::make_shared<const BasisMap>(n_sites, boundary, sector);
}

void require_same_space(const BasisMap& a, const BasisMap& b, std::string_view context) {
  if (!a.same_space(b))
    throw BasisMismatchError(std::string(context) + ": basis " + a.describe() +
                             " does not match " + b.describe());
}

std::complex<double> inner(const StateVector& a, const StateVector& b) {
  require_same_space(*a.basis, *b.basis, "inner product");
  return a.amplitudes.dot(b.amplitudes);  // Eigen's dot conjugates the left operand
}

std::string_view to_string(StateLabel label) {
  switch (label) {
    case StateLabel::Z2: return "z2";
    case StateLabel::Z2Shift: return "z2shift";
    case StateLabel::Z3: return "z3";
    case StateLabel::AllDown: return "zero";
    case StateLabel::Z2DefectUp: return "z2defect-up";
    case StateLabel::Z2DefectDown: return "z2defect-down";
  }
  return "?";
}

StateLabel parse_state_label(std::string_view text) {
  const auto t = lower(text);
  if (t == "z2") return StateLabel::Z2;
  if (t == "z2shift" || t == "z2-shift") return StateLabel::Z2Shift;
  if (t == "z3") return StateLabel::Z3;
  if (t == "zero" || t == "alldown" || t == "all-down" || t == "0") return StateLabel::AllDown;
  if (t == "z2defect-up" || t == "z2p" || t == "z2defectup") return StateLabel::Z2DefectUp;
  if (t == "z2defect-down" || t == "z2pp" || t == "z2defectdown") return StateLabel::Z2DefectDown;
  throw ParameterError("unknown state label '" + std::string(text) + "'");
}

std::optional<int> default_defect_site(StateLabel label, int n_sites) {
  if (label != StateLabel::Z2DefectUp && label != StateLabel::Z2DefectDown) return std::nullopt;
  const int mid = n_sites / 2;
  // Z2 has odd sites up; the up-flip needs an even site, the down-flip an odd one.
  const bool want_even = label == StateLabel::Z2DefectUp;
  const bool mid_even = mid % 2 == 0;
  int site = mid_even == want_even ? mid : mid + 1;
  if (site > n_sites) site = mid - 1;
  return site;
}

Bits named_configuration(const NamedState& state, int n_sites, Boundary boundary) {
  if (n_sites < 2 || n_sites > kMaxSites)
    throw SizeError("n_sites must lie in [2, 64], got " + std::to_string(n_sites));

  const bool periodic = boundary == Boundary::Periodic;
  auto density_wave = [&](int period, int offset) {
    Bits bits = 0;
    for (int site = 1 + offset; site <= n_sites; site += period) bits |= site_mask(site);
    return bits;
  };
  auto require_even_ring = [&](std::string_view what) {
    if (periodic && n_sites % 2 != 0)
      throw IncompatibleStateError(std::string(what) + " needs an even number of sites on a ring, got " +
                                   std::to_string(n_sites));
  };

  switch (state.label) {
    case StateLabel::AllDown:
      return 0;
    case StateLabel::Z2:
      require_even_ring("z2");
      return density_wave(2, 0);
    case StateLabel::Z2Shift:
      require_even_ring("z2shift");
      return density_wave(2, 1);
    case StateLabel::Z3:
      if (periodic && n_sites % 3 != 0)
        throw IncompatibleStateError("z3 needs N divisible by 3 on a ring, got " + std::to_string(n_sites));
      return density_wave(3, 0);
    case StateLabel::Z2DefectUp:
    case StateLabel::Z2DefectDown: {
      const bool up = state.label == StateLabel::Z2DefectUp;
      if (n_sites % 2 != 0)
        throw IncompatibleStateError("defect states need an even number of sites, got " +
                                     std::to_string(n_sites));
      const int site = state.defect_site.value_or(*default_defect_site(state.label, n_sites));
      if (site < 1 || site > n_sites)
        throw IncompatibleStateError("defect site " + std::to_string(site) + " outside 1.." +
                                     std::to_string(n_sites));
      const Bits z2 = density_wave(2, 0);
      const bool site_up = (z2 & site_mask(site)) != 0;
      if (up && site_up)
        throw IncompatibleStateError("z2defect-up must flip a down site; site " +
                                     std::to_string(site) + " is excited in z2");
      if (!up && !site_up)
        throw IncompatibleStateError("z2defect-down must flip an excited site; site " +
                                     std::to_string(site) + " is down in z2");
      return z2 ^ site_mask(site);
    }
  }
  throw ParameterError("unhandled state label");
}

StateVector basis_state(const BasisPtr& basis, Bits bits) {
  StateVector psi{basis, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size()))};
  psi.amplitudes[static_cast<Eigen::Index>(basis->index_of(bits))] = 1.0;
  return psi;
}

StateVector make_state(const NamedState& state, const BasisPtr& basis) {
  if (state.label == StateLabel::Z2DefectUp && basis->sector() == Sector::Constrained)
    throw SectorError("z2defect-up leaves the constrained subspace; use the full basis");
  const Bits bits = named_configuration(state, basis->n_sites(), basis->boundary());
  if (!basis->contains(bits))
    throw IncompatibleStateError(std::string(to_string(state.label)) + " is not representable in the " +
                                 basis->describe() + " basis");
  return basis_state(basis, bits);
}

}  // namespace scarlab
