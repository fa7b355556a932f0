#include <doctest.h>

#include <random>
#include <unordered_map>

#include "oracle.hpp"
#include "scarlab/errors.hpp"
#include "scarlab/observables.hpp"
#include "scarlab/spectral.hpp"

using namespace scarlab;

namespace {

StateVector random_state(const BasisPtr& basis, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  StateVector psi{basis, Eigen::VectorXcd(static_cast<Eigen::Index>(basis->size()))};
  for (Eigen::Index k = 0; k < psi.amplitudes.size(); ++k) psi.amplitudes[k] = {g(rng), g(rng)};
  psi.amplitudes.normalize();
  return psi;
}

Eigen::VectorXcd embed_full(const StateVector& psi) {
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(Eigen::Index{1} << psi.basis->n_sites());
  for (std::size_t k = 0; k < psi.basis->size(); ++k)
    full[static_cast<Eigen::Index>(psi.basis->config(k))] = psi.amplitudes[static_cast<Eigen::Index>(k)];
  return full;
}

}  // namespace

TEST_CASE("fidelity bounds") {
  const auto basis = enumerate_basis(10, Boundary::Periodic, Sector::Constrained);
  const auto z2 = make_state({StateLabel::Z2, {}}, basis);
  CHECK(fidelity(z2, z2) == doctest::Approx(1.0));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double f = fidelity(z2, random_state(basis, s));
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
  CHECK(fidelity(z2, make_state({StateLabel::Z2Shift, {}}, basis)) == 0.0);
}

TEST_CASE("ZZ correlation of named states") {
  for (auto sector : {Sector::Full, Sector::Constrained}) {
    const auto ring = enumerate_basis(12, Boundary::Periodic, sector);
    CHECK(avg_zz_correlation(make_state({StateLabel::AllDown, {}}, ring)) == doctest::Approx(1.0));
    CHECK(avg_zz_correlation(make_state({StateLabel::Z2, {}}, ring)) == doctest::Approx(-1.0));
    CHECK(avg_zz_correlation(make_state({StateLabel::Z3, {}}, ring)) == doctest::Approx(-1.0 / 3.0));
  }
  const auto chain = enumerate_basis(7, Boundary::Open, Sector::Constrained);
  CHECK(avg_zz_correlation(make_state({StateLabel::Z2, {}}, chain)) == doctest::Approx(-1.0));
  // *..*.. on an open chain: -1 +1 -1 -1 +1 over five bonds
  CHECK(bond_average_zz(0b001001, 6, Boundary::Open) == doctest::Approx(-0.2));
}

TEST_CASE("ZZ diagonal table agrees with the direct sum") {
  const auto basis = enumerate_basis(10, Boundary::Open, Sector::Full);
  const auto d = zz_diagonal(*basis);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto psi = random_state(basis, s);
    CHECK(avg_zz_correlation(psi, d) == doctest::Approx(avg_zz_correlation(psi)).epsilon(1e-13));
  }
}

TEST_CASE("entropy of simple states") {
  const auto basis = enumerate_basis(8, Boundary::Periodic, Sector::Constrained);
  for (int cut = 1; cut < 8; ++cut) CHECK(entanglement_entropy(make_state({StateLabel::Z2, {}}, basis), cut) < 1e-14);
  // (|*.> + |.*>)/sqrt2 on two sites
  const auto two = enumerate_basis(2, Boundary::Open, Sector::Constrained);
  StateVector bell{two, Eigen::VectorXcd::Zero(3)};
  bell.amplitudes[static_cast<Eigen::Index>(two->index_of(0b01))] = M_SQRT1_2;
  bell.amplitudes[static_cast<Eigen::Index>(two->index_of(0b10))] = M_SQRT1_2;
  CHECK(entanglement_entropy(bell, 1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("entropy matches the full-embedding oracle") {
  for (auto bc : {Boundary::Open, Boundary::Periodic})
    for (int n = 4; n <= 10; n += 3) {
      const auto basis = enumerate_basis(n, bc, Sector::Constrained);
      const auto psi = random_state(basis, static_cast<std::uint64_t>(n));
      const auto full = embed_full(psi);
      for (int cut = 1; cut < n; ++cut) {
        CAPTURE(n);
        CAPTURE(cut);
        CHECK(std::abs(entanglement_entropy(psi, cut) - oracle::entropy(full, n, cut)) < 1e-10);
      }
    }
}

TEST_CASE("entropy cut symmetry for translation-invariant states") {
  const int n = 10;
  const auto basis = enumerate_basis(n, Boundary::Periodic, Sector::Constrained);
  auto rotate = [&](Bits b) { return ((b << 1) | (b >> (n - 1))) & low_mask(n); };
  for (std::uint64_t seed : {1u, 2u}) {
    // amplitude depends only on the translation orbit of the configuration
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::unordered_map<Bits, Complex> orbit_value;
    StateVector psi{basis, Eigen::VectorXcd(static_cast<Eigen::Index>(basis->size()))};
    for (std::size_t k = 0; k < basis->size(); ++k) {
      Bits rep = basis->config(k), b = rep;
      for (int s = 0; s < n; ++s) rep = std::min(rep, b = rotate(b));
      auto it = orbit_value.find(rep);
      if (it == orbit_value.end()) it = orbit_value.emplace(rep, Complex(g(rng), g(rng))).first;
      psi.amplitudes[static_cast<Eigen::Index>(k)] = it->second;
    }
    psi.amplitudes.normalize();
    for (int cut = 1; cut < n; ++cut)
      CHECK(std::abs(entanglement_entropy(psi, cut) - entanglement_entropy(psi, n - cut)) < 1e-10);
  }
}

TEST_CASE("entropy cut range") {
  const auto basis = enumerate_basis(6, Boundary::Open, Sector::Full);
  const auto psi = make_state({StateLabel::Z2, {}}, basis);
  CHECK_THROWS_AS(entanglement_entropy(psi, 0), ParameterError);
  CHECK_THROWS_AS(entanglement_entropy(psi, 6), ParameterError);
}

TEST_CASE("overlap spectrum") {
  const auto basis = enumerate_basis(10, Boundary::Periodic, Sector::Constrained);
  const auto eig = diagonalize(build_pxp(basis));
  const auto spec = overlap_spectrum(eig, make_state({StateLabel::Z2, {}}, basis));
  double total = 0.0;
  for (double p : spec.overlaps) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec.participation_ratio() >= 1.0);
  CHECK(overlap_spectrum(eig, eig.state(3)).participation_ratio() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fidelity series from a trajectory") {
  const auto basis = enumerate_basis(8, Boundary::Periodic, Sector::Constrained);
  const auto psi0 = make_state({StateLabel::Z2, {}}, basis);
  const auto traj = evolve_krylov(build_pxp(basis), psi0, TimeGrid{5.0, 0.5}.points());
  const auto f = fidelity_series(traj, psi0);
  REQUIRE(f.values.size() == 11);
  CHECK(f.values[0] == doctest::Approx(1.0));
}
