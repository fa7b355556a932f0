#include "scarlab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scarlab/digest.hpp"
#include "scarlab/errors.hpp"

namespace scarlab {

namespace {

struct Entry {
  std::uint32_t col;
  Complex value;
};

// Builds one CSR row at a time. `row_fn(bits, emit)` calls emit(col_bits, value)
// for every contribution <bits|O|col_bits>; duplicates are summed in emission
// order and exact zeros dropped.
template <typename RowFn>
OperatorMatrix assemble(const BasisPtr& basis, RowFn&& row_fn) {
  const auto configs = basis->configs();
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> cols;
  std::vector<Complex> values;
  offsets.reserve(configs.size() + 1);
  offsets.push_back(0);

  std::vector<Entry> row;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    row.clear();
    row_fn(configs[k], [&](Bits col_bits, Complex v) {
      row.push_back({static_cast<std::uint32_t>(basis->index_of(col_bits)), v});
    });
    std::stable_sort(row.begin(), row.end(),
                     [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (std::size_t i = 0; i < row.size();) {
      Complex sum = row[i].value;
      std::size_t j = i + 1;
      for (; j < row.size() && row[j].col == row[i].col; ++j) sum += row[j].value;
      if (sum != Complex{}) {
        cols.push_back(row[i].col);
        values.push_back(sum);
      }
      i = j;
    }
    offsets.push_back(values.size());
  }
  return OperatorMatrix(basis, std::move(offsets), std::move(cols), std::move(values));
}

// Neighbour projector test for site i: true when every neighbour that
// appears in the PXP term for i is in the ground state.
struct NeighbourRule {
  int n;
  bool periodic;

  bool neighbours_down(Bits bits, int site) const {
    Bits mask = 0;
    if (periodic) {
      mask |= site_mask(site == 1 ? n : site - 1);
      mask |= site_mask(site == n ? 1 : site + 1);
    } else {
      if (site > 1) mask |= site_mask(site - 1);
      if (site < n) mask |= site_mask(site + 1);
    }
    return (bits & mask) == 0;
  }
};

void check_fields(const BasisMap& basis, const DisorderRealization& fields) {
  if (fields.n_sites != basis.n_sites() ||
      fields.fields.size() != static_cast<std::size_t>(basis.n_sites()))
    throw SizeError("disorder realization has " + std::to_string(fields.n_sites) +
                    " sites but the basis has " + std::to_string(basis.n_sites()));
}

// Contributions of hX X_i + hY Y_i + hZ Z_i for row `bits`.
template <typename Emit>
void emit_single_site(Bits bits, int site, const FieldTriple& h, Complex& diagonal, Emit&& emit) {
  const bool up = (bits & site_mask(site)) != 0;
  // <*|Y|.> = -i, <.|Y|*> = +i
  const Complex y_elem = up ? Complex{0.0, -h.y} : Complex{0.0, h.y};
  emit(bits ^ site_mask(site), Complex{h.x, 0.0} + y_elem);
  diagonal += up ? h.z : -h.z;
}

}  // namespace

OperatorMatrix::OperatorMatrix(BasisPtr basis, std::vector<std::size_t> row_offsets,
                               std::vector<std::uint32_t> cols, std::vector<Complex> values)
    : basis_(std::move(basis)),
      row_offsets_(std::move(row_offsets)),
      cols_(std::move(cols)),
      values_(std::move(values)) {
  if (!basis_) throw ParameterError("operator without a basis");
  if (row_offsets_.size() != basis_->size() + 1)
    throw SizeError("operator row count does not match basis dimension");
  if (cols_.size() != values_.size() || row_offsets_.back() != values_.size())
    throw SizeError("inconsistent CSR arrays");
}

OperatorMatrix OperatorMatrix::zero(BasisPtr basis) {
  std::vector<std::size_t> offsets(basis->size() + 1, 0);
  return OperatorMatrix(std::move(basis), std::move(offsets), {}, {});
}

Complex OperatorMatrix::entry(std::size_t row, std::size_t col) const {
  const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_.at(row));
  const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_.at(row + 1));
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(col));
  if (it == end || *it != col) return {};
  return values_[static_cast<std::size_t>(it - cols_.begin())];
}

void OperatorMatrix::apply(std::span<const Complex> x, std::span<Complex> y) const {
  const std::size_t n = dim();
  if (x.size() != n || y.size() != n) throw SizeError("operator/vector dimension mismatch");
  const Complex* val = values_.data();
  const std::uint32_t* col = cols_.data();
  // Plain real arithmetic: std::complex multiplication carries inf/nan
  // recovery that dominates the cost of this loop.
  for (std::size_t r = 0; r < n; ++r) {
    double re = 0.0, im = 0.0;
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const Complex v = val[k];
      const Complex u = x[col[k]];
      re += v.real() * u.real() - v.imag() * u.imag();
      im += v.real() * u.imag() + v.imag() * u.real();
    }
    y[r] = {re, im};
  }
}

Eigen::VectorXcd OperatorMatrix::apply(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd y(x.size());
  apply(std::span<const Complex>(x.data(), static_cast<std::size_t>(x.size())),
        std::span<Complex>(y.data(), static_cast<std::size_t>(y.size())));
  return y;
}

Eigen::MatrixXcd OperatorMatrix::to_dense() const {
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t r = 0; r < dim(); ++r)
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      m(static_cast<Eigen::Index>(r), cols_[k]) = values_[k];
  return m;
}

Complex OperatorMatrix::trace() const {
  Complex t{};
  for (std::size_t r = 0; r < dim(); ++r) t += entry(r, r);
  return t;
}

double OperatorMatrix::hermiticity_defect() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < dim(); ++r)
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      worst = std::max(worst, std::abs(values_[k] - std::conj(entry(cols_[k], r))));
  return worst;
}

std::uint64_t OperatorMatrix::digest() const {
  Fnv1a h;
  h.value(basis_->n_sites()).value(static_cast<int>(basis_->boundary()))
      .value(static_cast<int>(basis_->sector()));
  h.values(row_offsets()).values(cols()).values(values());
  return h.get();
}

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_same_space(*a.basis_, *b.basis_, "operator sum");
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> cols;
  std::vector<Complex> values;
  offsets.reserve(a.dim() + 1);
  offsets.push_back(0);
  cols.reserve(std::max(a.nnz(), b.nnz()));
  values.reserve(std::max(a.nnz(), b.nnz()));
  auto push = [&](std::uint32_t c, Complex v) {
    if (v != Complex{}) {
      cols.push_back(c);
      values.push_back(v);
    }
  };
  for (std::size_t r = 0; r < a.dim(); ++r) {
    std::size_t i = a.row_offsets_[r], ie = a.row_offsets_[r + 1];
    std::size_t j = b.row_offsets_[r], je = b.row_offsets_[r + 1];
    while (i < ie || j < je) {
      if (j == je || (i < ie && a.cols_[i] < b.cols_[j])) {
        push(a.cols_[i], a.values_[i]);
        ++i;
      } else if (i == ie || b.cols_[j] < a.cols_[i]) {
        push(b.cols_[j], b.values_[j]);
        ++j;
      } else {
        push(a.cols_[i], a.values_[i] + b.values_[j]);
        ++i;
        ++j;
      }
    }
    offsets.push_back(values.size());
  }
  return OperatorMatrix(a.basis_, std::move(offsets), std::move(cols), std::move(values));
}

DisorderRealization sample_disorder(int n_sites, double strength, std::uint64_t seed) {
  if (!(strength >= 0.0) || !std::isfinite(strength))
    throw ParameterError("disorder strength W must be finite and >= 0");
  if (n_sites < 1) throw SizeError("disorder needs at least one site");
  DisorderRealization out{n_sites, strength, seed,
                          std::vector<FieldTriple>(static_cast<std::size_t>(n_sites))};
  if (strength == 0.0) return out;

  std::mt19937_64 engine(seed);
  auto draw = [&] {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    return strength * (u - 0.5);
  };
  for (auto& f : out.fields) {
    f.x = draw();
    f.y = draw();
    f.z = draw();
  }
  return out;
}

OperatorMatrix build_pxp(const BasisPtr& basis) {
  const NeighbourRule rule{basis->n_sites(), basis->boundary() == Boundary::Periodic};
  return assemble(basis, [&](Bits bits, auto&& emit) {
    for (int site = 1; site <= rule.n; ++site)
      if (rule.neighbours_down(bits, site)) emit(bits ^ site_mask(site), Complex{1.0, 0.0});
  });
}

OperatorMatrix build_perturbation_full(const BasisPtr& basis, const DisorderRealization& fields) {
  if (basis->sector() != Sector::Full)
    throw SectorError("full-space disorder does not preserve the constrained sector; "
                      "use build_perturbation_projected");
  check_fields(*basis, fields);
  const int n = basis->n_sites();
  return assemble(basis, [&](Bits bits, auto&& emit) {
    Complex diagonal{};
    for (int site = 1; site <= n; ++site)
      emit_single_site(bits, site, fields.fields[static_cast<std::size_t>(site - 1)], diagonal, emit);
    emit(bits, diagonal);
  });
}

OperatorMatrix build_perturbation_projected(const BasisPtr& basis,
                                            const DisorderRealization& fields) {
  if (basis->sector() != Sector::Constrained)
    throw SectorError("projected disorder is defined on the constrained sector");
  check_fields(*basis, fields);
  const NeighbourRule rule{basis->n_sites(), basis->boundary() == Boundary::Periodic};
  return assemble(basis, [&](Bits bits, auto&& emit) {
    Complex diagonal{};
    for (int site = 1; site <= rule.n; ++site)
      if (rule.neighbours_down(bits, site))
        emit_single_site(bits, site, fields.fields[static_cast<std::size_t>(site - 1)], diagonal,
                         emit);
    emit(bits, diagonal);
  });
}

OperatorMatrix build_disordered_pxp(const BasisPtr& basis, const DisorderRealization& fields) {
  if (basis->sector() == Sector::Full) return build_pxp(basis) + build_perturbation_full(basis, fields);
  return build_pxp(basis) + build_perturbation_projected(basis, fields);
}

}  // namespace scarlab
