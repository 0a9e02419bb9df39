#pragma once

// Dense complex tensors. Entries are stored row-major: the last axis varies
// fastest, so entry (i0, ..., i{r-1}) lives at sum_k i_k * stride_k with
// stride_{r-1} = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smps/errors.hpp"
#include "smps/linalg.hpp"

namespace smps {

class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  /// Rank-0 scalar holding zero.
  Tensor() : data_(1, cplx{}) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(product(shape_), cplx{});
  }

  Tensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != product(shape_)) throw DimensionError("tensor: data size does not match shape");
  }

  static Tensor from_matrix(const Matrix& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    Eigen::Map<RowMajorMatrix>(t.data_.data(), m.rows(), m.cols()) = m;
    return t;
  }

  std::size_t rank() const noexcept { return shape_.size(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const cplx> data() const noexcept { return data_; }
  std::span<cplx> data() noexcept { return data_; }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }

  cplx& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
  const cplx& at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

  Shape strides() const {
    Shape s(shape_.size(), 1);
    for (std::size_t k = shape_.size(); k-- > 1;) s[k - 1] = s[k] * shape_[k];
    return s;
  }

  Tensor reshape(Shape shape) const {
    if (product(shape) != size()) throw DimensionError("reshape: entry count changes");
    return Tensor(std::move(shape), data_);
  }

  /// Matrix with the leading `row_axes` axes fused into rows.
  Matrix to_matrix(std::size_t row_axes) const {
    if (row_axes > rank()) throw DimensionError("to_matrix: too many row axes");
    const auto rows = static_cast<Eigen::Index>(
        std::accumulate(shape_.begin(), shape_.begin() + static_cast<std::ptrdiff_t>(row_axes),
                        std::size_t{1}, std::multiplies<>()));
    const auto cols = static_cast<Eigen::Index>(size()) / rows;
    return Eigen::Map<const RowMajorMatrix>(data_.data(), rows, cols);
  }

  Tensor conj() const {
    Tensor out = *this;
    for (auto& x : out.data_) x = std::conj(x);
    return out;
  }

  double norm() const {
    double acc = 0.0;
    for (const auto& x : data_) acc += std::norm(x);
    return std::sqrt(acc);
  }

  bool is_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); });
  }

  Tensor& operator*=(cplx c) {
    for (auto& x : data_) x *= c;
    return *this;
  }
  Tensor& operator+=(const Tensor& o) {
    if (o.shape_ != shape_) throw DimensionError("tensor +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  friend Tensor operator*(cplx c, Tensor t) { return t *= c; }
  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a += (-1.0) * b; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t product(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  void check_extents() const {
    for (auto e : shape_)
      if (e == 0) throw DimensionError("tensor: extents must be positive");
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) throw DimensionError("tensor: index rank mismatch");
    std::size_t off = 0;
    std::size_t k = 0;
    for (auto i : idx) {
      if (i >= shape_[k]) throw DimensionError("tensor: index out of range");
      off = off * shape_[k++] + i;
    }
    return off;
  }

  Shape shape_;
  std::vector<cplx> data_;
};

/// Reorders axes: axis k of the result is axis order[k] of `a`.
inline Tensor permute(const Tensor& a, std::span<const std::size_t> order) {
  const std::size_t r = a.rank();
  if (order.size() != r) throw ArgumentError("permute: order has wrong length");
  std::vector<bool> seen(r, false);
  for (auto ax : order) {
    if (ax >= r || seen[ax]) throw ArgumentError("permute: order is not a permutation");
    seen[ax] = true;
  }
  Tensor::Shape shape(r);
  for (std::size_t k = 0; k < r; ++k) shape[k] = a.extent(order[k]);
  Tensor out(shape);
  if (r == 0) {
    out[0] = a[0];
    return out;
  }

  const auto src_strides = a.strides();
  Tensor::Shape step(r);
  for (std::size_t k = 0; k < r; ++k) step[k] = src_strides[order[k]];

  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  const std::size_t n = out.size();
  for (std::size_t dst = 0; dst < n; ++dst) {
    out[dst] = a[src];
    for (std::size_t k = r; k-- > 0;) {
      src += step[k];
      if (++idx[k] < shape[k]) break;
      src -= step[k] * shape[k];
      idx[k] = 0;
    }
  }
  return out;
}

inline Tensor permute(const Tensor& a, std::initializer_list<std::size_t> order) {
  return permute(a, std::span<const std::size_t>(order.begin(), order.size()));
}

using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// Sums over the paired axes. Result axes: the free axes of `a` then those of `b`,
/// each in their original order.
inline Tensor contract(const Tensor& a, const Tensor& b, const AxisPairs& pairs) {
  std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
  std::vector<std::size_t> ca, cb;
  std::size_t inner = 1;
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw DimensionError("contract: axis out of range");
    if (used_a[ia] || used_b[ib]) throw DimensionError("contract: axis paired twice");
    if (a.extent(ia) != b.extent(ib))
      throw DimensionError("contract: extent mismatch on axes (" + std::to_string(ia) + ", " +
                           std::to_string(ib) + ")");
    used_a[ia] = used_b[ib] = true;
    ca.push_back(ia);
    cb.push_back(ib);
    inner *= a.extent(ia);
  }

  std::vector<std::size_t> order_a, order_b;
  Tensor::Shape shape;
  std::size_t rows = 1, cols = 1;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!used_a[k]) {
      order_a.push_back(k);
      shape.push_back(a.extent(k));
      rows *= a.extent(k);
    }
  order_a.insert(order_a.end(), ca.begin(), ca.end());
  order_b = cb;
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!used_b[k]) {
      order_b.push_back(k);
      shape.push_back(b.extent(k));
      cols *= b.extent(k);
    }

  const Tensor pa = permute(a, order_a);
  const Tensor pb = permute(b, order_b);
  Tensor out(shape);
  using Map = Eigen::Map<const RowMajorMatrix>;
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  const auto k = static_cast<Eigen::Index>(inner);
  Eigen::Map<RowMajorMatrix>(out.data().data(), r, c).noalias() =
      Map(pa.data().data(), r, k) * Map(pb.data().data(), k, c);
  return out;
}

/// Result of a truncated factorization a ~ u * diag(s) * v.
struct SvdSplit {
  Tensor u;  ///< row axes of `a`, then the new bond axis
  std::vector<double> s;
  Tensor v;  ///< new bond axis, then the column axes of `a`
  TruncationReport report;
};

/// Factorizes `a` across the partition (row_axes | remaining axes) keeping at most
/// `max_rank` singular values; `tol` bounds the discarded weight of the normalized
/// spectrum. A zero tensor yields a degenerate report with kept == 0.
inline SvdSplit svd_truncate(const Tensor& a, std::span<const std::size_t> row_axes,
                             std::size_t max_rank, double tol) {
  if (max_rank == 0) throw ArgumentError("svd_truncate: max_rank must be positive");
  if (tol < 0.0) throw ArgumentError("svd_truncate: tol must be nonnegative");
  std::vector<bool> is_row(a.rank(), false);
  for (auto ax : row_axes) {
    if (ax >= a.rank() || is_row[ax]) throw ArgumentError("svd_truncate: invalid row axes");
    is_row[ax] = true;
  }
  std::vector<std::size_t> order(row_axes.begin(), row_axes.end());
  Tensor::Shape row_shape, col_shape;
  for (auto ax : row_axes) row_shape.push_back(a.extent(ax));
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!is_row[k]) {
      order.push_back(k);
      col_shape.push_back(a.extent(k));
    }
  if (row_shape.empty() || col_shape.empty())
    throw ArgumentError("svd_truncate: both axis groups must be nonempty");

  const Matrix m = permute(a, order).to_matrix(row_shape.size());
  SvdSplit out;
  Svd f = linalg::svd(m);
  out.report = linalg::choose_rank(f.s, max_rank, tol);

  auto u_shape = row_shape;
  auto v_shape = col_shape;
  if (out.report.degenerate) {
    u_shape.push_back(1);
    v_shape.insert(v_shape.begin(), 1);
    Tensor u(u_shape), v(v_shape);
    u[0] = 1.0;
    v[0] = 1.0;
    out.u = std::move(u);
    out.v = std::move(v);
    out.s = {0.0};
    return out;
  }
  const auto k = static_cast<Eigen::Index>(out.report.kept);
  u_shape.push_back(out.report.kept);
  v_shape.insert(v_shape.begin(), out.report.kept);
  out.u = Tensor::from_matrix(f.u.leftCols(k)).reshape(u_shape);
  out.v = Tensor::from_matrix(f.vh.topRows(k)).reshape(v_shape);
  out.s = out.report.spectrum;
  return out;
}

inline SvdSplit svd_truncate(const Tensor& a, std::initializer_list<std::size_t> row_axes,
                             std::size_t max_rank, double tol) {
  return svd_truncate(a, std::span<const std::size_t>(row_axes.begin(), row_axes.size()), max_rank,
                      tol);
}

}  // namespace smps
