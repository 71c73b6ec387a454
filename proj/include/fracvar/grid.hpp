#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fracvar/errors.hpp"

namespace fracvar {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniform mesh t_k = a + k h on [a, b], k = 0..n_cells.
class Grid {
 public:
  Grid(double a, double b, std::size_t n_cells) : a_(a), b_(b), n_cells_(n_cells) {
    if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
      throw DomainError("Grid: need finite a < b");
    }
    if (n_cells < 2) throw DomainError("Grid: n_cells must be at least 2");
    h_ = (b - a) / static_cast<double>(n_cells);
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  std::size_t n_cells() const noexcept { return n_cells_; }
  std::size_t n_nodes() const noexcept { return n_cells_ + 1; }
  double step() const noexcept { return h_; }

  /// Node k; the last node is exactly b.
  double node(std::size_t k) const noexcept {
    return k == n_cells_ ? b_ : a_ + static_cast<double>(k) * h_;
  }
  double midpoint(std::size_t m) const noexcept { return a_ + (static_cast<double>(m) + 0.5) * h_; }

  /// Index of the node equal to t (within 1e-9 of a step), or -1.
  long node_index(double t) const noexcept {
    const double r = (t - a_) / h_;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 || k < 0.0 || k > static_cast<double>(n_cells_)) return -1;
    return static_cast<long>(k);
  }

  friend bool operator==(const Grid& l, const Grid& r) noexcept {
    return l.a_ == r.a_ && l.b_ == r.b_ && l.n_cells_ == r.n_cells_;
  }

 private:
  double a_;
  double b_;
  std::size_t n_cells_;
  double h_ = 0.0;
};

/// Vector-valued samples on a grid, one row per node.
///
/// Integral operators read row m as the value on the cell [t_m, t_{m+1})
/// (piecewise-constant, left value); the last row is the value at b and is
/// ignored by cell quadratures.
class GridFn {
 public:
  GridFn(const Grid& grid, std::size_t dim) : grid_(grid), values_(RowMat::Zero(grid.n_nodes(), dim)) {
    if (dim == 0) throw DimensionError("GridFn: dim must be positive");
  }

  GridFn(const Grid& grid, RowMat values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != static_cast<Eigen::Index>(grid_.n_nodes())) {
      throw DimensionError("GridFn: row count " + std::to_string(values_.rows()) + " != node count " +
                           std::to_string(grid_.n_nodes()));
    }
    if (values_.cols() == 0) throw DimensionError("GridFn: dim must be positive");
    if (!values_.allFinite()) throw DomainError("GridFn: non-finite entry");
  }

  /// Samples f at every node.
  static GridFn sample(const Grid& grid, std::size_t dim, const std::function<Vec(double)>& f) {
    RowMat v(grid.n_nodes(), dim);
    for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
      const Vec fk = f(grid.node(k));
      if (fk.size() != static_cast<Eigen::Index>(dim)) throw DimensionError("GridFn::sample: wrong dim");
      v.row(k) = fk.transpose();
    }
    return GridFn(grid, std::move(v));
  }

  static GridFn constant(const Grid& grid, const Vec& c) {
    RowMat v(grid.n_nodes(), c.size());
    v.rowwise() = c.transpose();
    return GridFn(grid, std::move(v));
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }

  const RowMat& values() const noexcept { return values_; }
  RowMat& values() noexcept { return values_; }

  double operator()(std::size_t k, std::size_t i) const { return values_(k, i); }
  double& operator()(std::size_t k, std::size_t i) { return values_(k, i); }

  Vec row(std::size_t k) const { return values_.row(k).transpose(); }
  void set_row(std::size_t k, const Vec& v) { values_.row(k) = v.transpose(); }

  /// Value of the piecewise-constant reading on cell m (row m).
  Vec cell(std::size_t m) const { return values_.row(m).transpose(); }

  double sup_norm() const { return values_.cwiseAbs().maxCoeff(); }

  /// Discrete L1 norm of the piecewise-constant reading.
  double l1_norm() const {
    double s = 0.0;
    for (std::size_t m = 0; m < grid_.n_cells(); ++m) s += values_.row(m).cwiseAbs().sum();
    return s * grid_.step();
  }

  GridFn& operator+=(const GridFn& o) {
    check_same(o);
    values_ += o.values_;
    return *this;
  }
  GridFn& operator-=(const GridFn& o) {
    check_same(o);
    values_ -= o.values_;
    return *this;
  }
  GridFn& operator*=(double s) {
    values_ *= s;
    return *this;
  }

  friend GridFn operator+(GridFn l, const GridFn& r) { return l += r; }
  friend GridFn operator-(GridFn l, const GridFn& r) { return l -= r; }
  friend GridFn operator*(double s, GridFn f) { return f *= s; }

  void check_same(const GridFn& o) const {
    if (!(grid_ == o.grid_)) throw DimensionError("GridFn: grid mismatch");
    if (dim() != o.dim()) throw DimensionError("GridFn: dim mismatch");
  }

 private:
  Grid grid_;
  RowMat values_;
};

}  // namespace fracvar
