#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

namespace lrmc {

/// Dense matrices are stored row-major to match the on-disk layout and the
/// row-wise factor access pattern of the masked kernels.
using DenseMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// One observed position.
struct Coord {
  std::uint32_t row;
  std::uint32_t col;

  friend bool operator==(const Coord& a, const Coord& b) {
    return a.row == b.row && a.col == b.col;
  }
  /// Row-major order; this is the canonical entry order everywhere.
  friend bool operator<(const Coord& a, const Coord& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  }
};

/// Sorted, deduplicated set of in-bounds positions (the observation set).
///
/// Entries are kept in row-major order. A column-sorted permutation of the
/// entry indices is precomputed so column-wise kernels can walk the same
/// storage in (col, row) order.
class IndexSet {
 public:
  IndexSet() : rows_(0), cols_(0) {}

  /// Sorts, deduplicates, and bounds-checks `entries`.
  IndexSet(std::vector<Coord> entries, Index rows, Index cols);

  /// All rows*cols positions (the p = 1 mask).
  static IndexSet all(Index rows, Index cols);

  /// Trusted constructor: `entries` must already be sorted row-major,
  /// unique, and in bounds (checked only in debug builds).
  static IndexSet from_sorted_unique(std::vector<Coord> entries, Index rows,
                                     Index cols);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Coord>& entries() const { return entries_; }
  const Coord& operator[](std::size_t i) const { return entries_[i]; }

  /// Entry indices permuted to (col, row) order.
  const std::vector<std::uint32_t>& column_order() const {
    return column_order_;
  }

  bool contains(Coord c) const;

  friend bool operator==(const IndexSet& a, const IndexSet& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ &&
           a.entries_ == b.entries_;
  }

 private:
  void build_column_order();

  std::vector<Coord> entries_;
  std::vector<std::uint32_t> column_order_;
  Index rows_;
  Index cols_;
};

/// A matrix known only on a support set: the projection Pi_Omega(M).
///
/// Stores one value per support entry, aligned with the support's row-major
/// entry order; positions off the support are zero. Stored values may
/// themselves be zero (the support is the observation set, not the nonzero
/// set). The support is shared so same-support matrices are cheap to derive.
class MaskedMatrix {
 public:
  MaskedMatrix() = default;
  MaskedMatrix(std::shared_ptr<const IndexSet> support, Vector values);

  static MaskedMatrix zeros(std::shared_ptr<const IndexSet> support);

  Index rows() const { return support_->rows(); }
  Index cols() const { return support_->cols(); }
  const IndexSet& support() const { return *support_; }
  const std::shared_ptr<const IndexSet>& support_ptr() const {
    return support_;
  }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  std::size_t nonzero_count() const;

  /// Zero-filled dense copy. For small instances and test oracles.
  DenseMatrix to_dense() const;

 private:
  std::shared_ptr<const IndexSet> support_;
  Vector values_;
};

/// Sparse matrix given by its own (typically small) support and values.
struct SparseEstimate {
  IndexSet support;
  Vector values;

  Index rows() const { return support.rows(); }
  Index cols() const { return support.cols(); }
  std::size_t size() const { return support.size(); }

  static SparseEstimate empty(Index rows, Index cols);

  /// The nonzero entries of a masked matrix.
  static SparseEstimate from_masked(const MaskedMatrix& m);

  DenseMatrix to_dense() const;
};

/// Rank-r singular triple: U (n1 x r), sigma (r, nonincreasing), V (n2 x r).
struct SVDTriple {
  DenseMatrix U;
  Vector sigma;
  DenseMatrix V;
};

}  // namespace lrmc
