#include "lrmc/types.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "lrmc/errors.hpp"

namespace lrmc {

IndexSet::IndexSet(std::vector<Coord> entries, Index rows, Index cols)
    : entries_(std::move(entries)), rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0)
    throw InvalidShapeError("IndexSet: shape must be positive");
  for (const Coord& c : entries_) {
    if (c.row >= static_cast<std::uint32_t>(rows) ||
        c.col >= static_cast<std::uint32_t>(cols))
      throw InvalidShapeError("IndexSet: entry out of bounds");
  }
  std::sort(entries_.begin(), entries_.end());
  entries_.erase(std::unique(entries_.begin(), entries_.end()),
                 entries_.end());
  build_column_order();
}

IndexSet IndexSet::all(Index rows, Index cols) {
  std::vector<Coord> entries;
  entries.reserve(static_cast<std::size_t>(rows) *
                  static_cast<std::size_t>(cols));
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      entries.push_back({static_cast<std::uint32_t>(i),
                         static_cast<std::uint32_t>(j)});
  return from_sorted_unique(std::move(entries), rows, cols);
}

IndexSet IndexSet::from_sorted_unique(std::vector<Coord> entries, Index rows,
                                      Index cols) {
  IndexSet s;
  s.entries_ = std::move(entries);
  s.rows_ = rows;
  s.cols_ = cols;
  assert(std::is_sorted(s.entries_.begin(), s.entries_.end()));
  assert(std::adjacent_find(s.entries_.begin(), s.entries_.end()) ==
         s.entries_.end());
  s.build_column_order();
  return s;
}

void IndexSet::build_column_order() {
  // Counting sort by column; row order within a column follows from the
  // row-major order of entries_.
  const std::size_t m = entries_.size();
  column_order_.assign(m, 0);
  if (m == 0) return;
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(cols_) + 1, 0);
  for (const Coord& c : entries_) ++counts[c.col + 1];
  for (std::size_t j = 1; j < counts.size(); ++j) counts[j] += counts[j - 1];
  for (std::size_t e = 0; e < m; ++e)
    column_order_[counts[entries_[e].col]++] = static_cast<std::uint32_t>(e);
}

bool IndexSet::contains(Coord c) const {
  return std::binary_search(entries_.begin(), entries_.end(), c);
}

MaskedMatrix::MaskedMatrix(std::shared_ptr<const IndexSet> support,
                           Vector values)
    : support_(std::move(support)), values_(std::move(values)) {
  if (!support_) throw InvalidShapeError("MaskedMatrix: null support");
  if (static_cast<std::size_t>(values_.size()) != support_->size())
    throw InvalidShapeError("MaskedMatrix: value count != support size");
}

MaskedMatrix MaskedMatrix::zeros(std::shared_ptr<const IndexSet> support) {
  const auto n = static_cast<Index>(support->size());
  return MaskedMatrix(std::move(support), Vector::Zero(n));
}

std::size_t MaskedMatrix::nonzero_count() const {
  std::size_t n = 0;
  for (Index i = 0; i < values_.size(); ++i)
    if (values_[i] != 0.0) ++n;
  return n;
}

DenseMatrix MaskedMatrix::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(rows(), cols());
  const auto& entries = support_->entries();
  for (std::size_t e = 0; e < entries.size(); ++e)
    out(entries[e].row, entries[e].col) = values_[static_cast<Index>(e)];
  return out;
}

SparseEstimate SparseEstimate::empty(Index rows, Index cols) {
  return {IndexSet::from_sorted_unique({}, rows, cols), Vector()};
}

SparseEstimate SparseEstimate::from_masked(const MaskedMatrix& m) {
  std::vector<Coord> coords;
  std::vector<double> vals;
  const auto& entries = m.support().entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const double v = m.values()[static_cast<Index>(e)];
    if (v != 0.0) {
      coords.push_back(entries[e]);
      vals.push_back(v);
    }
  }
  SparseEstimate out;
  out.support =
      IndexSet::from_sorted_unique(std::move(coords), m.rows(), m.cols());
  out.values = Eigen::Map<const Vector>(vals.data(),
                                        static_cast<Index>(vals.size()));
  return out;
}

DenseMatrix SparseEstimate::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(rows(), cols());
  const auto& entries = support.entries();
  for (std::size_t e = 0; e < entries.size(); ++e)
    out(entries[e].row, entries[e].col) = values[static_cast<Index>(e)];
  return out;
}

}  // namespace lrmc
