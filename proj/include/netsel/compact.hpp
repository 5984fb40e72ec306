#pragma once

#include <netsel/matkit.hpp>

#include <vector>

namespace netsel {

/// A PSD matrix that is zero outside the rows/columns listed in `indices`.
/// Per-feature information matrices touch only the frames where the feature
/// is visible, so storing them compactly keeps full-scale candidate sets
/// small.
struct CompactInfo {
  std::vector<Index> indices;  ///< sorted, unique
  Mat block;                   ///< |indices| x |indices|

  static CompactInfo from_dense(const Mat& m) {
    CompactInfo c;
    for (Index i = 0; i < m.rows(); ++i) c.indices.push_back(i);
    c.block = symmetrized(m);
    return c;
  }

  bool empty() const { return indices.empty(); }

  Mat dense(Index n) const {
    Mat out = Mat::Zero(n, n);
    add_to(out);
    return out;
  }

  void add_to(Mat& h, double scale = 1.0) const {
    const auto k = static_cast<Index>(indices.size());
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) h(indices[a], indices[b]) += scale * block(a, b);
  }

  /// Tr(S K) where S is the principal submatrix of `m` on `indices`.
  double trace_with(const Mat& m) const {
    double acc = 0.0;
    const auto k = static_cast<Index>(indices.size());
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) acc += m(indices[b], indices[a]) * block(a, b);
    return acc;
  }

  Mat gather(const Mat& m) const {
    const auto k = static_cast<Index>(indices.size());
    Mat s(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) s(a, b) = m(indices[a], indices[b]);
    return s;
  }

  Mat gather_cols(const Mat& m) const {
    Mat s(m.rows(), static_cast<Index>(indices.size()));
    for (std::size_t a = 0; a < indices.size(); ++a) s.col(static_cast<Index>(a)) = m.col(indices[a]);
    return s;
  }
};

}  // namespace netsel
