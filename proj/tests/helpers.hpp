#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "fdr/dataset.hpp"
#include "fdr/matrix.hpp"
#include "fdr/model.hpp"
#include "fdr/rng.hpp"

namespace testutil {

inline fdr::Matrix make_matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  fdr::Matrix m(rows, cols);
  m.data() = std::move(values);
  return m;
}

/// n x 2 probability matrix from the positive-class column.
inline fdr::Matrix probs_from_positive(const std::vector<double>& p1) {
  fdr::Matrix m(p1.size(), 2);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    m(i, 0) = 1.0 - p1[i];
    m(i, 1) = p1[i];
  }
  return m;
}

inline fdr::GroupedDataset make_ds(fdr::Matrix features, std::vector<std::uint8_t> labels,
                                   std::vector<std::uint8_t> attrs) {
  fdr::GroupedDataset ds;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.attributes = std::move(attrs);
  ds.name = "test";
  return ds;
}

/// Random batch with every (y, a) group populated.
inline fdr::GroupedDataset random_batch(fdr::Rng& rng, std::size_t n, std::size_t d) {
  fdr::GroupedDataset ds;
  ds.name = "random";
  ds.features = fdr::Matrix(n, d);
  for (auto& v : ds.features.data()) v = rng.normal();
  ds.labels.resize(n);
  ds.attributes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = i < 4 ? static_cast<int>(i) : static_cast<int>(rng.below(4));
    ds.labels[i] = static_cast<std::uint8_t>(g >> 1);
    ds.attributes[i] = static_cast<std::uint8_t>(g & 1);
  }
  return ds;
}

}  // namespace testutil
