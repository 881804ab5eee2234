#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdr/matrix.hpp"

namespace fdr {

/// One of the four (label, attribute) cells. Fixed ordering everywhere:
/// index = 2*y + a, i.e. (0,0), (0,1), (1,0), (1,1).
struct GroupKey {
  std::uint8_t y = 0;
  std::uint8_t a = 0;

  int index() const { return 2 * y + a; }
  static GroupKey from_index(int idx) {
    return {static_cast<std::uint8_t>((idx >> 1) & 1), static_cast<std::uint8_t>(idx & 1)};
  }
  static constexpr int kCount = 4;
};

/// Feature matrix plus per-row binary label y and binary sensitive
/// attribute a. Immutable after construction by convention; nothing in the
/// library mutates a dataset it did not create.
struct GroupedDataset {
  Matrix features;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> attributes;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  int group_of(std::size_t i) const { return 2 * labels[i] + attributes[i]; }
  std::array<std::size_t, 4> group_counts() const;

  /// Throws if rows disagree, a label/attribute is not 0/1, or a feature
  /// entry is non-finite.
  void validate() const;
};

/// Parameters of the synthetic generator. Core dimensions carry the label
/// signal, spurious dimensions carry the attribute signal, noise dimensions
/// carry nothing. The (y=1, a=1) group is the minority.
struct SyntheticSpec {
  std::size_t n_total = 20000;
  std::size_t d_core = 5;
  std::size_t d_spurious = 5;
  std::size_t d_noise = 10;
  double minority_fraction = 0.01;
  double core_separation = 1.0;
  double spurious_correlation = 0.9;
  std::uint64_t seed = 0;

  std::size_t dim() const { return d_core + d_spurious + d_noise; }
  void validate() const;
};

/// Mean gap of the spurious dimensions (in units of their standard
/// deviation). Fixed rather than tied to core_separation so the attribute
/// shortcut stays easy to pick up even when the label signal is weak.
inline constexpr double kSpuriousSeparation = 4.0;

enum class FileFormat { Csv, Binary };

GroupedDataset load_dataset(const std::string& path, FileFormat format);
void save_dataset(const GroupedDataset& ds, const std::string& path, FileFormat format);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Disjoint, exhaustive train/val/test partition. Per-group (stratified) or
/// whole-pool row counts are floored, remainders go to the training split.
/// A requested split that ends up with zero rows overall is an error.
std::array<GroupedDataset, 3> split_dataset(const GroupedDataset& ds, SplitFractions fractions,
                                            std::uint64_t seed, bool stratified);

/// Samples (without replacement) an equal number of rows per (y, a) group
/// from the pooled train+val data. per_group defaults to the pooled minimum
/// group count.
GroupedDataset balanced_subsample(const GroupedDataset& train, const GroupedDataset& val,
                                  std::optional<std::size_t> per_group, std::uint64_t seed);

/// Inverse group-frequency weights (n/4)/count(g); the weighted sum of
/// per-sample weights equals n, and a balanced dataset yields all ones.
std::array<double, 4> group_weights(const GroupedDataset& ds);

/// Inverse label-frequency weights (n/2)/count(y), expanded to the four
/// groups (both attribute cells of a class share its weight). The usual
/// class-weighted cross-entropy; blind to the sensitive attribute.
std::array<double, 4> class_weights(const GroupedDataset& ds);

GroupedDataset gen_synthetic(const SyntheticSpec& spec);

/// Key-value spec file: `n_total = 20000`, `d_core = 5`, `d_spurious = 5`,
/// `d_noise = 10`, `minority_fraction = 0.01`, `core_separation = 1.0`,
/// `spurious_correlation = 0.9`, `seed = 0`. '#' starts a comment; keys are
/// optional and default as above.
SyntheticSpec parse_spec_file(const std::string& path);

/// Rows of ds at the given indices, in the given order.
GroupedDataset subset_rows(const GroupedDataset& ds, const std::vector<std::size_t>& indices,
                           std::string name);

GroupedDataset concat_rows(const GroupedDataset& a, const GroupedDataset& b, std::string name);

}  // namespace fdr
