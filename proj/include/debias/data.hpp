#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debias/matrix.hpp"

namespace debias {

enum class Provenance { synthetic, ingested };

struct Dataset {
  Matrix features;                          // n x d
  std::vector<int> labels;                  // y in [0, num_classes)
  std::optional<std::vector<int>> groups;   // z in [0, num_groups), when annotated
  int num_classes = 2;
  int num_groups = 2;
  Provenance provenance = Provenance::synthetic;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  bool has_groups() const { return groups.has_value(); }
  int group(std::size_t i) const { return (*groups)[i]; }

  // Full invariant check: consistent lengths, labels/groups in range, every
  // group value present, finite features.
  void validate() const;

  // Rows in the given order (duplicates allowed); the group-coverage
  // invariant is not re-checked for subsets.
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Synthetic shortcut task. Each sample draws y uniformly, then z equal to
// the class's aligned group with probability `correlation` (group 0 for even
// classes, group 1 for odd ones). Features are the task block followed by the
// demographic block:
//   task block : class centroid + N(0, task_noise^2) per dim
//   demo block : (z == 1 ? +1 : -1) * demographic_separation + N(0, demographic_noise^2)
// Class centroids sit on a circle of radius task_separation in the first two
// task dims (task_dims >= 2), or on the line (k - (K-1)/2) * task_separation
// when task_dims == 1.
struct SyntheticSpec {
  std::size_t samples = 20000;
  int num_classes = 2;
  double correlation = 0.7;
  std::size_t task_dims = 1;
  double task_separation = 1.0;
  double task_noise = 1.0;
  std::size_t demographic_dims = 1;
  double demographic_separation = 1.0;
  double demographic_noise = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Group paired with class y by the synthetic generator.
inline int aligned_group(int label) { return label % 2; }

struct SplitSpec {
  double train = 0.65;
  double val = 0.10;
  double test = 0.25;
  std::uint64_t seed = 0;
  // Subsample validation and test to equal (y, z) cell counts.
  bool balance_eval = true;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

struct DataSplits {
  Dataset train, val, test;
  SplitIndices indices;  // into the source dataset; val/test after balancing
};

// Seeded shuffle, then contiguous train/val/test slices with sizes
// round(n * fraction) for train and val and the remainder for test.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
DataSplits split(const Dataset& ds, const SplitSpec& spec);

// Indices (ascending) of a subsample with every (y, z) cell cut down to the
// smallest cell count. Throws DataError naming the first empty cell.
std::vector<std::size_t> balanced_indices(const Dataset& ds, std::uint64_t seed);
Dataset balance_by_group(const Dataset& ds, std::uint64_t seed);

// Count table indexed [y][z].
std::vector<std::vector<std::size_t>> cell_counts(const Dataset& ds);

// Share of group-1 samples within each class; NaN for empty classes.
std::vector<double> group_share_per_class(const Dataset& ds, int group = 1);

// Comma-separated text with a header row. Default columns: f0..f{d-1}, y, z.
struct TabularSchema {
  std::vector<std::string> feature_columns;  // empty: every other column
  std::string label_column = "y";
  std::optional<std::string> attribute_column = std::string("z");
  bool attribute_required = false;
  std::optional<int> num_classes;  // labels >= this are rejected
  std::optional<int> num_groups;
};

Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema = {});
void save_tabular(const Dataset& ds, const std::filesystem::path& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace debias
