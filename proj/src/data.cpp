#include "debias/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "debias/errors.hpp"
#include "debias/random.hpp"

namespace debias {

namespace {

std::string cell_name(int y, int z) {
  return "(y=" + std::to_string(y) + ", z=" + std::to_string(z) + ")";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (features.rows() != n) throw DataError("feature rows do not match label count");
  if (num_classes < 2) throw DataError("num_classes must be >= 2");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " out of range");
    }
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  if (groups) {
    if (groups->size() != n) throw DataError("group column length does not match labels");
    std::vector<std::size_t> seen(static_cast<std::size_t>(std::max(num_groups, 0)), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int z = (*groups)[i];
      if (z < 0 || z >= num_groups) {
        throw DataError("group " + std::to_string(z) + " at row " + std::to_string(i) +
                        " out of range");
      }
      ++seen[static_cast<std::size_t>(z)];
    }
    for (std::size_t z = 0; z < seen.size(); ++z) {
      if (seen[z] == 0) throw DataError("group " + std::to_string(z) + " never appears");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  if (groups) {
    std::vector<int> z;
    z.reserve(indices.size());
    for (std::size_t i : indices) z.push_back((*groups)[i]);
    out.groups = std::move(z);
  }
  out.num_classes = num_classes;
  out.num_groups = num_groups;
  out.provenance = provenance;
  return out;
}

void SyntheticSpec::validate() const {
  if (samples == 0) throw ConfigError("synthetic: samples must be >= 1");
  if (num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
  if (!(correlation >= 0.5 && correlation <= 1.0)) {
    throw ConfigError("synthetic: correlation must lie in [0.5, 1.0]");
  }
  if (task_dims == 0 || demographic_dims == 0) {
    throw ConfigError("synthetic: signal dimensions must be >= 1");
  }
  if (!(task_noise >= 0.0) || !(demographic_noise >= 0.0)) {
    throw ConfigError("synthetic: noise levels must be >= 0");
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_int_distribution<int> label_dist(0, spec.num_classes - 1);
  std::bernoulli_distribution aligned_dist(spec.correlation);
  std::normal_distribution<double> task_noise(0.0, spec.task_noise);
  std::normal_distribution<double> dem_noise(0.0, spec.demographic_noise);

  const std::size_t d = spec.task_dims + spec.demographic_dims;
  const int k = spec.num_classes;
  Dataset ds;
  ds.features = Matrix(spec.samples, d);
  ds.labels.resize(spec.samples);
  std::vector<int> groups(spec.samples);
  ds.num_classes = k;
  ds.num_groups = 2;
  ds.provenance = Provenance::synthetic;

  for (std::size_t i = 0; i < spec.samples; ++i) {
    const int y = label_dist(rng);
    const int aligned = aligned_group(y);
    const int z = aligned_dist(rng) ? aligned : 1 - aligned;
    ds.labels[i] = y;
    groups[i] = z;

    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < spec.task_dims; ++j) {
      double centroid = 0.0;
      if (spec.task_dims == 1) {
        centroid = (y - (k - 1) / 2.0) * spec.task_separation;
        if (k == 2) centroid *= 2.0;  // +-separation for the binary task
      } else if (j < 2) {
        const double angle = 2.0 * std::numbers::pi * y / k;
        centroid = spec.task_separation * (j == 0 ? std::cos(angle) : std::sin(angle));
      }
      row[j] = centroid + task_noise(rng);
    }
    const double sign = z == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < spec.demographic_dims; ++j) {
      row[spec.task_dims + j] = sign * spec.demographic_separation + dem_noise(rng);
    }
  }
  ds.groups = std::move(groups);
  return ds;
}

void SplitSpec::validate() const {
  if (train < 0.0 || val < 0.0 || test < 0.0) throw ConfigError("split fractions must be >= 0");
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.train));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.val));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DataError("dataset of " + std::to_string(n) + " samples is too small for the split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, stream::kSplit));
  std::shuffle(order.begin(), order.end(), rng);

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

DataSplits split(const Dataset& ds, const SplitSpec& spec) {
  DataSplits out;
  out.indices = split_indices(ds.size(), spec);
  out.train = ds.subset(out.indices.train);
  Dataset val = ds.subset(out.indices.val);
  Dataset test = ds.subset(out.indices.test);
  if (spec.balance_eval) {
    if (!ds.has_groups()) throw DataError("balanced evaluation splits need a group column");
    const auto keep_val = balanced_indices(val, derive_seed(spec.seed, stream::kBalance, 0));
    const auto keep_test = balanced_indices(test, derive_seed(spec.seed, stream::kBalance, 1));
    std::vector<std::size_t> val_src, test_src;
    for (std::size_t i : keep_val) val_src.push_back(out.indices.val[i]);
    for (std::size_t i : keep_test) test_src.push_back(out.indices.test[i]);
    out.indices.val = std::move(val_src);
    out.indices.test = std::move(test_src);
    val = val.subset(keep_val);
    test = test.subset(keep_test);
  }
  out.val = std::move(val);
  out.test = std::move(test);
  return out;
}

std::vector<std::vector<std::size_t>> cell_counts(const Dataset& ds) {
  if (!ds.has_groups()) throw DataError("cell counts need a group column");
  std::vector<std::vector<std::size_t>> counts(
      static_cast<std::size_t>(ds.num_classes),
      std::vector<std::size_t>(static_cast<std::size_t>(ds.num_groups), 0));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++counts[static_cast<std::size_t>(ds.labels[i])][static_cast<std::size_t>(ds.group(i))];
  }
  return counts;
}

std::vector<std::size_t> balanced_indices(const Dataset& ds, std::uint64_t seed) {
  if (!ds.has_groups()) throw DataError("balance_by_group needs a group column");
  const auto classes = static_cast<std::size_t>(ds.num_classes);
  const auto groups = static_cast<std::size_t>(ds.num_groups);
  std::vector<std::vector<std::size_t>> cells(classes * groups);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    cells[static_cast<std::size_t>(ds.labels[i]) * groups + static_cast<std::size_t>(ds.group(i))]
        .push_back(i);
  }
  std::size_t target = ds.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].empty()) {
      throw DataError("cannot balance: empty cell " +
                      cell_name(static_cast<int>(c / groups), static_cast<int>(c % groups)));
    }
    target = std::min(target, cells[c].size());
  }
  Rng rng(seed);
  std::vector<std::size_t> keep;
  keep.reserve(target * cells.size());
  for (auto& cell : cells) {
    if (cell.size() > target) std::shuffle(cell.begin(), cell.end(), rng);
    keep.insert(keep.end(), cell.begin(), cell.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

Dataset balance_by_group(const Dataset& ds, std::uint64_t seed) {
  const auto keep = balanced_indices(ds, seed);
  return ds.subset(keep);
}

std::vector<double> group_share_per_class(const Dataset& ds, int group) {
  const auto counts = cell_counts(ds);
  std::vector<double> share;
  for (const auto& row : counts) {
    const std::size_t total = std::accumulate(row.begin(), row.end(), std::size_t{0});
    share.push_back(total == 0 ? std::nan("")
                               : static_cast<double>(row[static_cast<std::size_t>(group)]) /
                                     static_cast<double>(total));
  }
  return share;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void save_tabular(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << 'y';
  if (ds.has_groups()) out << ",z";
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features.row(i)) out << format_double(v) << ',';
    out << ds.labels[i];
    if (ds.has_groups()) out << ',' << ds.group(i);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string where = path.string();

  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError(where + ": empty file (no header)");
  std::vector<std::string> header;
  for (auto f : split_fields(header_line)) header.emplace_back(f);

  auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };

  const auto label_col = find_column(schema.label_column);
  if (!label_col) throw DataError(where + ": missing label column '" + schema.label_column + "'");
  std::optional<std::size_t> attr_col;
  if (schema.attribute_column) {
    attr_col = find_column(*schema.attribute_column);
    if (!attr_col && schema.attribute_required) {
      throw DataError(where + ": missing attribute column '" + *schema.attribute_column + "'");
    }
  }
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != *label_col && (!attr_col || c != *attr_col)) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      const auto c = find_column(name);
      if (!c) throw DataError(where + ": missing feature column '" + name + "'");
      feature_cols.push_back(*c);
    }
  }
  if (feature_cols.empty()) throw DataError(where + ": no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<int> groups;
  std::string line;
  std::size_t line_no = 1;
  auto fail = [&](std::size_t col, const std::string& what) -> DataError {
    return DataError(where + ": line " + std::to_string(line_no) + ", column '" + header[col] +
                     "': " + what);
  };
  auto parse_int = [&](std::string_view text, std::size_t col) {
    int v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      throw fail(col, "expected an integer, got '" + std::string(text) + "'");
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(where + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      const auto text = fields[c];
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw fail(c, "non-numeric value '" + std::string(text) + "'");
      }
      if (!std::isfinite(v)) throw fail(c, "non-finite value");
      values.push_back(v);
    }
    const int y = parse_int(fields[*label_col], *label_col);
    if (y < 0 || (schema.num_classes && y >= *schema.num_classes)) {
      throw fail(*label_col, "unknown label " + std::to_string(y));
    }
    labels.push_back(y);
    if (attr_col) {
      const int z = parse_int(fields[*attr_col], *attr_col);
      if (z < 0 || (schema.num_groups && z >= *schema.num_groups)) {
        throw fail(*attr_col, "unknown attribute value " + std::to_string(z));
      }
      groups.push_back(z);
    }
  }
  if (labels.empty()) throw DataError(where + ": no data rows (empty dataset)");

  Dataset ds;
  ds.features = Matrix(labels.size(), feature_cols.size());
  std::copy(values.begin(), values.end(), ds.features.values().begin());
  ds.num_classes = schema.num_classes.value_or(
      std::max(2, *std::max_element(labels.begin(), labels.end()) + 1));
  if (attr_col) {
    ds.num_groups = schema.num_groups.value_or(
        std::max(2, *std::max_element(groups.begin(), groups.end()) + 1));
    ds.groups = std::move(groups);
  }
  ds.labels = std::move(labels);
  ds.provenance = Provenance::ingested;
  ds.validate();
  return ds;
}

}  // namespace debias
