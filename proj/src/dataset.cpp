#include "pfair/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pfair/error.hpp"

namespace pfair {

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> columns,
                 std::optional<std::string> target)
    : schema_(std::move(schema)), columns_(std::move(columns)), target_(std::move(target)) {
  if (columns_.size() != schema_.column_count()) {
    throw Error(ErrorCode::length_mismatch, "dataset has " + std::to_string(columns_.size()) +
                                                " columns but schema declares " +
                                                std::to_string(schema_.column_count()));
  }
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& spec = schema_.column(c);
    if (columns_[c].size() != rows_)
      throw Error(ErrorCode::length_mismatch, "column '" + spec.name + "' has a different row count");
    for (std::size_t r = 0; r < rows_; ++r) {
      if (!spec.admits(columns_[c][r])) {
        throw Error(ErrorCode::kind_mismatch, "row " + std::to_string(r) + ", column '" + spec.name +
                                                  "': value is not a legal " +
                                                  std::string(to_string(spec.kind)) + " value");
      }
    }
  }
  if (target_) (void)schema_.column_index(*target_);
}

std::optional<std::string> Dataset::target_node() const {
  if (!target_) return std::nullopt;
  for (const auto& var : schema_.variables())
    for (const auto& col : var.columns)
      if (col.name == *target_) return var.node;
  return std::nullopt;
}

std::span<const double> Dataset::column(const std::string& name) const {
  return columns_[schema_.column_index(name)];
}

std::vector<double> Dataset::node_values(const std::string& node, std::size_t row) const {
  const auto& cols = schema_.node_columns(node);
  std::vector<double> out(cols.size());
  node_values(cols, row, out);
  return out;
}

void Dataset::node_values(const std::vector<std::size_t>& columns, std::size_t row,
                          std::span<double> out) const {
  for (std::size_t i = 0; i < columns.size(); ++i) out[i] = columns_[columns[i]][row];
}

std::vector<double> Dataset::row(std::size_t row) const {
  std::vector<double> out(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) out[c] = columns_[c][row];
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> cols(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    cols[c].reserve(rows.size());
    for (auto r : rows) {
      if (r >= rows_) throw Error(ErrorCode::invalid_argument, "row index out of range");
      cols[c].push_back(columns_[c][r]);
    }
  }
  return Dataset(schema_, std::move(cols), target_);
}

bool Dataset::operator==(const Dataset& other) const {
  return rows_ == other.rows_ && schema_.column_names() == other.schema_.column_names() &&
         columns_ == other.columns_;
}

SplitResult split(const Dataset& dataset, const std::variant<FractionSplit, CountSplit>& how,
                  std::uint64_t seed) {
  const std::size_t n = dataset.rows();
  std::size_t n_train = 0, n_test = 0;
  if (const auto* f = std::get_if<FractionSplit>(&how)) {
    if (!(f->train_fraction >= 0.0 && f->train_fraction <= 1.0))
      throw Error(ErrorCode::invalid_argument, "train fraction must lie in [0, 1]");
    n_train = static_cast<std::size_t>(std::llround(f->train_fraction * static_cast<double>(n)));
    n_test = n - n_train;
  } else {
    const auto& c = std::get<CountSplit>(how);
    if (c.train + c.test > n) {
      throw Error(ErrorCode::counts_exceed_n, "requested " + std::to_string(c.train) + " + " +
                                                  std::to_string(c.test) + " rows from " +
                                                  std::to_string(n));
    }
    n_train = c.train;
    n_test = c.test;
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                                perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  SplitResult out{dataset.select_rows(train), dataset.select_rows(test), {}};
  if (test.empty()) out.warnings.push_back("test split is empty");
  if (train.empty()) out.warnings.push_back("train split is empty");
  if (n_train + n_test < n)
    out.warnings.push_back(std::to_string(n - n_train - n_test) + " rows left out of both splits");
  return out;
}

}  // namespace pfair
