#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pfair/schema.hpp"

namespace pfair {

// Column-major typed table. Values are stored per ColumnSpec conventions
// (binary 0/1, categorical level index, continuous raw).
class Dataset {
 public:
  Dataset() = default;
  // Throws length-mismatch or kind-mismatch when a column breaks its spec.
  Dataset(Schema schema, std::vector<std::vector<double>> columns,
          std::optional<std::string> target = std::nullopt);

  const Schema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_ == 0; }
  const std::optional<std::string>& target() const noexcept { return target_; }
  // Node owning the target column.
  std::optional<std::string> target_node() const;

  std::span<const double> column(std::size_t index) const { return columns_[index]; }
  std::span<const double> column(const std::string& name) const;
  double value(std::size_t row, std::size_t column) const { return columns_[column][row]; }

  // Raw per-column values of one node for one row.
  std::vector<double> node_values(const std::string& node, std::size_t row) const;
  void node_values(const std::vector<std::size_t>& columns, std::size_t row, std::span<double> out) const;
  std::vector<double> row(std::size_t row) const;

  Dataset select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Dataset& other) const;

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::size_t rows_ = 0;
  std::optional<std::string> target_;
};

struct FractionSplit {
  double train_fraction = 0.5;
};
struct CountSplit {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::string> warnings;
};

// Shuffled partition under seed. Throws counts-exceed-n.
SplitResult split(const Dataset& dataset, const std::variant<FractionSplit, CountSplit>& how,
                  std::uint64_t seed);

}  // namespace pfair
