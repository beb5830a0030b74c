#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pfair {

enum class ColumnKind { binary, categorical, continuous };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view text);

// Stored values: binary 0/1, categorical level index, continuous as is.
struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  // binary: labels for 0 and 1 (defaults to "0","1"); categorical: levels in
  // encoding order.
  std::vector<std::string> levels;
  // Raw token -> declared level, applied before the level lookup. A "*" key
  // catches any other token that is not already a level (discrete columns).
  std::map<std::string, std::string> collapse;

  bool discrete() const noexcept { return kind != ColumnKind::continuous; }
  std::size_t level_count() const noexcept;
  std::size_t encoded_width() const noexcept;

  // Throws missing-value, unparseable-value or unknown-categorical-level.
  double parse(std::string_view token) const;
  std::string format(double value) const;
  // True when the stored value is legal for this column.
  bool admits(double value) const noexcept;
  // Stored value of a level label (binary also accepts "0"/"1").
  double level_value(std::string_view label) const;
};

// Shortest text that parses back to the same double.
std::string format_number(double value);

ColumnSpec binary_column(std::string name, std::vector<std::string> labels = {"0", "1"});
ColumnSpec categorical_column(std::string name, std::vector<std::string> levels);
ColumnSpec continuous_column(std::string name);

// One graph node mapped onto one or more columns.
struct VariableSpec {
  std::string node;
  std::vector<ColumnSpec> columns;

  std::size_t encoded_width() const noexcept;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<VariableSpec> variables);

  const std::vector<VariableSpec>& variables() const noexcept { return variables_; }
  std::size_t column_count() const noexcept { return columns_.size(); }
  const std::vector<std::string>& column_names() const noexcept { return column_names_; }

  bool has_node(const std::string& node) const { return node_index_.contains(node); }
  // Throws unknown-node.
  const VariableSpec& variable(const std::string& node) const;
  // Throws missing-column.
  std::size_t column_index(const std::string& column) const;
  const ColumnSpec& column(std::size_t index) const {
    const auto [v, c] = columns_[index];
    return variables_[v].columns[c];
  }
  const ColumnSpec& column(const std::string& name) const { return column(column_index(name)); }
  // Flat column indices belonging to a node, in declaration order.
  const std::vector<std::size_t>& node_columns(const std::string& node) const;

  std::vector<std::string> validate() const;

 private:
  std::vector<VariableSpec> variables_;
  std::vector<std::pair<std::size_t, std::size_t>> columns_;
  std::vector<std::string> column_names_;
  std::unordered_map<std::string, std::size_t> column_index_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::vector<std::vector<std::size_t>> node_columns_;
};

// One-hot for categorical, 0/1 for binary, identity for continuous.
void encode_values(const VariableSpec& var, std::span<const double> raw, std::span<double> out);
std::vector<double> encode_values(const VariableSpec& var, std::span<const double> raw);
// Names for each encoded slot, e.g. "marital=married".
std::vector<std::string> encoded_names(const VariableSpec& var);

}  // namespace pfair
