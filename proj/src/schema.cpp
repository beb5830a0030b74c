#include "pfair/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include "pfair/error.hpp"

namespace pfair {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::continuous: return "continuous";
  }
  return "unknown";
}

ColumnKind column_kind_from_string(std::string_view text) {
  if (text == "binary") return ColumnKind::binary;
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "continuous") return ColumnKind::continuous;
  throw Error(ErrorCode::config_error, "unknown column kind '" + std::string(text) + "'");
}

std::size_t ColumnSpec::level_count() const noexcept {
  switch (kind) {
    case ColumnKind::binary: return 2;
    case ColumnKind::categorical: return levels.size();
    case ColumnKind::continuous: return 0;
  }
  return 0;
}

std::size_t ColumnSpec::encoded_width() const noexcept {
  return kind == ColumnKind::categorical ? levels.size() : 1;
}

double ColumnSpec::level_value(std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == label) return static_cast<double>(i);
  if (kind == ColumnKind::binary) {
    if (label == "0") return 0.0;
    if (label == "1") return 1.0;
  }
  throw Error(ErrorCode::unknown_categorical_level,
              "value '" + std::string(label) + "' is not a level of column '" + name + "'");
}

double ColumnSpec::parse(std::string_view token) const {
  if (token.empty()) throw Error(ErrorCode::missing_value, "empty value in column '" + name + "'");
  std::string_view t = token;
  if (auto it = collapse.find(std::string(token)); it != collapse.end()) {
    t = it->second;
  } else if (discrete() && std::find(levels.begin(), levels.end(), token) == levels.end()) {
    if (auto any = collapse.find("*"); any != collapse.end()) t = any->second;
  }

  switch (kind) {
    case ColumnKind::continuous: {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::unparseable_value,
                    "'" + std::string(token) + "' is not a number (column '" + name + "')");
      }
      return v;
    }
    case ColumnKind::binary:
      try {
        return level_value(t);
      } catch (const Error&) {
        throw Error(ErrorCode::unparseable_value,
                    "'" + std::string(token) + "' is not a binary value (column '" + name + "')");
      }
    case ColumnKind::categorical: return level_value(t);
  }
  return 0.0;
}

std::string format_number(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string ColumnSpec::format(double value) const {
  if (kind == ColumnKind::continuous) return format_number(value);
  const auto idx = static_cast<std::size_t>(value);
  if (idx < levels.size()) return levels[idx];
  return idx == 0 ? "0" : "1";
}

bool ColumnSpec::admits(double value) const noexcept {
  if (!std::isfinite(value)) return false;
  if (kind == ColumnKind::continuous) return true;
  if (value != std::floor(value) || value < 0) return false;
  return static_cast<std::size_t>(value) < level_count();
}

ColumnSpec binary_column(std::string name, std::vector<std::string> labels) {
  return ColumnSpec{std::move(name), ColumnKind::binary, std::move(labels), {}};
}

ColumnSpec categorical_column(std::string name, std::vector<std::string> levels) {
  return ColumnSpec{std::move(name), ColumnKind::categorical, std::move(levels), {}};
}

ColumnSpec continuous_column(std::string name) {
  return ColumnSpec{std::move(name), ColumnKind::continuous, {}, {}};
}

std::size_t VariableSpec::encoded_width() const noexcept {
  std::size_t w = 0;
  for (const auto& c : columns) w += c.encoded_width();
  return w;
}

Schema::Schema(std::vector<VariableSpec> variables) : variables_(std::move(variables)) {
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    node_index_.emplace(variables_[v].node, v);
    std::vector<std::size_t> cols;
    for (std::size_t ci = 0; ci < variables_[v].columns.size(); ++ci) {
      const auto& c = variables_[v].columns[ci];
      cols.push_back(columns_.size());
      column_index_.emplace(c.name, columns_.size());
      columns_.emplace_back(v, ci);
      column_names_.push_back(c.name);
    }
    node_columns_.push_back(std::move(cols));
  }
}

const VariableSpec& Schema::variable(const std::string& node) const {
  auto it = node_index_.find(node);
  if (it == node_index_.end()) throw Error(ErrorCode::unknown_node, "node '" + node + "' has no schema entry");
  return variables_[it->second];
}

std::size_t Schema::column_index(const std::string& column) const {
  auto it = column_index_.find(column);
  if (it == column_index_.end()) throw Error(ErrorCode::missing_column, "column '" + column + "' is not in the schema");
  return it->second;
}

const std::vector<std::size_t>& Schema::node_columns(const std::string& node) const {
  auto it = node_index_.find(node);
  if (it == node_index_.end()) throw Error(ErrorCode::unknown_node, "node '" + node + "' has no schema entry");
  return node_columns_[it->second];
}

std::vector<std::string> Schema::validate() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> nodes, cols;
  for (const auto& v : variables_) {
    if (!nodes.insert(v.node).second) out.push_back("node '" + v.node + "' declared twice in schema");
    if (v.columns.empty()) out.push_back("node '" + v.node + "' has no columns");
    for (const auto& c : v.columns) {
      if (!cols.insert(c.name).second) out.push_back("column '" + c.name + "' declared twice");
      if (c.kind == ColumnKind::categorical && c.levels.empty())
        out.push_back("categorical column '" + c.name + "' has no levels");
      if (c.kind == ColumnKind::binary && c.levels.size() != 2)
        out.push_back("binary column '" + c.name + "' needs exactly two labels");
      std::unordered_set<std::string> lv(c.levels.begin(), c.levels.end());
      if (lv.size() != c.levels.size()) out.push_back("column '" + c.name + "' repeats a level");
      for (const auto& [raw, level] : c.collapse) {
        if (c.kind != ColumnKind::continuous && !lv.contains(level))
          out.push_back("collapse target '" + level + "' of column '" + c.name + "' is not a level");
      }
    }
  }
  return out;
}

void encode_values(const VariableSpec& var, std::span<const double> raw, std::span<double> out) {
  if (raw.size() != var.columns.size() || out.size() != var.encoded_width())
    throw Error(ErrorCode::arity_mismatch, "encoding shape mismatch for node '" + var.node + "'");
  std::size_t pos = 0;
  for (std::size_t c = 0; c < var.columns.size(); ++c) {
    const auto& col = var.columns[c];
    if (col.kind == ColumnKind::categorical) {
      const std::size_t k = col.levels.size();
      std::fill(out.begin() + pos, out.begin() + pos + k, 0.0);
      const auto idx = static_cast<std::size_t>(raw[c]);
      if (idx < k) out[pos + idx] = 1.0;
      pos += k;
    } else {
      out[pos++] = raw[c];
    }
  }
}

std::vector<double> encode_values(const VariableSpec& var, std::span<const double> raw) {
  std::vector<double> out(var.encoded_width());
  encode_values(var, raw, out);
  return out;
}

std::vector<std::string> encoded_names(const VariableSpec& var) {
  std::vector<std::string> out;
  for (const auto& col : var.columns) {
    if (col.kind == ColumnKind::categorical) {
      for (const auto& l : col.levels) out.push_back(col.name + "=" + l);
    } else {
      out.push_back(col.name);
    }
  }
  return out;
}

}  // namespace pfair
