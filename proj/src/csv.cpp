#include "pfair/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "pfair/error.hpp"

namespace pfair {

namespace {

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::string quote_if_needed(const std::string& s, char delimiter) {
  if (s.find(delimiter) == std::string::npos && s.find('"') == std::string::npos &&
      s.find('\n') == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

Dataset read_csv(std::istream& in, const Schema& schema, const CsvOptions& options) {
  std::string line;
  for (std::size_t i = 0; i < options.skip_lines && std::getline(in, line); ++i) {
  }

  std::vector<std::string> header;
  if (options.header) {
    while (std::getline(in, line) && blank(line)) {
    }
    if (!in && line.empty()) throw Error(ErrorCode::empty_dataset, "file has no header row");
    header = split_csv_line(line, options.delimiter);
    if (options.trim)
      for (auto& h : header) h = trim_copy(h);
  } else {
    header = options.column_names;
  }

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);

  const std::size_t ncols = schema.column_count();
  std::vector<std::size_t> source(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    auto it = position.find(schema.column(c).name);
    if (it == position.end())
      throw Error(ErrorCode::missing_column, "column '" + schema.column(c).name + "' not found in header");
    source[c] = it->second;
  }

  std::vector<std::vector<double>> columns(ncols);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    auto fields = split_csv_line(line, options.delimiter);
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto& spec = schema.column(c);
      if (source[c] >= fields.size()) {
        throw Error(ErrorCode::missing_value,
                    "row " + std::to_string(row + 1) + " has no field for column '" + spec.name + "'");
      }
      std::string token = options.trim ? trim_copy(fields[source[c]]) : fields[source[c]];
      try {
        columns[c].push_back(spec.parse(token));
      } catch (const Error& e) {
        throw Error(e.code(), "row " + std::to_string(row + 1) + ", column '" + spec.name + "': " + e.detail());
      }
    }
    ++row;
  }
  if (row == 0) throw Error(ErrorCode::empty_dataset, "no data rows");
  return Dataset(schema, std::move(columns), options.target);
}

Dataset ingest_csv(const std::filesystem::path& path, const Schema& schema, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  return read_csv(in, schema, options);
}

void write_csv(const Dataset& dataset, std::ostream& out, char delimiter) {
  const auto& schema = dataset.schema();
  for (std::size_t c = 0; c < schema.column_count(); ++c) {
    if (c) out << delimiter;
    out << quote_if_needed(schema.column(c).name, delimiter);
  }
  out << '\n';
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    for (std::size_t c = 0; c < schema.column_count(); ++c) {
      if (c) out << delimiter;
      out << quote_if_needed(schema.column(c).format(dataset.value(r, c)), delimiter);
    }
    out << '\n';
  }
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  write_csv(dataset, out, delimiter);
}

}  // namespace pfair
