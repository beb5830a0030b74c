#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pfair/dataset.hpp"

namespace pfair {

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
  // Used when the file carries no header row.
  std::vector<std::string> column_names;
  // Strip surrounding whitespace from each field.
  bool trim = true;
  // Lines to drop before the header or first record.
  std::size_t skip_lines = 0;
  std::optional<std::string> target;
};

// Parses and kind-checks every schema column. Columns in the file that the
// schema does not mention are ignored. Throws missing-column,
// unparseable-value(row, column), unknown-categorical-level, missing-value,
// empty-dataset or io-error.
Dataset ingest_csv(const std::filesystem::path& path, const Schema& schema,
                   const CsvOptions& options = {});
Dataset read_csv(std::istream& in, const Schema& schema, const CsvOptions& options = {});

// Header plus one line per row; levels are written by label and continuous
// values with round-trip precision.
void write_csv(const Dataset& dataset, std::ostream& out, char delimiter = ',');
void write_csv(const Dataset& dataset, const std::filesystem::path& path, char delimiter = ',');

// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line, char delimiter);

}  // namespace pfair
