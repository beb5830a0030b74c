#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pfair/audit.hpp"

namespace pfair {

struct NamedDeviation {
  std::string name;
  LinearFit fit;
  DeviationMatrix matrix;
};

// Long form: one line per fit and slot.
void write_deviation_csv(const std::vector<NamedDeviation>& fits, std::ostream& out);
void write_sweep_csv(const SweepTable& table, std::ostream& out);
void write_rates_csv(const RateTable& table, std::ostream& out);

// One tail x head panel per fit on a diverging blue-white-red scale centered
// at 0 and saturating at +/-limit. Slots pinned by the fit's constraint get a
// green outline, neutral slots deviating by at least `flag` an orange one.
std::string deviation_heatmap_svg(const std::vector<NamedDeviation>& fits, double limit = 1.0, double flag = 0.05);

// Hex colour for a value on the diverging scale.
std::string diverging_color(double value, double limit);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pfair
