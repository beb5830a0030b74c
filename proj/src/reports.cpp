#include "pfair/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "pfair/error.hpp"

namespace pfair {

namespace {

std::string num(double v) { return format_number(v); }

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

bool pinned(const LinearFit& fit, Slot s) {
  if (fit.constraint == "nabi") return s == Slot::a_y || s == Slot::a_m;
  if (fit.constraint == "kilbertus") return s == Slot::a_y || s == Slot::m_y || s == Slot::l_y || s == Slot::m_l;
  return false;
}

}  // namespace

void write_deviation_csv(const std::vector<NamedDeviation>& fits, std::ostream& out) {
  out << "fit,slot,fitted,truth,deviation,zero_truth,neutral\n";
  for (const auto& f : fits) {
    for (const auto& c : f.matrix.cells) {
      out << quoted(f.name) << ',' << slot_name(c.slot) << ',' << num(c.fitted) << ',' << num(c.truth) << ','
          << num(c.deviation) << ',' << (c.zero_truth ? 1 : 0) << ',' << (is_neutral_slot(c.slot) ? 1 : 0) << '\n';
    }
  }
}

void write_sweep_csv(const SweepTable& table, std::ostream& out) {
  out << "threshold";
  for (const auto& p : table.policies) out << ",approval_" << quoted(p);
  out << ",always_rejected,always_accepted";
  for (const auto& g : table.groups) out << ",rejected_share_" << quoted(g);
  for (const auto& g : table.groups) out << ",accepted_share_" << quoted(g);
  out << '\n';
  for (const auto& row : table.rows) {
    out << num(row.threshold);
    for (double r : row.approval_rates) out << ',' << num(r);
    out << ',' << row.rejected << ',' << row.accepted;
    for (double s : row.rejected_shares) out << ',' << num(s);
    for (double s : row.accepted_shares) out << ',' << num(s);
    out << '\n';
  }
}

void write_rates_csv(const RateTable& table, std::ostream& out) {
  out << "policy,group,stratum,count,rate,delta_vs_" << quoted(table.baseline) << '\n';
  for (const auto& c : table.cells) {
    out << quoted(c.policy) << ',' << quoted(c.group) << ',' << quoted(c.stratum) << ',' << c.count << ','
        << num(c.rate) << ',' << num(c.delta) << '\n';
  }
}

std::string diverging_color(double value, double limit) {
  const double t = std::clamp(limit > 0.0 ? value / limit : 0.0, -1.0, 1.0);
  // White at 0, towards (178,24,43) for positive and (33,102,172) for negative.
  const int hi[3] = {178, 24, 43}, lo[3] = {33, 102, 172};
  const int* end = t >= 0.0 ? hi : lo;
  const double a = std::abs(t);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(255 + (end[0] - 255) * a)),
                static_cast<int>(std::lround(255 + (end[1] - 255) * a)),
                static_cast<int>(std::lround(255 + (end[2] - 255) * a)));
  return buf;
}

std::string deviation_heatmap_svg(const std::vector<NamedDeviation>& fits, double limit, double flag) {
  static const char* tails[] = {"A", "C", "M", "L"};
  static const char* heads[] = {"M", "L", "Y"};
  constexpr int cell = 56, pad = 40, title = 28;
  const int panel_w = pad + 3 * cell + 20, panel_h = title + pad + 4 * cell + 10;
  const int width = std::max<int>(1, static_cast<int>(fits.size())) * panel_w;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << panel_h + 30
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t f = 0; f < fits.size(); ++f) {
    const int x0 = static_cast<int>(f) * panel_w;
    svg << "<text x=\"" << x0 + pad << "\" y=\"18\" font-size=\"13\">" << fits[f].name << "</text>\n";
    for (int h = 0; h < 3; ++h)
      svg << "<text x=\"" << x0 + pad + h * cell + cell / 2 << "\" y=\"" << title + pad - 8
          << "\" text-anchor=\"middle\">" << heads[h] << "</text>\n";
    for (int t = 0; t < 4; ++t) {
      svg << "<text x=\"" << x0 + pad - 8 << "\" y=\"" << title + pad + t * cell + cell / 2 + 4
          << "\" text-anchor=\"end\">" << tails[t] << "</text>\n";
      for (int h = 0; h < 3; ++h) {
        const std::string edge = std::string(tails[t]) + "->" + heads[h];
        Slot slot;
        try {
          slot = slot_from_name(edge);
        } catch (const Error&) {
          continue;  // no such edge
        }
        const auto& c = fits[f].matrix.at(slot);
        const int x = x0 + pad + h * cell, y = title + pad + t * cell;
        std::string stroke = "#999999";
        int sw = 1;
        if (pinned(fits[f].fit, slot)) {
          stroke = "#1a9641";
          sw = 3;
        } else if (is_neutral_slot(slot) && std::abs(c.deviation) >= flag) {
          stroke = "#f28e2b";
          sw = 3;
        }
        svg << "<rect x=\"" << x + 2 << "\" y=\"" << y + 2 << "\" width=\"" << cell - 4 << "\" height=\"" << cell - 4
            << "\" fill=\"" << diverging_color(c.deviation, limit) << "\" stroke=\"" << stroke << "\" stroke-width=\""
            << sw << "\"/>\n";
        svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\">"
            << short_num(c.deviation) << "</text>\n";
      }
    }
  }
  // Colour bar.
  const int bar_y = panel_h + 5;
  for (int i = 0; i <= 20; ++i) {
    const double v = limit * (i - 10) / 10.0;
    svg << "<rect x=\"" << pad + i * 8 << "\" y=\"" << bar_y << "\" width=\"8\" height=\"10\" fill=\""
        << diverging_color(v, limit) << "\"/>\n";
  }
  svg << "<text x=\"" << pad << "\" y=\"" << bar_y + 22 << "\">" << short_num(-limit) << "</text>\n";
  svg << "<text x=\"" << pad + 168 << "\" y=\"" << bar_y + 22 << "\" text-anchor=\"end\">" << short_num(limit)
      << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace pfair
