#include "styleseg/harness/svg_plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "styleseg/metrics/metrics.hpp"

namespace styleseg {

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

/// Gaussian KDE evaluated on a fixed grid; bandwidth by Silverman's rule
/// with a floor so constant data still draws a sliver.
std::vector<double> kde_silhouette(const std::vector<double>& values,
                                   const std::vector<double>& grid) {
  const double m = mean_of(values);
  const double sd = stddev_of(values, m);
  const double h = std::max(
      1.06 * sd * std::pow(static_cast<double>(values.size()), -0.2), 1e-9);
  std::vector<double> density(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double v : values) {
      const double t = (grid[g] - v) / h;
      acc += std::exp(-0.5 * t * t);
    }
    density[g] = acc;
  }
  const double peak = *std::max_element(density.begin(), density.end());
  if (peak > 0.0) {
    for (double& d : density) d /= peak;
  }
  return density;
}

}  // namespace

void write_violin_svg(const std::string& path, const std::string& title,
                      const std::string& y_label,
                      const std::vector<DistributionGroup>& groups) {
  std::vector<const DistributionGroup*> filled;
  std::vector<std::string> empty_labels;
  for (const auto& g : groups) {
    if (g.values.empty()) {
      empty_labels.push_back(g.label);
    } else {
      filled.push_back(&g);
    }
  }

  double lo = 0.0, hi = 1.0;
  if (!filled.empty()) {
    lo = hi = filled.front()->values.front();
    for (const auto* g : filled) {
      for (double v : g->values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto y_of = [&](double v) {
    return kMarginTop + plot_h * (1.0 - (v - lo) / (hi - lo));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << kMarginTop + plot_h / 2 << ")\">"
      << y_label << "</text>\n";

  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double y = y_of(v);
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << fmt(y) << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(v) << "</text>\n";
  }

  const std::size_t n_slots = std::max<std::size_t>(filled.size(), 1);
  const double slot_w = plot_w / static_cast<double>(n_slots);
  const double half_w = 0.36 * slot_w;

  std::vector<double> grid(81);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    grid[g] = lo + (hi - lo) * static_cast<double>(g) / (grid.size() - 1);
  }

  for (std::size_t s = 0; s < filled.size(); ++s) {
    const auto& group = *filled[s];
    const double cx = kMarginLeft + slot_w * (s + 0.5);
    const auto density = kde_silhouette(group.values, grid);

    svg << "<polygon fill=\"#7aa6c2\" fill-opacity=\"0.6\" stroke=\"#33607f\" points=\"";
    for (std::size_t g = 0; g < grid.size(); ++g) {
      svg << fmt(cx + half_w * density[g]) << "," << fmt(y_of(grid[g])) << " ";
    }
    for (std::size_t g = grid.size(); g-- > 0;) {
      svg << fmt(cx - half_w * density[g]) << "," << fmt(y_of(grid[g])) << " ";
    }
    svg << "\"/>\n";

    const double med = median(group.values);
    const double mn = mean_of(group.values);
    svg << "<line x1=\"" << fmt(cx - half_w) << "\" y1=\"" << fmt(y_of(med))
        << "\" x2=\"" << fmt(cx + half_w) << "\" y2=\"" << fmt(y_of(med))
        << "\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n";
    svg << "<path d=\"M " << fmt(cx) << " " << fmt(y_of(mn) - 5) << " L "
        << fmt(cx + 5) << " " << fmt(y_of(mn)) << " L " << fmt(cx) << " "
        << fmt(y_of(mn) + 5) << " L " << fmt(cx - 5) << " " << fmt(y_of(mn))
        << " Z\" fill=\"#c0392b\"/>\n";
    svg << "<text x=\"" << fmt(cx) << "\" y=\"" << kHeight - kMarginBottom + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << group.label << "</text>\n";
    svg << "<text x=\"" << fmt(cx) << "\" y=\"" << kHeight - kMarginBottom + 34
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" "
        << "fill=\"#555555\">n=" << group.values.size() << "</text>\n";
  }

  if (!empty_labels.empty()) {
    std::string note = "no data: ";
    for (std::size_t i = 0; i < empty_labels.size(); ++i) {
      if (i) note += ", ";
      note += empty_labels[i];
    }
    svg << "<text x=\"" << kMarginLeft << "\" y=\"" << kHeight - 10
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#888888\">"
        << note << "</text>\n";
  }
  svg << "<text x=\"" << kWidth - kMarginRight << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" "
      << "fill=\"#888888\">line: median, diamond: mean</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_violin_svg: cannot open " + path);
  out << svg.str();
}

void write_values_csv(const std::string& path,
                      const std::vector<DistributionGroup>& groups) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_values_csv: cannot open " + path);
  out << "group,value\n";
  char buf[40];
  for (const auto& g : groups) {
    for (double v : g.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << g.label << "," << buf << "\n";
    }
    if (g.values.empty()) out << g.label << ",\n";
  }
}

std::vector<DistributionGroup> read_values_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_values_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "group,value") {
    throw std::runtime_error("read_values_csv: bad header in " + path);
  }
  std::vector<DistributionGroup> groups;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("read_values_csv: malformed row in " + path);
    }
    const std::string label = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.label == label; });
    if (it == groups.end()) {
      groups.push_back({label, {}});
      it = std::prev(groups.end());
    }
    if (!value.empty()) it->values.push_back(std::stod(value));
  }
  return groups;
}

}  // namespace styleseg
