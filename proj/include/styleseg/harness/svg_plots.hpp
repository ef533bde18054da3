#pragma once

#include <string>
#include <vector>

namespace styleseg {

/// One labeled value distribution (one violin).
struct DistributionGroup {
  std::string label;
  std::vector<double> values;
};

/// Violin-style distribution plot: kernel-density silhouette per group with
/// a median line and a mean marker. Groups without data are skipped and
/// listed in a legend note. Output is standalone SVG with no timestamps,
/// so identical inputs produce identical bytes.
void write_violin_svg(const std::string& path, const std::string& title,
                      const std::string& y_label,
                      const std::vector<DistributionGroup>& groups);

/// Plain two-column CSV (group,value) with full double precision; reading
/// back yields bit-identical values.
void write_values_csv(const std::string& path,
                      const std::vector<DistributionGroup>& groups);
std::vector<DistributionGroup> read_values_csv(const std::string& path);

}  // namespace styleseg
