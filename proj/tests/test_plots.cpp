#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "styleseg/harness/svg_plots.hpp"

using namespace styleseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "styleseg_test_plots";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<DistributionGroup> sample_groups() {
  return {
      {"conditioned", {-3.0, -1.5, 0.25, 1.0, 2.5, 0.125}},
      {"all", {10.0, 12.5, 8.75, 15.0, 11.0}},
      {"fp", {}},
  };
}

}  // namespace

TEST_CASE("violin SVG renders groups and notes empty ones") {
  const fs::path dir = temp_dir();
  const fs::path svg = dir / "bias.svg";
  write_violin_svg(svg.string(), "area bias", "pixels", sample_groups());

  const std::string content = slurp(svg);
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("area bias") != std::string::npos);
  CHECK(content.find("conditioned") != std::string::npos);
  CHECK(content.find("no data: fp") != std::string::npos);
  CHECK(content.find("polygon") != std::string::npos);
}

TEST_CASE("values CSV round-trips exactly") {
  const fs::path dir = temp_dir();
  const fs::path csv = dir / "values.csv";
  const auto groups = sample_groups();
  write_values_csv(csv.string(), groups);

  const auto back = read_values_csv(csv.string());
  REQUIRE(back.size() == groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    CHECK(back[g].label == groups[g].label);
    REQUIRE(back[g].values.size() == groups[g].values.size());
    for (std::size_t i = 0; i < groups[g].values.size(); ++i) {
      CHECK(back[g].values[i] == groups[g].values[i]);  // bit-exact
    }
  }
}

TEST_CASE("re-plotting from the values file reproduces the SVG bytes") {
  const fs::path dir = temp_dir();
  const auto groups = sample_groups();

  const fs::path csv = dir / "v.csv";
  write_values_csv(csv.string(), groups);

  const fs::path svg1 = dir / "plot1.svg";
  const fs::path svg2 = dir / "plot2.svg";
  write_violin_svg(svg1.string(), "t", "y", groups);
  write_violin_svg(svg2.string(), "t", "y", read_values_csv(csv.string()));
  CHECK(slurp(svg1) == slurp(svg2));
}
