#ifndef ROADMRF_COLORS_HPP
#define ROADMRF_COLORS_HPP

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "roadmrf/common.hpp"
#include "roadmrf/io.hpp"

namespace roadmrf {

/// Map rendering rule: densities fall into fixed-width bins colored
/// black, blue, green, yellow, red; anything past the red band stays red.
struct ColorBinning {
  double bin_width = 0.05;

  static constexpr std::array<const char*, 5> palette = {"black", "blue", "green", "yellow",
                                                         "red"};

  int bin_index(double value) const {
    if (!(bin_width > 0.0)) throw ValidationError("bin width must be > 0");
    if (!std::isfinite(value) || value < 0.0)
      throw ValidationError("density must be finite and >= 0 for color binning");
    const int raw = static_cast<int>(std::floor(value / bin_width));
    return std::min(raw, static_cast<int>(palette.size()) - 1);
  }

  const char* color(double value) const { return palette[bin_index(value)]; }
};

/// Renders "road_id,value,bin_index,color" rows for the given reconstruction.
inline std::string colors_csv(std::span<const ReconstructionRow> rows,
                              const ColorBinning& binning) {
  std::string out = "road_id,value,bin_index,color\n";
  for (const auto& r : rows) {
    check_csv_safe_id(r.road_id);
    const int bin = binning.bin_index(r.estimate);
    out += r.road_id + ',' + fmt_double6(r.estimate) + ',' + std::to_string(bin) + ',' +
           ColorBinning::palette[bin] + '\n';
  }
  return out;
}

}  // namespace roadmrf

#endif  // ROADMRF_COLORS_HPP
