#pragma once

// Contribution tables with a known informative channel.

#include <cmath>
#include <random>

#include "deepiqa/finetune.hpp"
#include "generators.hpp"

namespace support {

/// Column `informative` holds 0.1 * (9 - mos)^2, strictly increasing in
/// 9 - mos for mos in [0.5, 8.5]; every other column is U(0, noise) and
/// independent of the score.
inline deepiqa::ContributionTable planted_table(gen::Rng& rng, std::size_t rows,
                                                std::size_t channels, std::size_t informative = 0,
                                                double noise = 3.0) {
  auto table = deepiqa::ContributionTable::make(
      {{"layer_a", 0, channels / 2}, {"layer_b", 0, channels - channels / 2}}, rows);
  std::uniform_real_distribution<double> mos(0.5, 8.5), u(0.0, noise);
  for (std::size_t r = 0; r < rows; ++r) {
    table.mos[r] = mos(rng);
    auto row = table.row(r);
    for (std::size_t c = 0; c < channels; ++c) {
      row[c] = c == informative ? 0.1 * std::pow(9.0 - table.mos[r], 2) : u(rng);
    }
  }
  return table;
}

}  // namespace support
