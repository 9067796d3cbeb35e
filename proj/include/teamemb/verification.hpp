#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace teamemb {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  bool ok = false;
};

// Finite-difference checks of every loss component and the total on random
// 4x4 maps, a two-layer network on an 8x8 input and a narrow TeamNet on a
// 16x16 input.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed, int loss_trials = 10);

}  // namespace teamemb
