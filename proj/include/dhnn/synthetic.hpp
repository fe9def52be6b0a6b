#pragma once

#include <cstdint>
#include <vector>

#include "dhnn/ingest.hpp"

namespace dhnn::cli {

struct SyntheticSpec {
  int n_communities = 3;
  int series_per_community = 4;
  int length = 2000;
  double noise = 0.1;
  std::uint64_t seed = 1;
  double ar_coefficient = 0.6;
  double market_strength = 0.8;  // loading on the shared market factor
};

struct SyntheticData {
  ingest::SeriesTable table;       // target is column 0
  std::vector<int> planted_labels; // community per column
};

// Every series loads on a shared AR(1) market factor; on top of that each
// community follows its own independent AR(1) latent factor plus
// idiosyncratic noise. Column 0 (the target) is a noisy average of the rest
// of the first community. The market term gives the correlation matrix the
// dominant common mode the spectral filtering step removes.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace dhnn::cli
