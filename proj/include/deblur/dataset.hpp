#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deblur/blur.hpp"
#include "deblur/metrics.hpp"

namespace deblur {

// Supervised corpus: ground-truth patches in [0,1] and their (noiseless)
// blurred observations under one fixed operator. Train/test are disjoint.
struct Dataset {
  std::vector<SamplePair> train;
  std::vector<SamplePair> test;
  std::string provenance;
};

// Procedural grayscale scenes (gradients, rectangles, disks, band-limited
// texture) blurred by `op`. Identical arguments reproduce identical bits.
Dataset synthesize(int count, int size, std::uint64_t seed,
                   const BlurOperator& op, double train_fraction = 0.7);

// Crops every readable PNM image in `dir` into non-overlapping
// patch_size x patch_size patches (luminance, [0,1]) and splits them with a
// deterministic shuffle. Unreadable files are skipped with a warning on
// stderr; ending up with zero patches is fatal.
Dataset ingest(const std::filesystem::path& dir, int patch_size,
               std::uint64_t seed, const BlurOperator& op,
               double train_fraction = 0.7);

// Stores ground truth losslessly (manifest + one .f64 file per patch).
// Observations are not stored; load_dataset re-applies `op`.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir, const BlurOperator& op);

}  // namespace deblur
