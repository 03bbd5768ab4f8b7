#pragma once

#include <cstdint>
#include <vector>

#include "metricforge/grid.hpp"

namespace metricforge {

struct PromptEntry {
  int x = 0;  // pixel column
  int y = 0;  // pixel row
  double d = 0.0;  // metric depth, meters
};

// Sparse metric prompt: ordered (x, y, d) triplets. Depths are finite and
// positive; pixel coordinates are unique. Bounds are checked against the
// grid a prompt is applied to.
struct SparsePrompt {
  std::vector<PromptEntry> entries;

  std::size_t size() const { return entries.size(); }

  // Throws InvalidPrompt on duplicate pixels or non-positive/non-finite
  // depths; with a grid given, also on out-of-bounds coordinates.
  void validate() const;
  void validate(int width, int height) const;
};

// H x W x 3 stack fed to a prompt-conditioned predictor: the pixel-wise
// scale-aligned prior, the globally corrected prior, and the binary prompt
// location mask. Channel values are 0 where the prior is invalid.
struct PreparedPrompt {
  int width = 0;
  int height = 0;
  std::vector<double> pdsa_channel;
  std::vector<double> gmdr_channel;
  std::vector<std::uint8_t> mask_channel;
};

// Uniform sampling without replacement over valid pixels. If n exceeds the
// valid-pixel count, every valid pixel is returned. Entries come out in
// row-major pixel order; output is deterministic for a fixed seed.
SparsePrompt sample_prompt(const DepthGrid& grid, std::size_t n, std::uint64_t seed);

// Multiplies the prior by the dense pixel-wise scale field anchored at the
// prompt points. Prompt depths are reproduced exactly at their own pixels.
DepthGrid pdsa_refine(const SparsePrompt& prompt, const DepthGrid& prior, int k = 4);

// Applies the global least-squares scale-and-shift fit of the prior against
// the prompt depths, clamped below at `floor` so downstream inverse-depth
// losses stay defined.
DepthGrid gmdr_correct(const SparsePrompt& prompt, const DepthGrid& prior, double floor = 1e-3);

// Assembles the three-channel prompt input from the two corrections above
// plus the prompt location mask.
PreparedPrompt prepare_prompt(const SparsePrompt& prompt, const DepthGrid& prior, int k = 4,
                              double floor = 1e-3);

}  // namespace metricforge
