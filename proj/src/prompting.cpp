#include "metricforge/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "metricforge/alignment.hpp"
#include "metricforge/errors.hpp"
#include "metricforge/rng.hpp"

namespace metricforge {

void SparsePrompt::validate() const {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entries.size());
  for (const PromptEntry& e : entries) {
    if (!std::isfinite(e.d) || e.d <= 0.0) {
      raise(ErrorCode::InvalidPrompt, "prompt depth must be finite and positive, got " +
                                          std::to_string(e.d));
    }
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.y)) << 32) |
        static_cast<std::uint32_t>(e.x);
    if (!seen.insert(key).second) {
      raise(ErrorCode::InvalidPrompt, "duplicate prompt pixel (" + std::to_string(e.x) + ", " +
                                          std::to_string(e.y) + ")");
    }
  }
}

void SparsePrompt::validate(int width, int height) const {
  validate();
  for (const PromptEntry& e : entries) {
    if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
      raise(ErrorCode::InvalidPrompt, "prompt pixel (" + std::to_string(e.x) + ", " +
                                          std::to_string(e.y) + ") outside " +
                                          std::to_string(width) + "x" + std::to_string(height));
    }
  }
}

SparsePrompt sample_prompt(const DepthGrid& grid, std::size_t n, std::uint64_t seed) {
  if (n < 1) {
    raise(ErrorCode::InvalidArgument, "requested prompt count must be >= 1");
  }
  const std::size_t valid = grid.valid_count();
  if (valid == 0) {
    raise(ErrorCode::NoValidPixels, "grid has no valid pixels");
  }
  const std::size_t take = std::min(n, valid);

  // Floyd's sampling over valid-pixel ranks: uniform without replacement in
  // O(take) draws, then one grid scan maps ranks to pixels. Avoids
  // materializing the full valid-index list on large grids.
  Rng rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(take * 2);
  for (std::uint64_t j = valid - take; j < valid; ++j) {
    const std::uint64_t t = rng.uniform_index(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> ranks(chosen.begin(), chosen.end());
  std::sort(ranks.begin(), ranks.end());

  SparsePrompt prompt;
  prompt.entries.reserve(take);
  std::size_t next = 0;
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < grid.size() && next < ranks.size(); ++i) {
    if (grid.mask[i] == 0) continue;
    if (rank == ranks[next]) {
      const int x = static_cast<int>(i % grid.width);
      const int y = static_cast<int>(i / grid.width);
      prompt.entries.push_back({x, y, grid.depth[i]});
      ++next;
    }
    ++rank;
  }
  return prompt;
}

DepthGrid pdsa_refine(const SparsePrompt& prompt, const DepthGrid& prior, int k) {
  const ScaleField field = pixelwise_scale_field(prior, prompt, k);

  DepthGrid out(prior.width, prior.height);
  out.mask = prior.mask;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (prior.mask[i]) out.depth[i] = prior.depth[i] * field.scale[i];
  }
  // Prompt depths are authoritative where they land: assign them directly so
  // the refinement is exact there, not just exact up to rounding.
  for (const PromptEntry& e : prompt.entries) {
    if (prior.valid(e.x, e.y)) out.depth[out.index(e.x, e.y)] = e.d;
  }
  return out;
}

DepthGrid gmdr_correct(const SparsePrompt& prompt, const DepthGrid& prior, double floor) {
  if (!(floor > 0.0)) {
    raise(ErrorCode::InvalidArgument, "positivity floor must be > 0");
  }
  const AffineFit fit = lsq_scale_shift(prior, prompt);

  DepthGrid out(prior.width, prior.height);
  out.mask = prior.mask;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (prior.mask[i]) {
      out.depth[i] = std::max(fit.scale * prior.depth[i] + fit.shift, floor);
    }
  }
  return out;
}

PreparedPrompt prepare_prompt(const SparsePrompt& prompt, const DepthGrid& prior, int k,
                              double floor) {
  const DepthGrid pdsa = pdsa_refine(prompt, prior, k);
  const DepthGrid gmdr = gmdr_correct(prompt, prior, floor);

  PreparedPrompt out;
  out.width = prior.width;
  out.height = prior.height;
  out.pdsa_channel = pdsa.depth;
  out.gmdr_channel = gmdr.depth;
  out.mask_channel.assign(prior.size(), 0);
  for (const PromptEntry& e : prompt.entries) {
    out.mask_channel[prior.index(e.x, e.y)] = 1;
  }
  return out;
}

}  // namespace metricforge
