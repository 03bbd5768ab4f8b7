#include "metricforge/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "metricforge/errors.hpp"

namespace metricforge {

namespace {

struct Anchor {
  int x = 0;
  int y = 0;
  double value = 0.0;  // target depth for lsq, ratio for the scale field
};

// Prompt points landing on valid source pixels, in row-major pixel order so
// downstream accumulation does not depend on the prompt's ordering.
std::vector<Anchor> usable_anchors(const DepthGrid& source, const SparsePrompt& targets) {
  targets.validate(source.width, source.height);
  std::vector<Anchor> anchors;
  anchors.reserve(targets.entries.size());
  for (const PromptEntry& e : targets.entries) {
    if (!source.valid(e.x, e.y)) continue;
    anchors.push_back({e.x, e.y, e.d});
  }
  std::sort(anchors.begin(), anchors.end(), [&](const Anchor& a, const Anchor& b) {
    return std::make_pair(a.y, a.x) < std::make_pair(b.y, b.x);
  });
  return anchors;
}

}  // namespace

AffineFit lsq_scale_shift(const DepthGrid& source, const SparsePrompt& targets) {
  const std::vector<Anchor> anchors = usable_anchors(source, targets);
  if (anchors.size() < 2) {
    raise(ErrorCode::DegenerateFit,
          "need >= 2 prompt points on valid source pixels, have " +
              std::to_string(anchors.size()));
  }

  double min_s = source.at(anchors.front().x, anchors.front().y);
  double max_s = min_s;
  double sum_s = 0.0, sum_d = 0.0;
  for (const Anchor& a : anchors) {
    const double s = source.at(a.x, a.y);
    min_s = std::min(min_s, s);
    max_s = std::max(max_s, s);
    sum_s += s;
    sum_d += a.value;
  }
  if (min_s == max_s) {
    raise(ErrorCode::DegenerateFit, "source values at prompt pixels are all equal");
  }

  const double n = static_cast<double>(anchors.size());
  const double mean_s = sum_s / n;
  const double mean_d = sum_d / n;
  double sxx = 0.0, sxd = 0.0;
  for (const Anchor& a : anchors) {
    const double ds = source.at(a.x, a.y) - mean_s;
    sxx += ds * ds;
    sxd += ds * (a.value - mean_d);
  }
  const double scale = sxd / sxx;
  const double shift = mean_d - scale * mean_s;

  double ss_res = 0.0;
  for (const Anchor& a : anchors) {
    const double r = scale * source.at(a.x, a.y) + shift - a.value;
    ss_res += r * r;
  }

  AffineFit fit;
  fit.scale = scale;
  fit.shift = shift;
  fit.residual_rms = std::sqrt(ss_res / n);
  fit.sample_count = anchors.size();
  return fit;
}

namespace {

// Bucket grid for exact k-nearest-anchor queries. Squared distances are
// integers, so ordering by (dist2, y, x) is free of floating-point ties.
class AnchorIndex {
 public:
  AnchorIndex(const std::vector<Anchor>& anchors, int width, int height)
      : anchors_(anchors) {
    cell_ = 1;
    const double per_anchor =
        static_cast<double>(width) * height / static_cast<double>(anchors.size());
    cell_ = std::max(1, static_cast<int>(std::sqrt(per_anchor)));
    cols_ = (width + cell_ - 1) / cell_;
    rows_ = (height + cell_ - 1) / cell_;
    buckets_.resize(static_cast<std::size_t>(cols_) * rows_);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      buckets_[bucket_of(anchors[i].x, anchors[i].y)].push_back(static_cast<int>(i));
    }
  }

  struct Hit {
    std::int64_t dist2;
    int y, x;
    int anchor;
    bool operator<(const Hit& o) const {
      if (dist2 != o.dist2) return dist2 < o.dist2;
      if (y != o.y) return y < o.y;
      return x < o.x;
    }
  };

  // Exact k nearest anchors of (qx, qy), ties at the k-th distance broken by
  // lowest (y, x).
  void query(int qx, int qy, int k, std::vector<Hit>& out) const {
    out.clear();
    const int bx = qx / cell_;
    const int by = qy / cell_;
    const int max_ring = std::max(std::max(bx, cols_ - 1 - bx), std::max(by, rows_ - 1 - by));
    for (int ring = 0; ring <= max_ring; ++ring) {
      // Anchors in ring cells are at least (ring - 1) * cell_ pixels away.
      if (static_cast<int>(out.size()) >= k) {
        const std::int64_t lower = static_cast<std::int64_t>(ring - 1) * cell_;
        if (lower > 0 && lower * lower > out.back().dist2) break;
      }
      scan_ring(bx, by, ring, qx, qy, k, out);
    }
  }

 private:
  std::size_t bucket_of(int x, int y) const {
    return static_cast<std::size_t>(y / cell_) * cols_ + (x / cell_);
  }

  void scan_ring(int bx, int by, int ring, int qx, int qy, int k, std::vector<Hit>& out) const {
    const int x0 = bx - ring, x1 = bx + ring;
    const int y0 = by - ring, y1 = by + ring;
    for (int cy = y0; cy <= y1; ++cy) {
      if (cy < 0 || cy >= rows_) continue;
      for (int cx = x0; cx <= x1; ++cx) {
        if (cx < 0 || cx >= cols_) continue;
        if (ring > 0 && cx != x0 && cx != x1 && cy != y0 && cy != y1) continue;
        for (int idx : buckets_[static_cast<std::size_t>(cy) * cols_ + cx]) {
          const Anchor& a = anchors_[idx];
          const std::int64_t dx = a.x - qx;
          const std::int64_t dy = a.y - qy;
          insert(Hit{dx * dx + dy * dy, a.y, a.x, idx}, k, out);
        }
      }
    }
  }

  static void insert(const Hit& h, int k, std::vector<Hit>& out) {
    auto pos = std::lower_bound(out.begin(), out.end(), h);
    if (out.size() < static_cast<std::size_t>(k)) {
      out.insert(pos, h);
    } else if (pos != out.end()) {
      out.insert(pos, h);
      out.pop_back();
    }
  }

  const std::vector<Anchor>& anchors_;
  std::vector<std::vector<int>> buckets_;
  int cell_ = 1;
  int cols_ = 0;
  int rows_ = 0;
};

}  // namespace

ScaleField pixelwise_scale_field(const DepthGrid& source, const SparsePrompt& targets, int k) {
  if (k < 1) {
    raise(ErrorCode::InvalidArgument, "neighbor count k must be >= 1");
  }
  std::vector<Anchor> anchors = usable_anchors(source, targets);
  if (anchors.empty()) {
    raise(ErrorCode::NoUsablePrompts, "no prompt point lands on a valid source pixel");
  }
  for (Anchor& a : anchors) {
    const double s = source.at(a.x, a.y);
    if (s <= 0.0) {
      raise(ErrorCode::NonPositiveSourceAtPrompt,
            "source depth " + std::to_string(s) + " at prompt pixel (" + std::to_string(a.x) +
                ", " + std::to_string(a.y) + ")");
    }
    a.value /= s;  // now the ratio d_i / source
  }

  ScaleField field;
  field.width = source.width;
  field.height = source.height;
  field.scale.assign(source.size(), 0.0);
  field.mask = source.mask;

  std::unordered_map<std::size_t, double> exact;
  exact.reserve(anchors.size());
  for (const Anchor& a : anchors) {
    exact.emplace(source.index(a.x, a.y), a.value);
  }

  const int k_eff = std::min<int>(k, static_cast<int>(anchors.size()));
  const AnchorIndex index(anchors, source.width, source.height);
  std::vector<AnchorIndex::Hit> hits;
  hits.reserve(k_eff + 4);

  for (int y = 0; y < source.height; ++y) {
    for (int x = 0; x < source.width; ++x) {
      const std::size_t idx = source.index(x, y);
      if (source.mask[idx] == 0) continue;
      if (auto it = exact.find(idx); it != exact.end()) {
        field.scale[idx] = it->second;
        continue;
      }
      index.query(x, y, k_eff, hits);
      double wsum = 0.0, vsum = 0.0;
      for (const auto& h : hits) {
        const double w = 1.0 / std::sqrt(static_cast<double>(h.dist2));
        wsum += w;
        vsum += w * anchors[h.anchor].value;
      }
      field.scale[idx] = vsum / wsum;
    }
  }
  return field;
}

}  // namespace metricforge
