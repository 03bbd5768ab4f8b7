#include "metricforge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "metricforge/errors.hpp"
#include "metricforge/rng.hpp"

namespace metricforge {

void LossConfig::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || delta < 0) {
    raise(ErrorCode::InvalidArgument, "loss weights must be >= 0");
  }
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) {
    raise(ErrorCode::InvalidArgument, "drop_fraction must be in [0, 1)");
  }
  if (scale_count < 1) {
    raise(ErrorCode::InvalidArgument, "scale_count must be >= 1");
  }
  if (!(balance_c > 1.0)) {
    raise(ErrorCode::InvalidArgument, "balance_c must be > 1");
  }
  if (!(mad_epsilon > 0.0)) {
    raise(ErrorCode::InvalidArgument, "mad_epsilon must be > 0");
  }
}

namespace {

void check_same_shape(int wa, int ha, int wb, int hb) {
  if (wa != wb || ha != hb) {
    raise(ErrorCode::DimensionMismatch, "map shapes " + std::to_string(wa) + "x" +
                                            std::to_string(ha) + " vs " + std::to_string(wb) +
                                            "x" + std::to_string(hb));
  }
}

std::vector<std::uint8_t> joint_mask(const ValueMap& a, const ValueMap& b) {
  std::vector<std::uint8_t> m(a.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.mask[i] & b.mask[i];
  return m;
}

inline int sgn(double v) { return (v > 0.0) - (v < 0.0); }

// Piecewise structure of an evaluation: order-statistic selections and
// absolute-value signs. Two evaluations on the same linear/smooth piece have
// equal signatures; the finite-difference harness skips pixels whose
// perturbation changes it.
struct Signature {
  std::vector<std::int64_t> ids;
  std::vector<std::int8_t> signs;
  bool operator==(const Signature&) const = default;
};

// ---------------------------------------------------------------------------
// median / MAD with derivative bookkeeping

struct PairVI {
  double v;
  std::size_t i;
};

struct MedianSel {
  double value = 0.0;
  std::size_t lo = 0, hi = 0;  // pixel indices of the middle order stats, lo == hi for odd n
};

// Selection is by (value, pixel index), so ties are resolved deterministically.
MedianSel select_median(std::vector<PairVI>& a) {
  const std::size_t n = a.size();
  const auto cmp = [](const PairVI& x, const PairVI& y) {
    return x.v != y.v ? x.v < y.v : x.i < y.i;
  };
  const std::size_t mid = n / 2;
  std::nth_element(a.begin(), a.begin() + mid, a.end(), cmp);
  const PairVI upper = a[mid];
  if (n % 2 == 1) {
    return {upper.v, upper.i, upper.i};
  }
  const PairVI lower = *std::max_element(a.begin(), a.begin() + mid, cmp);
  return {(lower.v + upper.v) / 2.0, lower.i, upper.i};
}

struct MadInfo {
  MedianSel med;
  MedianSel mad;
  bool floored = false;
  double denom = 0.0;
};

MadInfo mad_info(const std::vector<double>& values, const std::vector<std::uint8_t>& mask,
                 double eps) {
  std::vector<PairVI> vi;
  vi.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) vi.push_back({values[i], i});
  }
  if (vi.empty()) {
    raise(ErrorCode::EmptyMask, "no valid pixels to normalize");
  }
  MadInfo info;
  info.med = select_median(vi);
  for (PairVI& p : vi) p.v = std::abs(values[p.i] - info.med.value);
  info.mad = select_median(vi);
  info.floored = info.mad.value < eps;
  info.denom = info.floored ? eps : info.mad.value;
  return info;
}

// z = (v - median) / denom on valid pixels, 0 elsewhere.
std::vector<double> apply_mad(const std::vector<double>& values,
                              const std::vector<std::uint8_t>& mask, const MadInfo& info) {
  std::vector<double> z(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) z[i] = (values[i] - info.med.value) / info.denom;
  }
  return z;
}

// Chain rule through z_i = (v_i - m)/D with m the median and D the (possibly
// floored) MAD. Median and MAD derivatives concentrate on the selected order
// statistics.
std::vector<double> mad_backward(const std::vector<double>& values,
                                 const std::vector<std::uint8_t>& mask, const MadInfo& info,
                                 const std::vector<double>& gz) {
  const double med = info.med.value;
  const double d = info.denom;
  const double med_w = info.med.lo == info.med.hi ? 1.0 : 0.5;
  const double mad_w = info.mad.lo == info.mad.hi ? 1.0 : 0.5;

  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i]) continue;
    s1 += gz[i];
    s2 += gz[i] * (values[i] - med);
  }

  // T = d(MAD)/d(median shift) bookkeeping: sum of selected deviation signs.
  double t = 0.0;
  if (!info.floored) {
    t += mad_w * sgn(values[info.mad.lo] - med);
    if (info.mad.hi != info.mad.lo) t += mad_w * sgn(values[info.mad.hi] - med);
  }

  std::vector<double> gv(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i]) continue;
    double g = gz[i] / d;
    double mk = 0.0;
    if (i == info.med.lo) mk += med_w;
    if (i == info.med.hi && info.med.hi != info.med.lo) mk += med_w;
    if (mk != 0.0) g -= mk * s1 / d;
    if (!info.floored) {
      double dk = -mk * t;
      if (i == info.mad.lo) dk += mad_w * sgn(values[i] - med);
      if (i == info.mad.hi && info.mad.hi != info.mad.lo) dk += mad_w * sgn(values[i] - med);
      if (dk != 0.0) g -= s2 / (d * d) * dk;
    }
    gv[i] = g;
  }
  return gv;
}

void append_mad_signature(const MadInfo& info, Signature& sig) {
  sig.ids.push_back(static_cast<std::int64_t>(info.med.lo));
  sig.ids.push_back(static_cast<std::int64_t>(info.med.hi));
  sig.ids.push_back(static_cast<std::int64_t>(info.mad.lo));
  sig.ids.push_back(static_cast<std::int64_t>(info.mad.hi));
  sig.ids.push_back(info.floored ? 1 : 0);
}

// ---------------------------------------------------------------------------
// pyramid building blocks (replicate padding)

inline int clampi(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

constexpr double kBinomial[3] = {0.25, 0.5, 0.25};

std::vector<double> blur3(int w, int h, const std::vector<double>& in) {
  std::vector<double> out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = clampi(y + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = clampi(x + dx, w);
          acc += kBinomial[dy + 1] * kBinomial[dx + 1] *
                 in[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

std::vector<double> blur3_transpose(int w, int h, const std::vector<double>& g_out) {
  std::vector<double> g_in(g_out.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = g_out[static_cast<std::size_t>(y) * w + x];
      if (g == 0.0) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = clampi(y + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = clampi(x + dx, w);
          g_in[static_cast<std::size_t>(yy) * w + xx] +=
              kBinomial[dy + 1] * kBinomial[dx + 1] * g;
        }
      }
    }
  }
  return g_in;
}

// Scharr smoothing (3, 10, 3)/16 across, central difference (-1, 0, 1) along
// the derivative axis.
constexpr double kScharrSmooth[3] = {3.0 / 16.0, 10.0 / 16.0, 3.0 / 16.0};
constexpr double kScharrDiff[3] = {-1.0, 0.0, 1.0};

void scharr(int w, int h, const std::vector<double>& in, std::vector<double>& gx,
            std::vector<double>& gy) {
  gx.assign(in.size(), 0.0);
  gy.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ax = 0.0, ay = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = clampi(y + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = clampi(x + dx, w);
          const double v = in[static_cast<std::size_t>(yy) * w + xx];
          ax += kScharrSmooth[dy + 1] * kScharrDiff[dx + 1] * v;
          ay += kScharrDiff[dy + 1] * kScharrSmooth[dx + 1] * v;
        }
      }
      gx[static_cast<std::size_t>(y) * w + x] = ax;
      gy[static_cast<std::size_t>(y) * w + x] = ay;
    }
  }
}

// Accumulates the transpose of the Scharr stencils applied to (ggx, ggy).
void scharr_transpose_accum(int w, int h, const std::vector<double>& ggx,
                            const std::vector<double>& ggy, std::vector<double>& g_in) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gxv = ggx[static_cast<std::size_t>(y) * w + x];
      const double gyv = ggy[static_cast<std::size_t>(y) * w + x];
      if (gxv == 0.0 && gyv == 0.0) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = clampi(y + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = clampi(x + dx, w);
          g_in[static_cast<std::size_t>(yy) * w + xx] +=
              kScharrSmooth[dy + 1] * kScharrDiff[dx + 1] * gxv +
              kScharrDiff[dy + 1] * kScharrSmooth[dx + 1] * gyv;
        }
      }
    }
  }
}

struct Level {
  int w = 0, h = 0;
  std::vector<double> zp, zg;      // zero-filled outside the mask
  std::vector<std::uint8_t> m;
  std::size_t n = 0;
  // Forward residual signs, kept for the backward pass and the signature.
  std::vector<std::int8_t> sx, sy;
  double loss = 0.0;
};

std::size_t count_mask(const std::vector<std::uint8_t>& m) {
  std::size_t n = 0;
  for (std::uint8_t v : m) n += v;
  return n;
}

// Blur, decimate at even coordinates, AND the four fine children into the
// coarse mask, zero-fill invalid pixels.
Level downsample(const Level& fine) {
  Level c;
  c.w = fine.w / 2;
  c.h = fine.h / 2;
  const std::vector<double> bp = blur3(fine.w, fine.h, fine.zp);
  const std::vector<double> bg = blur3(fine.w, fine.h, fine.zg);
  c.zp.assign(static_cast<std::size_t>(c.w) * c.h, 0.0);
  c.zg.assign(c.zp.size(), 0.0);
  c.m.assign(c.zp.size(), 0);
  for (int y = 0; y < c.h; ++y) {
    for (int x = 0; x < c.w; ++x) {
      const std::size_t ci = static_cast<std::size_t>(y) * c.w + x;
      const std::size_t f00 = static_cast<std::size_t>(2 * y) * fine.w + 2 * x;
      const std::size_t f10 = f00 + 1;
      const std::size_t f01 = f00 + fine.w;
      const std::size_t f11 = f01 + 1;
      const std::uint8_t ok = fine.m[f00] & fine.m[f10] & fine.m[f01] & fine.m[f11];
      c.m[ci] = ok;
      if (ok) {
        c.zp[ci] = bp[f00];
        c.zg[ci] = bg[f00];
      }
    }
  }
  c.n = count_mask(c.m);
  return c;
}

// Transpose of downsample for the pred branch: mask the coarse gradient,
// scatter to even fine coordinates, then through the blur transpose.
std::vector<double> downsample_transpose(const Level& fine, const Level& coarse,
                                         const std::vector<double>& g_coarse) {
  std::vector<double> g_even(static_cast<std::size_t>(fine.w) * fine.h, 0.0);
  for (int y = 0; y < coarse.h; ++y) {
    for (int x = 0; x < coarse.w; ++x) {
      const std::size_t ci = static_cast<std::size_t>(y) * coarse.w + x;
      if (coarse.m[ci] && g_coarse[ci] != 0.0) {
        g_even[static_cast<std::size_t>(2 * y) * fine.w + 2 * x] = g_coarse[ci];
      }
    }
  }
  return blur3_transpose(fine.w, fine.h, g_even);
}

// ---------------------------------------------------------------------------
// robust MAE

struct MaeDetail {
  double value = 0.0;
  std::vector<double> grad;  // vs pred values, zero off-survivors
  std::vector<std::uint8_t> active;
  std::size_t survivors = 0;
};

MaeDetail robust_mae_detail(const ValueMap& pred, const ValueMap& gt, const LossConfig& cfg,
                            bool want_grad, Signature* sig) {
  check_same_shape(pred.width, pred.height, gt.width, gt.height);
  const std::vector<std::uint8_t> joint = joint_mask(pred, gt);

  std::vector<PairVI> errors;
  errors.reserve(joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i]) errors.push_back({std::abs(pred.values[i] - gt.values[i]), i});
  }
  const std::size_t n = errors.size();
  if (n == 0) {
    raise(ErrorCode::EmptyOverlap, "prediction and ground truth share no valid pixels");
  }

  const std::size_t drop =
      static_cast<std::size_t>(std::ceil(cfg.drop_fraction * static_cast<double>(n)));
  const std::size_t survivors = n - drop;

  // Largest errors first; boundary ties break by pixel index.
  const auto worse = [](const PairVI& a, const PairVI& b) {
    return a.v != b.v ? a.v > b.v : a.i < b.i;
  };
  if (drop > 0 && drop < n) {
    std::nth_element(errors.begin(), errors.begin() + drop, errors.end(), worse);
  }

  MaeDetail out;
  out.active.assign(joint.size(), 0);
  out.survivors = survivors;
  std::vector<std::size_t> dropped;
  dropped.reserve(drop);
  for (std::size_t r = 0; r < drop; ++r) dropped.push_back(errors[r].i);
  std::sort(dropped.begin(), dropped.end());

  for (std::size_t r = drop; r < n; ++r) out.active[errors[r].i] = 1;

  if (survivors > 0) {
    // Accumulate in pixel order so the value is independent of the partial
    // sort's layout.
    double sum = 0.0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
      if (out.active[i]) sum += std::abs(pred.values[i] - gt.values[i]);
    }
    out.value = sum / static_cast<double>(survivors);
  }

  if (want_grad) {
    out.grad.assign(joint.size(), 0.0);
    if (survivors > 0) {
      const double inv = 1.0 / static_cast<double>(survivors);
      for (std::size_t i = 0; i < joint.size(); ++i) {
        if (out.active[i]) out.grad[i] = sgn(pred.values[i] - gt.values[i]) * inv;
      }
    }
  }

  if (sig) {
    for (std::size_t i : dropped) sig->ids.push_back(static_cast<std::int64_t>(i));
    for (std::size_t i = 0; i < joint.size(); ++i) {
      if (joint[i]) sig->signs.push_back(static_cast<std::int8_t>(sgn(pred.values[i] - gt.values[i])));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SSI-MAGE

struct SsiDetail {
  double value = 0.0;
  std::vector<double> grad;  // vs pred values on the joint mask
  std::vector<std::uint8_t> joint;
};

SsiDetail ssi_mage_detail(const ValueMap& pred, const ValueMap& gt, const LossConfig& cfg,
                          bool want_grad, Signature* sig) {
  check_same_shape(pred.width, pred.height, gt.width, gt.height);
  SsiDetail out;
  out.joint = joint_mask(pred, gt);
  if (count_mask(out.joint) == 0) {
    raise(ErrorCode::EmptyMask, "prediction and ground truth share no valid pixels");
  }

  const MadInfo info_p = mad_info(pred.values, out.joint, cfg.mad_epsilon);
  const MadInfo info_g = mad_info(gt.values, out.joint, cfg.mad_epsilon);
  if (sig) append_mad_signature(info_p, *sig);

  std::vector<Level> chain;
  {
    Level l0;
    l0.w = pred.width;
    l0.h = pred.height;
    l0.zp = apply_mad(pred.values, out.joint, info_p);
    l0.zg = apply_mad(gt.values, out.joint, info_g);
    l0.m = out.joint;
    l0.n = count_mask(l0.m);
    chain.push_back(std::move(l0));
  }

  // Levels participate while they hold at least 2x2 pixels and any valid
  // pixel; the pyramid truncates beyond that.
  std::vector<double> gx_p, gy_p, gx_g, gy_g;
  int active = 0;
  for (int j = 0; j < cfg.scale_count; ++j) {
    if (j > 0) {
      const Level& prev = chain.back();
      if (prev.w / 2 < 2 || prev.h / 2 < 2) break;
      chain.push_back(downsample(prev));
    }
    Level& lv = chain.back();
    if (lv.w < 2 || lv.h < 2 || lv.n == 0) {
      chain.pop_back();
      break;
    }
    scharr(lv.w, lv.h, lv.zp, gx_p, gy_p);
    scharr(lv.w, lv.h, lv.zg, gx_g, gy_g);
    lv.sx.assign(lv.zp.size(), 0);
    lv.sy.assign(lv.zp.size(), 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < lv.zp.size(); ++i) {
      if (!lv.m[i]) continue;
      const double dx = gx_p[i] - gx_g[i];
      const double dy = gy_p[i] - gy_g[i];
      sum += std::abs(dx) + std::abs(dy);
      lv.sx[i] = static_cast<std::int8_t>(sgn(dx));
      lv.sy[i] = static_cast<std::int8_t>(sgn(dy));
    }
    lv.loss = sum / static_cast<double>(lv.n);
    ++active;
    if (sig) {
      for (std::size_t i = 0; i < lv.zp.size(); ++i) {
        if (lv.m[i]) {
          sig->signs.push_back(lv.sx[i]);
          sig->signs.push_back(lv.sy[i]);
        }
      }
    }
  }

  if (active == 0) {
    if (want_grad) out.grad.assign(pred.size(), 0.0);
    return out;
  }

  double total = 0.0;
  for (int j = 0; j < active; ++j) total += chain[j].loss;
  out.value = total / active;

  if (!want_grad) return out;

  // Backward: per-level direct Scharr term plus propagation from the coarser
  // levels through the decimation/blur transpose.
  std::vector<double> g;
  for (int j = active - 1; j >= 0; --j) {
    const Level& lv = chain[j];
    std::vector<double> cur;
    if (j == active - 1) {
      cur.assign(lv.zp.size(), 0.0);
    } else {
      cur = downsample_transpose(lv, chain[j + 1], g);
    }
    const double c = 1.0 / (static_cast<double>(active) * static_cast<double>(lv.n));
    std::vector<double> ggx(lv.zp.size(), 0.0), ggy(lv.zp.size(), 0.0);
    for (std::size_t i = 0; i < lv.zp.size(); ++i) {
      if (lv.m[i]) {
        ggx[i] = c * lv.sx[i];
        ggy[i] = c * lv.sy[i];
      }
    }
    scharr_transpose_accum(lv.w, lv.h, ggx, ggy, cur);
    g = std::move(cur);
  }
  // Zero-fill transpose at the base level, then back through normalization.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!out.joint[i]) g[i] = 0.0;
  }
  out.grad = mad_backward(pred.values, out.joint, info_p, g);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// public surface

ValueMap to_inverse_depth(const DepthGrid& grid) {
  ValueMap out(grid.width, grid.height);
  out.mask = grid.mask;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.mask[i]) {
      if (!(grid.depth[i] > 0.0)) {
        raise(ErrorCode::NonPositiveDepth,
              "valid pixel has depth " + std::to_string(grid.depth[i]));
      }
      out.values[i] = 1.0 / grid.depth[i];
    }
  }
  return out;
}

ValueMap to_inverse_depth(const ValueMap& map) {
  ValueMap out(map.width, map.height);
  out.mask = map.mask;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.mask[i]) {
      if (!(map.values[i] > 0.0)) {
        raise(ErrorCode::NonPositiveDepth,
              "valid pixel has value " + std::to_string(map.values[i]));
      }
      out.values[i] = 1.0 / map.values[i];
    }
  }
  return out;
}

LossReport robust_mae(const ValueMap& pred, const ValueMap& gt, const LossConfig& cfg) {
  cfg.validate();
  MaeDetail d = robust_mae_detail(pred, gt, cfg, true, nullptr);
  LossReport r;
  r.value = d.value;
  r.gradient = ValueMap(pred.width, pred.height);
  r.gradient.values = std::move(d.grad);
  r.gradient.mask = d.active;
  r.active_mask = std::move(d.active);
  return r;
}

ValueMap mad_normalize(const ValueMap& map, const LossConfig& cfg) {
  cfg.validate();
  const MadInfo info = mad_info(map.values, map.mask, cfg.mad_epsilon);
  ValueMap out(map.width, map.height);
  out.mask = map.mask;
  out.values = apply_mad(map.values, map.mask, info);
  return out;
}

LossReport ssi_mage(const ValueMap& pred, const ValueMap& gt, const LossConfig& cfg) {
  cfg.validate();
  SsiDetail d = ssi_mage_detail(pred, gt, cfg, true, nullptr);
  LossReport r;
  r.value = d.value;
  r.gradient = ValueMap(pred.width, pred.height);
  r.gradient.values = std::move(d.grad);
  r.gradient.mask = d.joint;
  r.active_mask = std::move(d.joint);
  return r;
}

double dlog_transform(double d, const LossConfig& cfg) {
  if (!(cfg.balance_c > 1.0)) {
    raise(ErrorCode::InvalidArgument, "balance_c must be > 1");
  }
  if (!(d > 0.0)) {
    raise(ErrorCode::NonPositiveDepth, "depth must be positive, got " + std::to_string(d));
  }
  return 1.0 - std::log(d) / std::log(cfg.balance_c);
}

namespace {

struct TeacherDetail {
  double value = 0.0;
  std::vector<double> grad;  // vs metric depth
  std::vector<std::uint8_t> active;
};

TeacherDetail teacher_detail(const DepthGrid& pred, const DepthGrid& gt, const LossConfig& cfg,
                             bool synthetic, bool want_grad, Signature* sig) {
  check_same_shape(pred.width, pred.height, gt.width, gt.height);
  const ValueMap inv_p = to_inverse_depth(pred);
  const ValueMap inv_g = to_inverse_depth(gt);

  MaeDetail mae = robust_mae_detail(inv_p, inv_g, cfg, want_grad, sig);
  TeacherDetail out;
  out.value = cfg.alpha * mae.value;
  out.active = std::move(mae.active);

  SsiDetail ssi;
  if (synthetic) {
    ssi = ssi_mage_detail(inv_p, inv_g, cfg, want_grad, sig);
    out.value += cfg.beta * ssi.value;
    out.active = ssi.joint;  // every joint pixel can contribute through the SSI term
  }

  if (want_grad) {
    out.grad.assign(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double g = cfg.alpha * mae.grad[i];
      if (synthetic) g += cfg.beta * ssi.grad[i];
      if (g != 0.0) {
        const double d = pred.depth[i];
        out.grad[i] = g * (-1.0 / (d * d));  // through C = 1/d
      }
    }
  }
  return out;
}

struct StudentDetail {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<std::uint8_t> joint;
};

StudentDetail student_detail(const DepthGrid& pred, const DepthGrid& gt, const LossConfig& cfg,
                             bool want_grad, Signature* sig) {
  check_same_shape(pred.width, pred.height, gt.width, gt.height);
  const double log_c = std::log(cfg.balance_c);

  ValueMap lp(pred.width, pred.height), lg(pred.width, pred.height);
  StudentDetail out;
  out.joint.assign(pred.size(), 0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(pred.mask[i] & gt.mask[i])) continue;
    if (!(pred.depth[i] > 0.0) || !(gt.depth[i] > 0.0)) {
      raise(ErrorCode::NonPositiveDepth, "valid pixel with non-positive depth");
    }
    out.joint[i] = 1;
    lp.values[i] = 1.0 - std::log(pred.depth[i]) / log_c;
    lg.values[i] = 1.0 - std::log(gt.depth[i]) / log_c;
    ++n;
  }
  if (n == 0) {
    raise(ErrorCode::EmptyOverlap, "prediction and ground truth share no valid pixels");
  }
  lp.mask = out.joint;
  lg.mask = out.joint;

  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (out.joint[i]) sum += std::abs(lp.values[i] - lg.values[i]);
  }
  const double term1 = sum / static_cast<double>(n);
  if (sig) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (out.joint[i]) {
        sig->signs.push_back(static_cast<std::int8_t>(sgn(lp.values[i] - lg.values[i])));
      }
    }
  }

  SsiDetail ssi = ssi_mage_detail(lp, lg, cfg, want_grad, sig);
  out.value = cfg.gamma * term1 + cfg.delta * ssi.value;

  if (want_grad) {
    out.grad.assign(pred.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!out.joint[i]) continue;
      double g = cfg.gamma * sgn(lp.values[i] - lg.values[i]) * inv_n + cfg.delta * ssi.grad[i];
      // through Dlog(d) = 1 - ln(d)/ln(C)
      out.grad[i] = g * (-1.0 / (pred.depth[i] * log_c));
    }
  }
  return out;
}

}  // namespace

LossReport teacher_loss(const DepthGrid& pred, const DepthGrid& gt, const LossConfig& cfg,
                        bool synthetic) {
  cfg.validate();
  TeacherDetail d = teacher_detail(pred, gt, cfg, synthetic, true, nullptr);
  LossReport r;
  r.value = d.value;
  r.gradient = ValueMap(pred.width, pred.height);
  r.gradient.values = std::move(d.grad);
  r.gradient.mask = d.active;
  r.active_mask = std::move(d.active);
  return r;
}

LossReport student_loss(const DepthGrid& pred, const DepthGrid& gt, const LossConfig& cfg) {
  cfg.validate();
  StudentDetail d = student_detail(pred, gt, cfg, true, nullptr);
  LossReport r;
  r.value = d.value;
  r.gradient = ValueMap(pred.width, pred.height);
  r.gradient.values = std::move(d.grad);
  r.gradient.mask = d.joint;
  r.active_mask = std::move(d.joint);
  return r;
}

// ---------------------------------------------------------------------------
// finite-difference verification

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kRelFloor = 1e-5;

struct GradcheckCase {
  // Prediction lives either in a ValueMap (inverse-space losses) or a
  // DepthGrid (metric-space losses).
  bool depth_space = false;
  ValueMap pred_map, gt_map;
  DepthGrid pred_grid, gt_grid;
};

GradcheckCase make_case(const std::string& name, int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  GradcheckCase c;
  const auto mask_bit = [&]() -> std::uint8_t { return rng.uniform01() < 0.95 ? 1 : 0; };
  if (name == "robust_mae" || name == "ssi_mage") {
    c.pred_map = ValueMap(w, h);
    c.gt_map = ValueMap(w, h);
    for (std::size_t i = 0; i < c.pred_map.size(); ++i) {
      c.pred_map.values[i] = rng.uniform(0.2, 2.0);
      c.pred_map.mask[i] = mask_bit();
      c.gt_map.values[i] = rng.uniform(0.2, 2.0);
      c.gt_map.mask[i] = mask_bit();
    }
  } else {
    c.depth_space = true;
    const bool student = name == "student_loss";
    const double lo = 0.5;
    const double hi = student ? 300.0 : 10.0;
    c.pred_grid = DepthGrid(w, h);
    c.gt_grid = DepthGrid(w, h);
    for (std::size_t i = 0; i < c.pred_grid.size(); ++i) {
      c.pred_grid.depth[i] = rng.uniform(lo, hi);
      c.pred_grid.mask[i] = mask_bit();
      c.gt_grid.depth[i] = rng.uniform(lo, hi);
      c.gt_grid.mask[i] = mask_bit();
    }
  }
  return c;
}

double eval_case(const std::string& name, const GradcheckCase& c, const LossConfig& cfg,
                 bool want_grad, std::vector<double>* grad, Signature* sig) {
  if (name == "robust_mae") {
    MaeDetail d = robust_mae_detail(c.pred_map, c.gt_map, cfg, want_grad, sig);
    if (grad) *grad = std::move(d.grad);
    return d.value;
  }
  if (name == "ssi_mage") {
    SsiDetail d = ssi_mage_detail(c.pred_map, c.gt_map, cfg, want_grad, sig);
    if (grad) *grad = std::move(d.grad);
    return d.value;
  }
  if (name == "teacher_loss" || name == "teacher_loss_real") {
    TeacherDetail d =
        teacher_detail(c.pred_grid, c.gt_grid, cfg, name == "teacher_loss", want_grad, sig);
    if (grad) *grad = std::move(d.grad);
    return d.value;
  }
  if (name == "student_loss") {
    StudentDetail d = student_detail(c.pred_grid, c.gt_grid, cfg, want_grad, sig);
    if (grad) *grad = std::move(d.grad);
    return d.value;
  }
  raise(ErrorCode::UnknownLoss, "no loss named '" + name + "'");
}

}  // namespace

const std::vector<std::string>& gradcheck_loss_names() {
  static const std::vector<std::string> names{"robust_mae", "ssi_mage", "teacher_loss",
                                              "teacher_loss_real", "student_loss"};
  return names;
}

GradcheckResult gradcheck(const std::string& loss_name, int width, int height,
                          std::uint64_t seed, const LossConfig& cfg) {
  cfg.validate();
  if (std::find(gradcheck_loss_names().begin(), gradcheck_loss_names().end(), loss_name) ==
      gradcheck_loss_names().end()) {
    raise(ErrorCode::UnknownLoss, "no loss named '" + loss_name + "'");
  }
  if (width < 1 || height < 1) {
    raise(ErrorCode::InvalidArgument, "gradcheck shape must be positive");
  }

  GradcheckCase c = make_case(loss_name, width, height, seed);

  std::vector<double> analytic;
  eval_case(loss_name, c, cfg, true, &analytic, nullptr);

  std::vector<double>& pred_values = c.depth_space ? c.pred_grid.depth : c.pred_map.values;
  const std::vector<std::uint8_t> joint =
      c.depth_space
          ? joint_mask(to_value_map(c.pred_grid), to_value_map(c.gt_grid))
          : joint_mask(c.pred_map, c.gt_map);

  GradcheckResult result;
  Signature sig_plus, sig_minus;
  for (std::size_t i = 0; i < pred_values.size(); ++i) {
    if (!joint[i]) continue;
    const double saved = pred_values[i];

    sig_plus = Signature{};
    pred_values[i] = saved + kFdStep;
    const double f_plus = eval_case(loss_name, c, cfg, false, nullptr, &sig_plus);

    sig_minus = Signature{};
    pred_values[i] = saved - kFdStep;
    const double f_minus = eval_case(loss_name, c, cfg, false, nullptr, &sig_minus);

    pred_values[i] = saved;

    if (!(sig_plus == sig_minus)) {
      ++result.skipped;  // perturbation straddles a kink or selection change
      continue;
    }
    const double fd = (f_plus - f_minus) / (2.0 * kFdStep);
    const double a = analytic[i];
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), kRelFloor});
    result.max_rel_err = std::max(result.max_rel_err, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace metricforge
