#include "svp/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svp {

ObjectSample::ObjectSample(Tensor img, Tensor m) : image(std::move(img)), mask(std::move(m)) {
  if (image.rank() != 3 || image.dim(2) != 3) throw std::invalid_argument("object image must be H x W x 3");
  if (mask.rank() != 2 || mask.dim(0) != image.dim(0) || mask.dim(1) != image.dim(1)) {
    throw std::invalid_argument("object mask dims must equal image dims");
  }
  for (double v : mask.data()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("object mask must be binary");
  }
}

double ObjectSample::mask_area() const {
  double s = 0.0;
  for (double v : mask.data()) s += v;
  return s;
}

Tensor apply_patch(const Tensor& object, const Tensor& mask, const Tensor& patch) {
  if (object.shape() != patch.shape()) throw std::invalid_argument("apply_patch: patch dims must equal object dims");
  if (mask.rank() != 2 || object.rank() != 3 || mask.dim(0) != object.dim(0) || mask.dim(1) != object.dim(1)) {
    throw std::invalid_argument("apply_patch: mask dims must equal object spatial dims");
  }
  const Tensor m = broadcast_channels(mask, object.dim(2));
  return (1.0 - m) * object + m * patch;
}

namespace {

struct Extent {
  double row, col;
};

Extent half_extent(double scale, double rotation_deg, std::size_t h, std::size_t w) {
  const double th = rotation_deg * M_PI / 180.0;
  const double c = std::fabs(std::cos(th)), s = std::fabs(std::sin(th));
  const double hr = (static_cast<double>(h) - 1.0) / 2.0, hc = (static_cast<double>(w) - 1.0) / 2.0;
  return {scale * (c * hr + s * hc), scale * (s * hr + c * hc)};
}

double max_feasible_scale(double rotation_deg, std::size_t H, std::size_t W, std::size_t h, std::size_t w) {
  const Extent unit = half_extent(1.0, rotation_deg, h, w);
  const double lim_r = (static_cast<double>(H) - 1.0) / 2.0, lim_c = (static_cast<double>(W) - 1.0) / 2.0;
  double s = 1e300;
  if (unit.row > 0) s = std::min(s, lim_r / unit.row);
  if (unit.col > 0) s = std::min(s, lim_c / unit.col);
  return s;
}

}  // namespace

TransformParams sample_transform(Rng& rng, std::size_t H, std::size_t W, std::size_t h, std::size_t w,
                                 const TransformRanges& ranges) {
  if (h > H || w > W) throw std::invalid_argument("sample_transform: object larger than scene");
  const double worst = max_feasible_scale(ranges.rotation_deg, H, W, h, w);
  if (worst < ranges.scale_min - 1e-12) {
    throw std::invalid_argument("sample_transform: object does not fit the scene at the minimum scale");
  }
  TransformParams tp;
  tp.rotation_deg = rng.uniform(-ranges.rotation_deg, ranges.rotation_deg);
  tp.scale = rng.uniform(ranges.scale_min, ranges.scale_max);
  tp.scale = std::min(tp.scale, max_feasible_scale(tp.rotation_deg, H, W, h, w));
  tp.brightness = rng.uniform(1.0 - ranges.brightness, 1.0 + ranges.brightness);
  tp.contrast = rng.uniform(1.0 - ranges.contrast, 1.0 + ranges.contrast);
  tp.saturation = rng.uniform(1.0 - ranges.saturation, 1.0 + ranges.saturation);
  const Extent e = half_extent(tp.scale, tp.rotation_deg, h, w);
  const double rmax = std::max(e.row, static_cast<double>(H) - 1.0 - e.row);
  const double cmax = std::max(e.col, static_cast<double>(W) - 1.0 - e.col);
  tp.place_row = rng.uniform(e.row, rmax);
  tp.place_col = rng.uniform(e.col, cmax);
  return tp;
}

Affine2 placement_affine(const TransformParams& tp, std::size_t h, std::size_t w) {
  const double cr = (static_cast<double>(h) - 1.0) / 2.0, cc = (static_cast<double>(w) - 1.0) / 2.0;
  const double th = tp.rotation_deg * M_PI / 180.0;
  const double c = std::cos(th) * tp.scale, s = std::sin(th) * tp.scale;
  // row' = c*dr + s*dc + place_row;  col' = -s*dr + c*dc + place_col
  return Affine2::translation(-cr, -cc).then({{c, s, tp.place_row, -s, c, tp.place_col}});
}

Tensor color_jitter(const Tensor& image, const TransformParams& tp) {
  static constexpr double kLuma[3] = {0.299, 0.587, 0.114};
  Tensor v = clamp(image * tp.brightness, 0.0, 1.0);
  v = clamp((v - 0.5) * tp.contrast + 0.5, 0.0, 1.0);
  const Tensor gray = broadcast_channels(combine_channels(v, kLuma), 3);
  return clamp(gray + (v - gray) * tp.saturation, 0.0, 1.0);
}

WarpedObject transform_object(const Tensor& image, const Tensor& mask, const TransformParams& tp,
                              std::size_t scene_h, std::size_t scene_w) {
  const Affine2 a = placement_affine(tp, image.dim(0), image.dim(1));
  return {grid_sample_bilinear(color_jitter(image, tp), a, scene_h, scene_w),
          grid_sample_bilinear(mask, a, scene_h, scene_w)};
}

Tensor embed(const Tensor& scene, const Tensor& object, const Tensor& mask) {
  if (scene.shape() != object.shape()) throw std::invalid_argument("embed: object dims must equal scene dims");
  if (mask.rank() != 2 || mask.dim(0) != scene.dim(0) || mask.dim(1) != scene.dim(1)) {
    throw std::invalid_argument("embed: mask dims must equal scene spatial dims");
  }
  const Tensor m = broadcast_channels(mask, scene.dim(2));
  return (1.0 - m) * scene + m * object;
}

Scenario build_scenario(const ObjectSample& object, const Tensor& patch, const Tensor& patch_mask,
                        const Tensor& scene, const TransformParams& tp, std::size_t scene_index) {
  if (scene.rank() != 3 || scene.dim(2) != 3) throw std::invalid_argument("scene must be H x W x 3");
  if (patch_mask.shape() != object.mask.shape()) throw std::invalid_argument("patch mask must match the object grid");
  const std::size_t H = scene.dim(0), W = scene.dim(1);
  const Affine2 a = placement_affine(tp, object.height(), object.width());

  // Color factors act per pixel, so jittering object and patch separately
  // matches jittering the composite wherever the mask is 0 or 1.
  const Tensor patch_on_object = patch_mask * object.mask;
  const Tensor colored_object = color_jitter(object.image, tp);
  const Tensor adv_object = apply_patch(colored_object, patch_on_object, color_jitter(patch, tp));

  const Tensor warped_benign = grid_sample_bilinear(colored_object, a, H, W);
  const Tensor warped_adv = grid_sample_bilinear(adv_object, a, H, W);
  const Tensor warped_silhouette = grid_sample_bilinear(object.mask, a, H, W);

  std::vector<double> mo(H * W);
  for (std::size_t k = 0; k < mo.size(); ++k) mo[k] = warped_silhouette[k] >= 0.5 ? 1.0 : 0.0;
  const Tensor M_O = Tensor::from({H, W}, std::move(mo));

  Scenario s;
  s.scene = scene;
  s.object_mask = M_O;
  s.patch_mask = grid_sample_bilinear(patch_on_object, a, H, W) * M_O;
  s.benign = embed(scene, warped_benign, M_O);
  s.adversarial = embed(scene, warped_adv, M_O);
  s.transform = tp;
  s.scene_index = scene_index;
  return s;
}

std::vector<Scenario> build_batch(const ObjectSample& object, const Tensor& patch, const Tensor& patch_mask,
                                  std::span<const Tensor> scenes, Rng& rng, std::size_t batch,
                                  const TransformRanges& ranges) {
  if (scenes.empty()) throw std::invalid_argument("build_batch: empty scene list");
  if (batch == 0) throw std::invalid_argument("build_batch: batch size must be >= 1");
  std::vector<Scenario> out;
  out.reserve(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    const std::size_t idx = rng.below(scenes.size());
    const Tensor& scene = scenes[idx];
    const TransformParams tp =
        sample_transform(rng, scene.dim(0), scene.dim(1), object.height(), object.width(), ranges);
    out.push_back(build_scenario(object, patch, patch_mask, scene, tp, idx));
  }
  return out;
}

}  // namespace svp
