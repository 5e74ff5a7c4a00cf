#ifndef SVP_COMPOSITOR_HPP
#define SVP_COMPOSITOR_HPP

#include <span>
#include <vector>

#include "svp/imaging.hpp"
#include "svp/tensor.hpp"

namespace svp {

/// Object image (h x w x 3, [0,1]) and its binary silhouette (h x w).
struct ObjectSample {
  Tensor image;
  Tensor mask;

  ObjectSample(Tensor image, Tensor mask);
  std::size_t height() const { return image.dim(0); }
  std::size_t width() const { return image.dim(1); }
  double mask_area() const;
};

struct TransformRanges {
  double scale_min = 0.5, scale_max = 1.0;
  double rotation_deg = 3.0;  // symmetric
  double brightness = 0.3;    // factor in [1 - x, 1 + x]
  double contrast = 0.1;
  double saturation = 0.1;
};

struct TransformParams {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  // Scene position of the object grid center.
  double place_row = 0.0;
  double place_col = 0.0;

  bool operator==(const TransformParams&) const = default;
};

/// (1 - m) * object + m * patch, per channel.
Tensor apply_patch(const Tensor& object, const Tensor& mask, const Tensor& patch);

/// Draws rotation, scale, color factors and a placement that keeps the
/// scaled, rotated object grid inside the scene. The scale is lowered to
/// the largest feasible value when the draw would not fit.
TransformParams sample_transform(Rng& rng, std::size_t scene_h, std::size_t scene_w, std::size_t object_h,
                                 std::size_t object_w, const TransformRanges& ranges = {});

/// Object grid -> scene map: scale and rotate about the grid center, then
/// move the center to the placement.
Affine2 placement_affine(const TransformParams& tp, std::size_t object_h, std::size_t object_w);

/// Brightness, contrast, then saturation, each followed by a clamp to [0,1].
Tensor color_jitter(const Tensor& image, const TransformParams& tp);

struct WarpedObject {
  Tensor image;  // scene-sized, zero outside the warped grid
  Tensor mask;   // soft warped mask
};

/// Color jitter plus the geometric warp into a scene_h x scene_w canvas.
WarpedObject transform_object(const Tensor& image, const Tensor& mask, const TransformParams& tp,
                              std::size_t scene_h, std::size_t scene_w);

/// (1 - M) * scene + M * object, per channel.
Tensor embed(const Tensor& scene, const Tensor& object, const Tensor& mask);

struct Scenario {
  Tensor scene;         // RS
  Tensor benign;        // X_b
  Tensor adversarial;   // X_adv
  Tensor object_mask;   // M_O, binary
  Tensor patch_mask;    // M_p, soft
  TransformParams transform;
  std::size_t scene_index = 0;
};

/// Composites one benign/adversarial pair under a fixed transform. The
/// patch mask is restricted to the object silhouette before warping and to
/// the binarized scene object mask after it.
Scenario build_scenario(const ObjectSample& object, const Tensor& patch, const Tensor& patch_mask,
                        const Tensor& scene, const TransformParams& tp, std::size_t scene_index = 0);

/// B scenarios, each with a uniformly chosen scene and a fresh transform.
std::vector<Scenario> build_batch(const ObjectSample& object, const Tensor& patch, const Tensor& patch_mask,
                                  std::span<const Tensor> scenes, Rng& rng, std::size_t batch,
                                  const TransformRanges& ranges = {});

}  // namespace svp

#endif  // SVP_COMPOSITOR_HPP
