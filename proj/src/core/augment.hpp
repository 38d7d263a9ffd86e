#pragma once

#include "core/image.hpp"
#include "core/rng.hpp"

namespace scnn {

// Train-split augmentation settings. Flip probabilities, jitter strengths,
// affine ranges and the 13-tap blur follow the training recipe defaults; any
// field can be overridden from the run config.
struct AugConfig {
  float hflip_p{0.7f};
  float vflip_p{0.3f};
  float brightness{0.2f}; // factor drawn from [1-b, 1+b]
  float contrast{0.2f};
  float saturation{0.2f};
  float hue{0.1f};        // shift drawn from [-hue, +hue] of the hue wheel
  float rotate_deg{20.0f};
  float translate{0.1f};  // fraction of width/height per axis
  float shear_deg{10.0f};
  int blur_kernel{13};
  float blur_sigma_min{0.1f};
  float blur_sigma_max{2.0f};
  bool blur{true};
};

// Scale the shorter side to `resize_to` (bilinear, aspect preserved), then
// take the centered crop_to x crop_to window.
Image resize_center_crop(const Image& img, int64_t resize_to = 256, int64_t crop_to = 224);

Image resize_shorter_side(const Image& img, int64_t target);
Image center_crop(const Image& img, int64_t crop_w, int64_t crop_h);

Image hflip(const Image& img);
Image vflip(const Image& img);

// Multiplicative brightness; contrast blends toward the image's mean luma;
// saturation blends toward per-pixel luma; hue rotates in HSV space. Each
// step clamps back to [0,1]. Luma weights are the BT.601 ones.
Image adjust_brightness(const Image& img, float factor);
Image adjust_contrast(const Image& img, float factor);
Image adjust_saturation(const Image& img, float factor);
Image adjust_hue(const Image& img, float shift);

// Rotation, translation (pixels) and x-shear about the image center,
// composed as translate * rotate * shear, sampled bilinearly with zero fill.
Image affine_transform(const Image& img, float rotate_deg, float tx, float ty, float shear_deg);

// Separable Gaussian blur; the kernel is normalized to sum 1 and edges
// clamp-replicate, so outputs stay inside the input's value range.
Image gaussian_blur(const Image& img, int kernel_size, float sigma);

// The full train-time pipeline in fixed order: hflip, vflip, color jitter
// (brightness, contrast, saturation, hue), random affine, Gaussian blur.
// Each step draws from its own child stream of `rng`, so the output depends
// only on the stream, never on evaluation order or thread placement.
// Zero-magnitude steps are skipped entirely and leave pixels untouched.
Image augment(const Image& img, const AugConfig& cfg, Rng rng);

} // namespace scnn
