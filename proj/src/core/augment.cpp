#include "core/augment.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace scnn {

namespace {

constexpr double kPi = 3.14159265358979323846;

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

// Bilinear sample with half-pixel centers; out-of-range coordinates clamp.
float sample_bilinear_clamped(const Image& img, double x, double y, int64_t c) {
  x = std::min(std::max(x, 0.0), static_cast<double>(img.width - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(img.height - 1));
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t x1 = std::min(x0 + 1, img.width - 1);
  const int64_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = (1.0 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
  const double bot = (1.0 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

// Bilinear sample where out-of-bounds neighbors contribute zero.
float sample_bilinear_zero(const Image& img, double x, double y, int64_t c) {
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      const int64_t xx = x0 + dx, yy = y0 + dy;
      if (xx < 0 || xx >= img.width || yy < 0 || yy >= img.height) continue;
      const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      acc += wgt * img.at(yy, xx, c);
    }
  return static_cast<float>(acc);
}

} // namespace

Image resize_shorter_side(const Image& img, int64_t target) {
  if (img.width < 1 || img.height < 1) raise(ErrorCode::data, "resize: empty image");
  if (target < 1) raise(ErrorCode::config, "resize: target must be >= 1");
  int64_t nw, nh;
  if (img.width <= img.height) {
    nw = target;
    nh = std::max<int64_t>(1, std::llround(static_cast<double>(img.height) * target / img.width));
  } else {
    nh = target;
    nw = std::max<int64_t>(1, std::llround(static_cast<double>(img.width) * target / img.height));
  }
  if (nw == img.width && nh == img.height) return img;
  Image out(nw, nh);
  const double sx = static_cast<double>(img.width) / static_cast<double>(nw);
  const double sy = static_cast<double>(img.height) / static_cast<double>(nh);
  for (int64_t y = 0; y < nh; ++y)
    for (int64_t x = 0; x < nw; ++x) {
      const double srcx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      const double srcy = (static_cast<double>(y) + 0.5) * sy - 0.5;
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = sample_bilinear_clamped(img, srcx, srcy, c);
    }
  return out;
}

Image center_crop(const Image& img, int64_t crop_w, int64_t crop_h) {
  if (crop_w > img.width || crop_h > img.height)
    raise(ErrorCode::shape, "center_crop: crop larger than image");
  const int64_t ox = (img.width - crop_w) / 2;
  const int64_t oy = (img.height - crop_h) / 2;
  Image out(crop_w, crop_h);
  for (int64_t y = 0; y < crop_h; ++y)
    for (int64_t x = 0; x < crop_w; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y + oy, x + ox, c);
  return out;
}

Image resize_center_crop(const Image& img, int64_t resize_to, int64_t crop_to) {
  return center_crop(resize_shorter_side(img, resize_to), crop_to, crop_to);
}

Image hflip(const Image& img) {
  Image out(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image vflip(const Image& img) {
  Image out(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Image adjust_brightness(const Image& img, float factor) {
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.px.size(); ++i) out.px[i] = clamp01(img.px[i] * factor);
  return out;
}

Image adjust_contrast(const Image& img, float factor) {
  double acc = 0.0;
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) acc += luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
  const float mean = static_cast<float>(acc / static_cast<double>(img.width * img.height));
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.px.size(); ++i)
    out.px[i] = clamp01(factor * img.px[i] + (1.0f - factor) * mean);
  return out;
}

Image adjust_saturation(const Image& img, float factor) {
  Image out(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      const float l = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      for (int64_t c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp01(factor * img.at(y, x, c) + (1.0f - factor) * l);
    }
  return out;
}

Image adjust_hue(const Image& img, float shift) {
  Image out(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      const float r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
      const float delta = mx - mn;
      float h = 0.0f;
      if (delta > 0.0f) {
        if (mx == r)
          h = std::fmod((g - b) / delta, 6.0f);
        else if (mx == g)
          h = (b - r) / delta + 2.0f;
        else
          h = (r - g) / delta + 4.0f;
        h /= 6.0f;
        if (h < 0.0f) h += 1.0f;
      }
      const float s = mx > 0.0f ? delta / mx : 0.0f;
      const float v = mx;

      h = h + shift;
      h -= std::floor(h);

      const float hh = h * 6.0f;
      const int sector = std::min(5, static_cast<int>(hh));
      const float f = hh - static_cast<float>(sector);
      const float p = v * (1.0f - s);
      const float q = v * (1.0f - s * f);
      const float t = v * (1.0f - s * (1.0f - f));
      float nr = v, ng = v, nb = v;
      switch (sector) {
        case 0: nr = v; ng = t; nb = p; break;
        case 1: nr = q; ng = v; nb = p; break;
        case 2: nr = p; ng = v; nb = t; break;
        case 3: nr = p; ng = q; nb = v; break;
        case 4: nr = t; ng = p; nb = v; break;
        case 5: nr = v; ng = p; nb = q; break;
      }
      out.at(y, x, 0) = clamp01(nr);
      out.at(y, x, 1) = clamp01(ng);
      out.at(y, x, 2) = clamp01(nb);
    }
  return out;
}

Image affine_transform(const Image& img, float rotate_deg, float tx, float ty, float shear_deg) {
  const double theta = static_cast<double>(rotate_deg) * kPi / 180.0;
  const double shear = std::tan(static_cast<double>(shear_deg) * kPi / 180.0);
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  // Forward map about the center: p' = T(t) R(theta) SH(shear) (p - c) + c.
  // Output pixels pull from the inverse: p = SH^-1 R^-1 (p' - c - t) + c.
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  Image out(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx - static_cast<double>(tx);
      const double dy = static_cast<double>(y) - cy - static_cast<double>(ty);
      const double rx = cos_t * dx + sin_t * dy;  // R(-theta)
      const double ry = -sin_t * dx + cos_t * dy;
      const double sx = rx - shear * ry;          // SH(-shear), x-axis shear
      const double sy = ry;
      const double srcx = sx + cx;
      const double srcy = sy + cy;
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = sample_bilinear_zero(img, srcx, srcy, c);
    }
  return out;
}

Image gaussian_blur(const Image& img, int kernel_size, float sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    raise(ErrorCode::config, "gaussian_blur: kernel size must be odd and >= 1");
  if (!(sigma > 0.0f)) raise(ErrorCode::config, "gaussian_blur: sigma must be > 0");
  const int half = kernel_size / 2;
  std::vector<double> k(static_cast<size_t>(kernel_size));
  double sum = 0.0;
  for (int i = 0; i < kernel_size; ++i) {
    const double d = static_cast<double>(i - half);
    k[static_cast<size_t>(i)] = std::exp(-(d * d) / (2.0 * static_cast<double>(sigma) * sigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (double& v : k) v /= sum;

  auto clampi = [](int64_t v, int64_t hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
  Image tmp(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < kernel_size; ++i)
          acc += k[static_cast<size_t>(i)] * img.at(y, clampi(x + i - half, img.width), c);
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
  Image out(img.width, img.height);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < kernel_size; ++i)
          acc += k[static_cast<size_t>(i)] * tmp.at(clampi(y + i - half, img.height), x, c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image augment(const Image& img, const AugConfig& cfg, Rng rng) {
  Image out = img;
  if (cfg.hflip_p > 0 && rng.child(rng_label::hflip).next_double() < cfg.hflip_p) out = hflip(out);
  if (cfg.vflip_p > 0 && rng.child(rng_label::vflip).next_double() < cfg.vflip_p) out = vflip(out);
  {
    Rng jr = rng.child(rng_label::jitter);
    if (cfg.brightness > 0)
      out = adjust_brightness(out, static_cast<float>(jr.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness)));
    if (cfg.contrast > 0)
      out = adjust_contrast(out, static_cast<float>(jr.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast)));
    if (cfg.saturation > 0)
      out = adjust_saturation(out, static_cast<float>(jr.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation)));
    if (cfg.hue > 0) out = adjust_hue(out, static_cast<float>(jr.uniform(-cfg.hue, cfg.hue)));
  }
  if (cfg.rotate_deg > 0 || cfg.translate > 0 || cfg.shear_deg > 0) {
    Rng ar = rng.child(rng_label::affine);
    const float deg = static_cast<float>(ar.uniform(-cfg.rotate_deg, cfg.rotate_deg));
    const float tx =
        static_cast<float>(ar.uniform(-1.0, 1.0) * cfg.translate * static_cast<double>(out.width));
    const float ty =
        static_cast<float>(ar.uniform(-1.0, 1.0) * cfg.translate * static_cast<double>(out.height));
    const float sh = static_cast<float>(ar.uniform(-cfg.shear_deg, cfg.shear_deg));
    out = affine_transform(out, deg, tx, ty, sh);
  }
  if (cfg.blur) {
    Rng br = rng.child(rng_label::blur);
    const float sigma = static_cast<float>(br.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
    out = gaussian_blur(out, cfg.blur_kernel, sigma);
  }
  return out;
}

} // namespace scnn
