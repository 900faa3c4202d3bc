#include "halc/fov.hpp"

#include <cmath>
#include <string>

#include "halc/error.hpp"

namespace halc {

ImageSpec::ImageSpec(double w, double h) : width(w), height(h) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw InvalidParameter("image dimensions must be positive");
  }
}

bool Fov::inside(const ImageSpec& image, double tol) const {
  return center_x - width / 2 >= -tol && center_x + width / 2 <= image.width + tol &&
         center_y - height / 2 >= -tol && center_y + height / 2 <= image.height + tol;
}

Fov Fov::full(const ImageSpec& image) {
  return Fov{image.width, image.height, image.width / 2, image.height / 2};
}

Fov expand_fov(const Fov& base, double lambda, double r) {
  if (!(lambda > -1.0)) {
    throw InvalidParameter("growth factor lambda must exceed -1, got " + std::to_string(lambda));
  }
  if (!base.valid()) throw InvalidParameter("expand_fov: base window has non-positive size");
  const double scale = std::pow(1.0 + lambda, r);
  return Fov{base.width * scale, base.height * scale, base.center_x, base.center_y};
}

FovSampleSet sample_fovs_exponential(const Fov& base, double lambda, int n, const ImageSpec& image,
                                     int first_exponent) {
  if (n < 2) throw InvalidParameter("at least two FOV samples are needed for pairing");
  FovSampleSet out;
  out.samples.reserve(n);
  out.draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int r = first_exponent + i;
    out.samples.push_back(clamp_to_image(expand_fov(base, lambda, r), image));
    out.draws.push_back(r);
  }
  return out;
}

FovSampleSet sample_fovs_normal(const Fov& base, double sigma, int n, Rng& rng,
                                const ImageSpec& image) {
  if (!(sigma > 0.0)) throw InvalidParameter("sigma must be positive");
  if (n < 2) throw InvalidParameter("at least two FOV samples are needed for pairing");
  std::normal_distribution<double> gauss(0.0, sigma);
  FovSampleSet out;
  out.samples.reserve(n);
  out.draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    Fov f;
    do {
      f.width = base.width + gauss(rng);
      f.height = base.height + gauss(rng);
      f.center_x = base.center_x + gauss(rng);
      f.center_y = base.center_y + gauss(rng);
    } while (!f.valid());
    out.draws.push_back(f.width);
    out.samples.push_back(clamp_to_image(f, image));
  }
  return out;
}

FovSampleSet sample_fovs_random(const ImageSpec& image, int n, Rng& rng) {
  if (n < 2) throw InvalidParameter("at least two FOV samples are needed for pairing");
  std::uniform_real_distribution<double> extent(0.05, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FovSampleSet out;
  out.samples.reserve(n);
  out.draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double fw = extent(rng);
    const double fh = extent(rng);
    const double w = fw * image.width;
    const double h = fh * image.height;
    const double cx = w / 2 + unit(rng) * (image.width - w);
    const double cy = h / 2 + unit(rng) * (image.height - h);
    out.samples.push_back(Fov{w, h, cx, cy});
    out.draws.push_back(fw);
  }
  return out;
}

namespace {

void clamp_axis(double& extent, double& center, double limit) {
  if (extent >= limit) {
    extent = limit;
    center = limit / 2;
    return;
  }
  if (center - extent / 2 < 0.0) center = extent / 2;
  if (center + extent / 2 > limit) center = limit - extent / 2;
}

}  // namespace

Fov clamp_to_image(const Fov& fov, const ImageSpec& image) {
  if (!fov.valid()) throw InvalidParameter("clamp_to_image: window has non-positive size");
  Fov out = fov;
  clamp_axis(out.width, out.center_x, image.width);
  clamp_axis(out.height, out.center_y, image.height);
  return out;
}

double fov_distance(const Fov& a, const Fov& b) {
  const double dw = a.width - b.width;
  const double dh = a.height - b.height;
  const double dx = a.center_x - b.center_x;
  const double dy = a.center_y - b.center_y;
  return std::sqrt(dw * dw + dh * dh + dx * dx + dy * dy);
}

}  // namespace halc
