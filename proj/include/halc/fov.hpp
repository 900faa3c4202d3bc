#pragma once

#include <vector>

#include "halc/rng.hpp"

namespace halc {

struct ImageSpec {
  double width = 0.0;
  double height = 0.0;

  ImageSpec() = default;
  ImageSpec(double w, double h);

  double area() const { return width * height; }
};

/// A rectangular visual context window, stored as size plus 2-D center (pixels).
struct Fov {
  double width = 0.0;
  double height = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;

  double area() const { return width * height; }
  bool valid() const { return width > 0.0 && height > 0.0; }
  bool inside(const ImageSpec& image, double tol = 1e-9) const;

  /// The window covering the whole image.
  static Fov full(const ImageSpec& image);

  friend bool operator==(const Fov&, const Fov&) = default;
};

struct FovSampleSet {
  std::vector<Fov> samples;
  /// Exponent r (deterministic expansion) or the raw draw that produced each
  /// sample. Normal sampling stores the drawn width here.
  std::vector<double> draws;
};

/// ((1+lambda)^r w, (1+lambda)^r h) around the same center. Not clamped.
Fov expand_fov(const Fov& base, double lambda, double r);

/// n windows at consecutive integer exponents first_exponent, ..., first_exponent+n-1.
FovSampleSet sample_fovs_exponential(const Fov& base, double lambda, int n, const ImageSpec& image,
                                     int first_exponent = -1);

/// Component-wise N(base, sigma^2) draws over (w, h, cx, cy). Draws with a
/// non-positive dimension are redrawn.
FovSampleSet sample_fovs_normal(const Fov& base, double sigma, int n, Rng& rng,
                                const ImageSpec& image);

/// Uniform windows fully inside the image; extents uniform in [0.05, 1.0] of the image.
FovSampleSet sample_fovs_random(const ImageSpec& image, int n, Rng& rng);

/// Translate first, then shrink a dimension only when it exceeds the image.
Fov clamp_to_image(const Fov& fov, const ImageSpec& image);

/// Euclidean norm of (dw, dh, dcx, dcy).
double fov_distance(const Fov& a, const Fov& b);

}  // namespace halc
