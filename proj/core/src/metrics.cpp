#include "planefield/metrics.hpp"

#include <cmath>
#include <vector>

namespace planefield {

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3) {
    throw ShapeError("metric inputs must be (H, W, C) images");
  }
  if (!a.same_shape(b)) {
    throw ShapeError("metric inputs must share dimensions");
  }
  for (std::int64_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw DomainError("metric inputs must be finite");
    }
  }
}

std::vector<double> gaussian_window() {
  std::vector<double> w(kSsimWindow);
  const double center = (kSsimWindow - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - center;
    w[static_cast<std::size_t>(i)] =
        std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable valid-mode filtering: rows first, then columns.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& window) {
  const int k = static_cast<int>(window.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        acc += window[static_cast<std::size_t>(i)] *
               img[static_cast<std::size_t>(y) * w + x + i];
      }
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        acc += window[static_cast<std::size_t>(i)] *
               rows[static_cast<std::size_t>(y + i) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  double sum = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse == 0.0) {
    return kPsnrCap;
  }
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  const int h = a.dim(0), w = a.dim(1), channels = a.dim(2);
  if (h < kSsimWindow || w < kSsimWindow) {
    throw DomainError("image is smaller than the SSIM window");
  }
  static const std::vector<double> window = gaussian_window();
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> xa(plane), xb(plane), xaa(plane), xbb(plane), xab(plane);
  double total = 0.0;
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double va = a(y, x, c);
        const double vb = b(y, x, c);
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        xa[i] = va;
        xb[i] = vb;
        xaa[i] = va * va;
        xbb[i] = vb * vb;
        xab[i] = va * vb;
      }
    }
    const std::vector<double> mu_a = filter_valid(xa, h, w, window);
    const std::vector<double> mu_b = filter_valid(xb, h, w, window);
    const std::vector<double> e_aa = filter_valid(xaa, h, w, window);
    const std::vector<double> e_bb = filter_valid(xbb, h, w, window);
    const std::vector<double> e_ab = filter_valid(xab, h, w, window);
    double channel_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num =
          (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
      const double den =
          (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
      channel_sum += num / den;
    }
    total += channel_sum / static_cast<double>(mu_a.size());
  }
  return total / channels;
}

}  // namespace planefield
