#include <doctest.h>

#include <cmath>
#include <random>

#include "planefield/metrics.hpp"
#include "test_util.hpp"

using namespace planefield;
using test::uniform01;

namespace {

Tensor random_image(std::mt19937_64& rng, int h, int w) {
  Tensor img({h, w, 3});
  for (std::int64_t i = 0; i < img.size(); ++i) {
    img[i] = uniform01(rng);
  }
  return img;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("identical images hit the PSNR cap") {
  std::mt19937_64 rng(201);
  const Tensor img = random_image(rng, 16, 16);
  CHECK(psnr(img, img) == 99.0);
}

TEST_CASE("a known MSE gives the closed-form PSNR") {
  // b = a + 0.1 everywhere -> MSE exactly 0.01 -> 20 dB.
  std::mt19937_64 rng(202);
  Tensor a({16, 16, 3});
  Tensor b({16, 16, 3});
  for (std::int64_t i = 0; i < a.size(); ++i) {
    a[i] = 0.9 * uniform01(rng);
    b[i] = a[i] + 0.1;
  }
  CHECK(std::abs(psnr(a, b) - 20.0) < 1e-9);
}

TEST_CASE("black versus white scores zero dB") {
  const Tensor black({8, 8, 3});
  const Tensor white = Tensor::full({8, 8, 3}, 1.0);
  CHECK(psnr(black, white) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr is symmetric and decreases under perturbation") {
  std::mt19937_64 rng(203);
  const Tensor a = random_image(rng, 12, 12);
  Tensor b = a;
  b(3, 4, 1) = b(3, 4, 1) < 0.5 ? b(3, 4, 1) + 0.25 : b(3, 4, 1) - 0.25;
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK(psnr(a, b) < psnr(a, a));
}

TEST_CASE("psnr validates shapes and values") {
  const Tensor a({8, 8, 3});
  const Tensor b({8, 9, 3});
  CHECK_THROWS_AS(psnr(a, b), ShapeError);
  Tensor c = a;
  c[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(psnr(a, c), DomainError);
}

TEST_CASE("ssim of an image with itself is one") {
  std::mt19937_64 rng(204);
  const Tensor img = random_image(rng, 24, 24);
  CHECK(std::abs(ssim(img, img) - 1.0) < 1e-9);
}

TEST_CASE("constant images match the zero-variance closed form") {
  const Tensor a = Tensor::full({16, 16, 3}, 0.5);
  const Tensor b = Tensor::full({16, 16, 3}, 0.25);
  const double c1 = 1e-4;  // (K1 * L)^2
  const double expected =
      (2.0 * 0.5 * 0.25 + c1) / (0.5 * 0.5 + 0.25 * 0.25 + c1);
  CHECK(std::abs(ssim(a, b) - expected) < 1e-6);
}

TEST_CASE("an inverted image scores below one") {
  std::mt19937_64 rng(205);
  Tensor a = random_image(rng, 16, 16);
  a(0, 0, 0) = 0.9;  // keep the pair distinguishable
  Tensor inverted = a;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    inverted[i] = 1.0 - a[i];
  }
  CHECK(ssim(a, inverted) < 1.0);
}

TEST_CASE("ssim is symmetric and bounded") {
  std::mt19937_64 rng(206);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_image(rng, 14, 18);
    const Tensor b = random_image(rng, 14, 18);
    const double forward = ssim(a, b);
    const double backward = ssim(b, a);
    CHECK(std::abs(forward - backward) < 1e-9);
    CHECK(forward >= -1.0);
    CHECK(forward <= 1.0);
  }
}

TEST_CASE("ssim rejects images smaller than the window") {
  const Tensor small({8, 8, 3});
  CHECK_THROWS_AS(ssim(small, small), DomainError);
  const Tensor thin({32, 10, 3});
  CHECK_THROWS_AS(ssim(thin, thin), DomainError);
}

}  // TEST_SUITE
