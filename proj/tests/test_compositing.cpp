#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "planefield/compositing.hpp"
#include "test_util.hpp"

using namespace planefield;
using test::uniform;
using test::uniform01;

namespace {

std::vector<DensitySample> random_samples(std::mt19937_64& rng, int max_n) {
  const int n = 1 + static_cast<int>(uniform01(rng) * max_n);
  std::vector<DensitySample> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    samples.push_back(DensitySample{
        {uniform01(rng), uniform01(rng), uniform01(rng)},
        uniform01(rng) < 0.2 ? 0.0 : uniform(rng, 0.0, 5.0),
        uniform(rng, 0.01, 1.0)});
  }
  return samples;
}

}  // namespace

TEST_SUITE("compositing") {

TEST_CASE("a fully opaque sample returns its own color") {
  const AlphaSample s{{0.3, 0.6, 0.9}, 1.0};
  const CompositeResult r = alpha_composite(std::span(&s, 1));
  CHECK(r.color[0] == 0.3);
  CHECK(r.color[1] == 0.6);
  CHECK(r.color[2] == 0.9);
  CHECK(r.alpha == 1.0);
}

TEST_CASE("the over operator blends near over far") {
  const std::vector<AlphaSample> samples = {
      {{0.2, 0.2, 0.2}, 0.5},
      {{1.0, 1.0, 1.0}, 1.0},
  };
  const CompositeResult r = alpha_composite(samples);
  CHECK(r.color[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(r.alpha == doctest::Approx(1.0));
}

TEST_CASE("fully transparent lists composite to black") {
  const std::vector<AlphaSample> samples = {{{0.7, 0.1, 0.4}, 0.0},
                                            {{0.9, 0.9, 0.9}, 0.0}};
  const CompositeResult r = alpha_composite(samples);
  CHECK(r.color[0] == 0.0);
  CHECK(r.color[1] == 0.0);
  CHECK(r.color[2] == 0.0);
  CHECK(r.alpha == 0.0);
}

TEST_CASE("empty sample lists are black with zero opacity") {
  const CompositeResult a = alpha_composite({});
  CHECK(a.alpha == 0.0);
  CHECK(a.color[0] == 0.0);
  const CompositeResult v = volume_render({});
  CHECK(v.alpha == 0.0);
  CHECK(v.color[2] == 0.0);
}

TEST_CASE("alpha outside [0,1] is rejected") {
  const AlphaSample bad{{0.5, 0.5, 0.5}, 1.5};
  CHECK_THROWS_AS(alpha_composite(std::span(&bad, 1)), DomainError);
  const AlphaSample negative{{0.5, 0.5, 0.5}, -0.1};
  CHECK_THROWS_AS(alpha_composite(std::span(&negative, 1)), DomainError);
}

TEST_CASE("transmittance starts at one and halves after ln2 optical depth") {
  const std::vector<DensitySample> samples = {
      {{0, 0, 0}, std::log(2.0), 1.0},
      {{0, 0, 0}, 1.0, 1.0},
  };
  const std::vector<double> t = transmittance(samples);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == 1.0);
  CHECK(t[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("zero density keeps transmittance at one") {
  const std::vector<DensitySample> samples = {
      {{0, 0, 0}, 0.0, 0.5}, {{0, 0, 0}, 0.0, 0.5}, {{0, 0, 0}, 0.0, 0.5}};
  for (double t : transmittance(samples)) {
    CHECK(t == 1.0);
  }
}

TEST_CASE("transmittance is monotone non-increasing in (0, 1]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto samples = random_samples(rng, 64);
    const std::vector<double> t = transmittance(samples);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t[i] > 0.0);
      CHECK(t[i] <= 1.0);
      if (i > 0) CHECK(t[i] <= t[i - 1]);
    }
  }
}

TEST_CASE("density and interval validation") {
  const DensitySample negative{{0, 0, 0}, -1.0, 0.5};
  CHECK_THROWS_AS(volume_render(std::span(&negative, 1)), DomainError);
  CHECK_THROWS_AS(transmittance(std::span(&negative, 1)), DomainError);
  const DensitySample zero_delta{{0, 0, 0}, 1.0, 0.0};
  CHECK_THROWS_AS(volume_render(std::span(&zero_delta, 1)), DomainError);
  CHECK_THROWS_AS(alpha_from_density(-1.0, 0.5), DomainError);
  CHECK_THROWS_AS(alpha_from_density(1.0, 0.0), DomainError);
}

TEST_CASE("volume rendering of one ln2 sample gives half gray") {
  const DensitySample s{{1.0, 1.0, 1.0}, std::log(2.0), 1.0};
  const CompositeResult r = volume_render(std::span(&s, 1));
  CHECK(r.color[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.color[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.color[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.alpha == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("a saturated occluder hides everything behind it") {
  const std::vector<DensitySample> samples = {
      {{0.25, 0.5, 0.75}, 50.0, 1.0},
      {{1.0, 0.0, 0.0}, 3.0, 1.0},
  };
  const CompositeResult r = volume_render(samples);
  CHECK(std::abs(r.color[0] - 0.25) < 1e-9);
  CHECK(std::abs(r.color[1] - 0.5) < 1e-9);
  CHECK(std::abs(r.color[2] - 0.75) < 1e-9);
}

TEST_CASE("alpha_from_density closed forms") {
  CHECK(alpha_from_density(0.0, 1.0) == 0.0);
  CHECK(alpha_from_density(std::log(2.0), 1.0) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(alpha_from_density(1e6, 1.0) == doctest::Approx(1.0));
  // Monotone in both arguments.
  CHECK(alpha_from_density(2.0, 1.0) > alpha_from_density(1.0, 1.0));
  CHECK(alpha_from_density(1.0, 2.0) > alpha_from_density(1.0, 1.0));
}

TEST_CASE("volume rendering equals the over operator on derived alphas") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto samples = random_samples(rng, 64);
    const CompositeResult direct = volume_render(samples);
    std::vector<AlphaSample> alphas;
    alphas.reserve(samples.size());
    for (const DensitySample& s : samples) {
      alphas.push_back(
          AlphaSample{s.color, alpha_from_density(s.sigma, s.delta)});
    }
    const CompositeResult over = alpha_composite(alphas);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(direct.color[static_cast<std::size_t>(c)] -
                     over.color[static_cast<std::size_t>(c)]) < 1e-6);
    }
    CHECK(std::abs(direct.alpha - over.alpha) < 1e-6);
  }
}

TEST_CASE("per-sample weights are non-negative and sum to 1 - T_final") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const auto samples = random_samples(rng, 32);
    const std::vector<double> t = transmittance(samples);
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double w =
          t[i] * alpha_from_density(samples[i].sigma, samples[i].delta);
      CHECK(w >= 0.0);
      weight_sum += w;
    }
    const double final_t =
        t.back() * std::exp(-samples.back().sigma * samples.back().delta);
    CHECK(std::abs(weight_sum - (1.0 - final_t)) < 1e-12);
    const CompositeResult r = volume_render(samples);
    CHECK(r.alpha >= 0.0);
    CHECK(r.alpha <= 1.0);
  }
}

TEST_CASE("inserting a zero-density sample changes nothing") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    auto samples = random_samples(rng, 16);
    const CompositeResult before = volume_render(samples);
    const std::size_t where =
        static_cast<std::size_t>(uniform01(rng) * samples.size());
    samples.insert(samples.begin() + static_cast<std::ptrdiff_t>(where),
                   DensitySample{{0.9, 0.9, 0.9}, 0.0, 0.5});
    const CompositeResult after = volume_render(samples);
    CHECK(before.color[0] == after.color[0]);
    CHECK(before.color[1] == after.color[1]);
    CHECK(before.color[2] == after.color[2]);
    CHECK(before.alpha == after.alpha);
  }
}

TEST_CASE("compositing a prefix then the rest reproduces the whole") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const auto samples = random_samples(rng, 32);
    const CompositeResult whole = volume_render(samples);
    const std::size_t k =
        static_cast<std::size_t>(uniform01(rng) * samples.size());
    const std::span<const DensitySample> all(samples);
    const CompositeResult head = volume_render(all.subspan(0, k));
    double t_after_head = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      t_after_head *= std::exp(-samples[i].sigma * samples[i].delta);
    }
    const CompositeResult tail =
        volume_render(all.subspan(k), t_after_head);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs((head.color[static_cast<std::size_t>(c)] +
                      tail.color[static_cast<std::size_t>(c)]) -
                     whole.color[static_cast<std::size_t>(c)]) < 1e-12);
    }
    CHECK(std::abs((head.alpha + tail.alpha) - whole.alpha) < 1e-12);
  }
}

}  // TEST_SUITE
