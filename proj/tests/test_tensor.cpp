#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rfdn/ops.hpp"

using namespace rfdn;

namespace {

ConvWeights<float> delta_kernel(index_t c, int k) {
  Tensor<float> kernel(c, c, k, k);
  for (index_t i = 0; i < c; ++i) kernel(i, i, k / 2, k / 2) = 1.0f;
  return ConvWeights<float>(std::move(kernel),
                            std::vector<float>(static_cast<std::size_t>(c)));
}

}  // namespace

TEST_CASE("conv2d all-ones window sums") {
  Tensor<float> x = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  ConvWeights<float> w(Tensor<float>::full({1, 1, 3, 3}, 1.0f), {0.0f});
  Tensor<float> y = conv2d_same(x, w);
  CHECK(y(0, 0, 1, 1) == doctest::Approx(9.0f));
  CHECK(y(0, 0, 0, 0) == doctest::Approx(4.0f));
  CHECK(y(0, 0, 2, 2) == doctest::Approx(4.0f));
  CHECK(y(0, 0, 0, 1) == doctest::Approx(6.0f));
}

TEST_CASE("conv2d delta kernel is the identity, exactly") {
  std::mt19937_64 rng(7);
  for (int k : {1, 3}) {
    Tensor<float> x = oracles::random_tensor<float>({2, 3, 5, 6}, rng);
    ConvWeights<float> w = delta_kernel(3, k);
    Tensor<float> naive = conv2d_naive(x, w.kernel, w.bias.data(), (k - 1) / 2);
    Tensor<float> fast = conv2d_same(x, w);
    for (index_t i = 0; i < x.numel(); ++i) {
      CHECK(fast[i] == x[i]);
      CHECK(naive[i] == x[i]);
    }
  }
}

TEST_CASE("conv2d im2col path matches the naive oracle") {
  std::mt19937_64 rng(11);
  Tensor<float> x = oracles::random_tensor<float>({2, 4, 5, 5}, rng);
  Tensor<float> kernel = oracles::random_tensor<float>({6, 4, 3, 3}, rng);
  std::vector<float> bias(6);
  for (auto& b : bias) b = static_cast<float>(oracles::urand(rng));
  Tensor<float> fast = conv2d_im2col(x, kernel, bias.data(), 1);
  Tensor<float> naive = conv2d_naive(x, kernel, bias.data(), 1);
  double max_diff = 0;
  for (index_t i = 0; i < fast.numel(); ++i)
    max_diff = std::max(max_diff, std::abs(double(fast[i]) - double(naive[i])));
  CHECK(max_diff < 1e-5);
}

TEST_CASE("conv2d is linear at zero bias") {
  std::mt19937_64 rng(13);
  Tensor<float> x = oracles::random_tensor<float>({1, 3, 6, 6}, rng);
  Tensor<float> y = oracles::random_tensor<float>({1, 3, 6, 6}, rng);
  Tensor<float> kernel = oracles::random_tensor<float>({4, 3, 3, 3}, rng);
  const float a = 1.7f, b = -0.6f;
  Tensor<float> mix(x.shape());
  for (index_t i = 0; i < x.numel(); ++i) mix[i] = a * x[i] + b * y[i];
  Tensor<float> lhs = conv2d<float>(mix, kernel, nullptr, 1);
  Tensor<float> cx = conv2d<float>(x, kernel, nullptr, 1);
  Tensor<float> cy = conv2d<float>(y, kernel, nullptr, 1);
  for (index_t i = 0; i < lhs.numel(); ++i)
    CHECK(std::abs(lhs[i] - (a * cx[i] + b * cy[i])) < 1e-5);
}

TEST_CASE("conv2d rejects bad arguments") {
  Tensor<float> x(1, 2, 4, 4);
  Tensor<float> kernel(3, 4, 3, 3);
  CHECK_THROWS_AS(conv2d<float>(x, kernel, nullptr, 1), ConfigError);
  Tensor<float> even(2, 2, 2, 2);
  CHECK_THROWS_AS(conv2d<float>(x, even, nullptr, 0), ConfigError);
  Tensor<float> ok(3, 2, 3, 3);
  CHECK_THROWS_AS(conv2d<float>(x, ok, nullptr, 0), ConfigError);  // wrong pad
}

TEST_CASE("leaky_relu values") {
  Tensor<float> x(1, 1, 1, 2);
  x[0] = 2.0f;
  x[1] = -1.0f;
  Tensor<float> y = leaky_relu(x, 0.05f);
  CHECK(y[0] == 2.0f);
  CHECK(y[1] == doctest::Approx(-0.05f));
  CHECK_THROWS_AS(leaky_relu(x, 1.0f), ConfigError);
  CHECK_THROWS_AS(leaky_relu(x, -0.1f), ConfigError);
}

TEST_CASE("pixel_shuffle ordering and shapes") {
  Tensor<float> x(1, 4, 1, 1);
  for (index_t i = 0; i < 4; ++i) x[i] = static_cast<float>(i + 1);
  Tensor<float> y = pixel_shuffle(x, 2);
  REQUIRE(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y(0, 0, 0, 0) == 1.0f);  // a b / c d
  CHECK(y(0, 0, 0, 1) == 2.0f);
  CHECK(y(0, 0, 1, 0) == 3.0f);
  CHECK(y(0, 0, 1, 1) == 4.0f);

  Tensor<float> big(2, 48, 7, 9);
  CHECK(pixel_shuffle(big, 4).shape() == Shape{2, 3, 28, 36});
  CHECK_THROWS_AS(pixel_shuffle(big, 5), ConfigError);
}

TEST_CASE("pixel_shuffle is a bijection") {
  std::mt19937_64 rng(17);
  Tensor<float> x = oracles::random_tensor<float>({2, 12, 3, 5}, rng);
  Tensor<float> y = pixel_shuffle(x, 2);
  Tensor<float> back = pixel_unshuffle(y, 2);
  REQUIRE(back.shape() == x.shape());
  for (index_t i = 0; i < x.numel(); ++i) CHECK(back[i] == x[i]);

  // Pure permutation: sorted values agree exactly.
  std::vector<float> xv(x.data(), x.data() + x.numel());
  std::vector<float> yv(y.data(), y.data() + y.numel());
  std::sort(xv.begin(), xv.end());
  std::sort(yv.begin(), yv.end());
  CHECK(xv == yv);
}

TEST_CASE("concat_channels layout and slicing") {
  std::mt19937_64 rng(19);
  std::vector<Tensor<float>> parts;
  for (int i = 0; i < 4; ++i)
    parts.push_back(oracles::random_tensor<float>({1, 24, 4, 4}, rng));
  Tensor<float> cat = concat_channels(parts);
  CHECK(cat.shape() == Shape{1, 96, 4, 4});

  Tensor<float> first = slice_channels(cat, 0, 24);
  for (index_t i = 0; i < first.numel(); ++i) CHECK(first[i] == parts[0][i]);

  Tensor<float> alone = concat_channels(std::vector<Tensor<float>>{parts[1]});
  for (index_t i = 0; i < alone.numel(); ++i) CHECK(alone[i] == parts[1][i]);

  std::vector<Tensor<float>> bad;
  bad.push_back(Tensor<float>(1, 2, 4, 4));
  bad.push_back(Tensor<float>(1, 2, 5, 4));
  CHECK_THROWS_AS(concat_channels(bad), ShapeError);
}

TEST_CASE("add basics") {
  std::mt19937_64 rng(23);
  Tensor<float> x = oracles::random_tensor<float>({1, 2, 3, 3}, rng);
  Tensor<float> zero(x.shape());
  Tensor<float> sum = add(x, zero);
  for (index_t i = 0; i < x.numel(); ++i) CHECK(sum[i] == x[i]);

  Tensor<float> neg(x.shape());
  for (index_t i = 0; i < x.numel(); ++i) neg[i] = -x[i];
  Tensor<float> cancel = add(x, neg);
  for (index_t i = 0; i < x.numel(); ++i) CHECK(cancel[i] == 0.0f);

  Tensor<float> y = oracles::random_tensor<float>({1, 2, 3, 3}, rng);
  Tensor<float> xy = add(x, y), yx = add(y, x);
  for (index_t i = 0; i < x.numel(); ++i) CHECK(xy[i] == yx[i]);

  CHECK_THROWS_AS(add(x, Tensor<float>(1, 2, 3, 4)), ShapeError);
}

TEST_CASE("channel_stats_pool") {
  Tensor<float> constant = Tensor<float>::full({1, 1, 4, 4}, 5.0f);
  auto [m1, s1] = channel_stats_pool(constant);
  CHECK(m1[0] == doctest::Approx(5.0f));
  CHECK(s1[0] == doctest::Approx(0.0f));

  Tensor<float> two(1, 1, 1, 2);
  two[0] = 0.0f;
  two[1] = 2.0f;
  auto [m2, s2] = channel_stats_pool(two);
  CHECK(m2[0] == doctest::Approx(1.0f));
  CHECK(s2[0] == doctest::Approx(1.0f));  // population std of {0,2}

  std::mt19937_64 rng(29);
  Tensor<double> x = oracles::random_tensor<double>({2, 3, 5, 7}, rng, 0, 255);
  auto [means, stds] = channel_stats_pool(x);
  for (index_t nc = 0; nc < 6; ++nc) {
    // Independent two-pass recomputation.
    const index_t hw = 35;
    double sum = 0;
    for (index_t i = 0; i < hw; ++i) sum += x[nc * hw + i];
    const double mean = sum / double(hw);
    double var = 0;
    for (index_t i = 0; i < hw; ++i) {
      const double d = x[nc * hw + i] - mean;
      var += d * d;
    }
    CHECK(std::abs(means[nc] - mean) < 1e-6);
    CHECK(std::abs(stds[nc] - std::sqrt(var / hw)) < 1e-6);
  }

  // Same in 32-bit: exact up to float rounding of the result.
  Tensor<float> xf = x.cast<float>();
  auto [fmeans, fstds] = channel_stats_pool(xf);
  for (index_t nc = 0; nc < 6; ++nc) {
    CHECK(std::abs(fmeans[nc] - means[nc]) < 1e-4);
    CHECK(std::abs(fstds[nc] - stds[nc]) < 1e-4);
  }
}

TEST_CASE("im2col conv equals the naive oracle on random small shapes") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const index_t n = 1 + static_cast<index_t>(oracles::urand(rng, 0, 1.999));
    const index_t ci = 1 + static_cast<index_t>(oracles::urand(rng, 0, 7.999));
    const index_t co = 1 + static_cast<index_t>(oracles::urand(rng, 0, 7.999));
    const index_t h = 1 + static_cast<index_t>(oracles::urand(rng, 0, 8.999));
    const index_t w = 1 + static_cast<index_t>(oracles::urand(rng, 0, 8.999));
    const int k = (rng() % 2) ? 3 : 1;
    Tensor<float> x = oracles::random_tensor<float>({n, ci, h, w}, rng);
    Tensor<float> kernel =
        oracles::random_tensor<float>({co, ci, k, k}, rng);
    std::vector<float> bias(static_cast<std::size_t>(co));
    for (auto& b : bias) b = static_cast<float>(oracles::urand(rng));
    Tensor<float> fast = conv2d_im2col(x, kernel, bias.data(), (k - 1) / 2);
    Tensor<float> naive = conv2d_naive(x, kernel, bias.data(), (k - 1) / 2);
    for (index_t i = 0; i < fast.numel(); ++i)
      CHECK(std::abs(fast[i] - naive[i]) < 1e-5);
    CHECK(fast.all_finite());
  }
}

TEST_CASE("sigmoid and scale_channels") {
  Tensor<float> x(1, 2, 1, 1);
  x[0] = 0.0f;
  x[1] = -100.0f;
  Tensor<float> s = sigmoid(x);
  CHECK(s[0] == doctest::Approx(0.5f));
  CHECK(s[1] == doctest::Approx(0.0f));

  std::mt19937_64 rng(37);
  Tensor<float> img = oracles::random_tensor<float>({1, 2, 3, 3}, rng);
  Tensor<float> gate(1, 2, 1, 1);
  gate[0] = 0.5f;
  gate[1] = 2.0f;
  Tensor<float> scaled = scale_channels(img, gate);
  for (index_t c = 0; c < 2; ++c)
    for (index_t i = 0; i < 9; ++i)
      CHECK(scaled[c * 9 + i] == doctest::Approx(img[c * 9 + i] * gate[c]));
}
