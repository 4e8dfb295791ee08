#include "comir/edt.hpp"
#include "comir/metrics.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace comir;

namespace {

Image random_image(int w, int h, std::uint64_t seed) { return make_noise(w, h, seed); }

Image map(const Image& a, double s, double t) {
  Image b = a;
  for (double& v : b.pixels) v = s * v + t;
  return b;
}

Image with_mask(Image img, std::uint64_t seed, double keep = 0.8) {
  Rng rng(seed);
  std::vector<std::uint8_t> m(img.size());
  for (auto& v : m) v = rng.uniform() < keep;
  img.mask = m;
  return img;
}

}  // namespace

TEST(Mse, Examples) {
  const Image a = random_image(8, 8, 1);
  EXPECT_EQ(image_mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(image_mse(Image(4, 3, 0.0), Image(4, 3, 0.5)), 0.25);
}

TEST(Mse, MatchesNaiveLoopAndIsSymmetric) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Image a = random_image(8, 8, s), b = random_image(8, 8, s + 100);
    EXPECT_NEAR(image_mse(a, b), oracle::mse(a, b), 1e-15);
    EXPECT_EQ(image_mse(a, b), image_mse(b, a));
    const Image ma = with_mask(a, s), mb = with_mask(b, s + 7);
    EXPECT_NEAR(image_mse(ma, mb), oracle::mse(ma, mb), 1e-15);
  }
}

TEST(Mse, Errors) {
  EXPECT_THROW(image_mse(Image(3, 3), Image(3, 4)), DataError);
  Image a(2, 2), b(2, 2);
  a.mask = std::vector<std::uint8_t>(4, 0);
  EXPECT_THROW(image_mse(a, b), DataError);
  b(1, 1) = NAN;
  EXPECT_THROW(image_mse(Image(2, 2), b), DomainError);
}

TEST(Correlation, Examples) {
  const Image a = random_image(9, 7, 3);
  EXPECT_NEAR(image_correlation(a, a), 1.0, 1e-14);
  EXPECT_NEAR(image_correlation(a, map(a, -1.0, 1.0)), -1.0, 1e-14);
  EXPECT_NEAR(image_correlation(a, map(a, 0.3, 0.2)), 1.0, 1e-14);
  EXPECT_NEAR(image_correlation(a, map(a, -2.5, 0.1)), -1.0, 1e-14);
}

TEST(Correlation, MatchesOracleAndIsBounded) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Image a = random_image(16, 16, s), b = random_image(16, 16, s + 50);
    const double c = image_correlation(a, b);
    EXPECT_NEAR(c, oracle::correlation(a, b), 1e-10);
    EXPECT_NEAR(c, image_correlation(b, a), 1e-15);
    EXPECT_LE(std::fabs(c), 1.0);
  }
}

TEST(Correlation, ConstantImageIsUndefined) {
  EXPECT_THROW(image_correlation(Image(4, 4, 0.3), random_image(4, 4, 1)), DomainError);
}

TEST(Ssim, Examples) {
  const Image a = random_image(16, 16, 4);
  EXPECT_NEAR(image_ssim(a, a), 1.0, 1e-12);
  EXPECT_LT(image_ssim(a, map(a, -1.0, 1.0)), 1.0);
  EXPECT_THROW(image_ssim(Image(10, 16), Image(10, 16)), DataError);
  EXPECT_THROW(image_ssim(a, a, {10, 1.5, 1.0}), ContractError);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Image a = random_image(16, 16, s), b = random_image(16, 16, s + 31);
    EXPECT_NEAR(image_ssim(a, b), oracle::ssim(a, b), 1e-10);
    EXPECT_NEAR(image_ssim(a, b), image_ssim(b, a), 1e-14);
    EXPECT_LE(image_ssim(a, b), 1.0);
  }
  const Image a = random_image(20, 17, 8), b = random_image(20, 17, 9);
  EXPECT_NEAR(image_ssim(a, b, {7, 1.0, 2.0}), oracle::ssim(a, b, 7, 1.0, 2.0), 1e-10);
}

TEST(Ssim, MaskedWindowsMustBeFullyValid) {
  Image a = random_image(24, 24, 1), b = random_image(24, 24, 2);
  // Invalidate the right half: only windows lying fully in x < 12 count.
  std::vector<std::uint8_t> m(a.size(), 1);
  for (int y = 0; y < 24; ++y)
    for (int x = 12; x < 24; ++x) m[a.index(x, y)] = 0;
  a.mask = m;
  Image ca(12, 24), cb(12, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 12; ++x) {
      ca(x, y) = a(x, y);
      cb(x, y) = b(x, y);
    }
  EXPECT_NEAR(image_ssim(a, b), oracle::ssim(ca, cb), 1e-10);
}

TEST(Edt, MatchesBruteForce) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    Rng rng(s);
    const int w = 13, h = 9;
    std::vector<std::uint8_t> f(std::size_t(w * h));
    for (auto& v : f) v = rng.uniform() < 0.1;
    f[std::size_t(rng.index(f.size()))] = 1;
    const auto d = distance_transform(f, w, h);
    const auto o = oracle::distance_transform(f, w, h);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], o[i], 1e-12);
  }
  const auto empty = distance_transform(std::vector<std::uint8_t>(6, 0), 3, 2);
  for (double v : empty) EXPECT_TRUE(std::isinf(v));
}

TEST(AlphaAmd, SinglePixelGeometry) {
  Image a(6, 6, 0.0), b(6, 6, 0.0);
  a(0, 0) = 1.0;
  b(3, 4) = 1.0;
  EXPECT_NEAR(alpha_amd(a, b, {10.0, 1}), 5.0, 1e-12);
  EXPECT_NEAR(alpha_amd(b, a, {10.0, 1}), 5.0, 1e-12);
  EXPECT_NEAR(alpha_amd(a, b, {2.0, 1}), 2.0, 1e-12);
}

TEST(AlphaAmd, IdenticalIsZero) {
  const Image a = random_image(20, 20, 3);
  EXPECT_EQ(alpha_amd(a, a), 0.0);
  EXPECT_EQ(alpha_amd(Image(5, 5, 0.0), Image(5, 5, 0.0)), 0.0);
}

TEST(AlphaAmd, SaturatesWhenStructureIsFarAway) {
  Image a(60, 5, 0.0), b(60, 5, 0.0);
  for (int y = 0; y < 5; ++y) {
    a(0, y) = 1.0;
    b(59, y) = 1.0;
  }
  EXPECT_NEAR(alpha_amd(a, b, {20.0, 8}), 20.0, 1e-12);
  // Empty target level set also costs alpha per point.
  EXPECT_NEAR(alpha_amd(a, Image(60, 5, 0.0), {7.0, 4}), 3.5, 1e-12);
}

TEST(AlphaAmd, MonotoneInAlphaAndBounded) {
  const Image a = random_image(24, 24, 5), b = random_image(24, 24, 6);
  double prev = 0.0;
  for (double alpha : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    const double v = alpha_amd(a, b, {alpha, 8});
    EXPECT_GE(v, prev);
    EXPECT_LE(v, alpha);
    EXPECT_NEAR(v, alpha_amd(b, a, {alpha, 8}), 1e-12);
    prev = v;
  }
}

TEST(AlphaAmd, ZeroOnlyWhenQuantizedImagesAgree) {
  Image a(8, 8, 0.5), b(8, 8, 0.52);
  EXPECT_EQ(alpha_amd(a, b), 0.0);  // both quantize to level 4
  b(3, 3) = 0.9;
  EXPECT_GT(alpha_amd(a, b), 0.0);
}

TEST(AlphaAmd, Errors) {
  Image a(4, 4, 0.5), b(4, 4, 1.5);
  EXPECT_THROW(alpha_amd(a, b), DomainError);
  EXPECT_THROW(alpha_amd(a, a, {0.0, 8}), ContractError);
  EXPECT_THROW(alpha_amd(a, a, {1.0, 0}), ContractError);
  EXPECT_DOUBLE_EQ(default_alpha(834, 600), 40.0);
  EXPECT_DOUBLE_EQ(default_alpha(300, 417), 20.0);
}

TEST(Frechet, IdenticalSetsAreZero) {
  const Matrix f = Rng(1).normal_matrix(30, 5);
  EXPECT_NEAR(frechet_distance(f, f), 0.0, 1e-9);
}

TEST(Frechet, OneDimensionalClosedForm) {
  const Matrix a = Rng(2).normal_matrix(25, 1, 1.3).array() + 0.7;
  const Matrix b = Rng(3).normal_matrix(40, 1, 0.4).array() - 1.1;
  auto stats = [](const Matrix& m) {
    const double mu = m.mean();
    return std::pair{mu, std::sqrt((m.array() - mu).square().sum() / double(m.rows() - 1))};
  };
  const auto [m1, s1] = stats(a);
  const auto [m2, s2] = stats(b);
  EXPECT_NEAR(frechet_distance(a, b), (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2), 1e-9);
}

TEST(Frechet, InvariantToCommonRotationAndSymmetric) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    Rng rng(s);
    const Matrix a = rng.normal_matrix(40, 6), b = rng.normal_matrix(35, 6, 2.0).array() + 0.5;
    const Matrix q = Eigen::HouseholderQR<Matrix>(rng.normal_matrix(6, 6)).householderQ();
    const double d = frechet_distance(a, b);
    EXPECT_NEAR(frechet_distance(a * q, b * q), d, 1e-8);
    EXPECT_NEAR(frechet_distance(b, a), d, 1e-8);
    EXPECT_GE(d, -1e-9);
  }
}

TEST(Frechet, RankDeficientCovariance) {
  // More dimensions than samples: covariances are singular but PSD.
  const Matrix a = Rng(4).normal_matrix(5, 12), b = Rng(5).normal_matrix(6, 12);
  const double d = frechet_distance(a, b);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_GE(d, -1e-9);
  EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-9);
}

TEST(Frechet, Errors) {
  EXPECT_THROW(frechet_distance(Matrix::Ones(3, 2), Matrix::Ones(3, 3)), DataError);
  EXPECT_THROW(frechet_distance(Matrix::Ones(1, 2), Matrix::Ones(3, 2)), DataError);
  Matrix bad = Matrix::Ones(3, 2);
  bad(0, 0) = NAN;
  EXPECT_THROW(frechet_distance(bad, Matrix::Ones(3, 2)), DomainError);
  Matrix not_psd(2, 2);
  not_psd << 1, 0, 0, -1;
  EXPECT_THROW(detail::psd_sqrt(not_psd), NumericalError);
}

TEST(Frechet, RawPixelFeatures) {
  const std::vector<Image> imgs{random_image(3, 2, 1), random_image(3, 2, 2)};
  const Matrix f = raw_pixel_features(imgs);
  EXPECT_EQ(f.rows(), 2);
  EXPECT_EQ(f.cols(), 6);
  EXPECT_EQ(f(1, 4), imgs[1].pixels[4]);
  const std::vector<Image> mixed{Image(3, 2), Image(2, 3)};
  EXPECT_THROW(raw_pixel_features(mixed), DataError);
}

TEST(Pcc, Examples) {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6}, z{3, 2, 1};
  EXPECT_NEAR(pcc(x, y), 1.0, 1e-15);
  EXPECT_NEAR(pcc(x, z), -1.0, 1e-15);
  const std::vector<double> c{1, 1, 1};
  EXPECT_THROW(pcc(x, c), DomainError);
  EXPECT_THROW(pcc(x, std::vector<double>{1, 2}), ContractError);
}

TEST(Pcc, MatchesTwoPassOracle) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(s);
    std::vector<double> x(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
    }
    EXPECT_NEAR(pcc(x, y), oracle::pcc(x, y), 1e-12);
  }
}
