#include "comir/embedding.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace comir;

namespace {

Matrix rotate(const Matrix& pts, double theta, double tx, double ty, bool reflect) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  if (reflect) r.col(0) *= -1.0;
  Matrix out = pts * r.transpose();
  out.col(0).array() += tx;
  out.col(1).array() += ty;
  return out;
}

Matrix equilateral() {
  Matrix p(3, 2);
  p << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2.0;
  return p;
}

}  // namespace

TEST(Dissimilarity, Examples) {
  EXPECT_EQ(dissimilarity_matrix(Matrix::Ones(1, 4), Dissimilarity::mse), Matrix::Zero(1, 1));
  EXPECT_EQ(dissimilarity_matrix(Matrix::Ones(2, 4), Dissimilarity::euclidean), Matrix::Zero(2, 2));
  Matrix x(2, 2);
  x << 0, 0, 3, 4;
  EXPECT_DOUBLE_EQ(dissimilarity_matrix(x, Dissimilarity::euclidean)(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(dissimilarity_matrix(x, Dissimilarity::mse)(1, 0), 12.5);
}

TEST(Dissimilarity, MatchesNaiveLoopSymmetricZeroDiagonal) {
  const Matrix x = Rng(1).normal_matrix(5, 7);
  for (auto metric : {Dissimilarity::mse, Dissimilarity::euclidean}) {
    const Matrix d = dissimilarity_matrix(x, metric);
    for (Eigen::Index i = 0; i < 5; ++i) {
      EXPECT_EQ(d(i, i), 0.0);
      for (Eigen::Index j = 0; j < 5; ++j) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < 7; ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
        const double want = metric == Dissimilarity::mse ? s / 7.0 : std::sqrt(s);
        EXPECT_NEAR(d(i, j), want, 1e-12);
        EXPECT_EQ(d(i, j), d(j, i));
      }
    }
  }
}

TEST(Dissimilarity, PooledSetsCarryLabels) {
  Rng rng(2);
  const EmbeddingSet a{Level::final, Modality::A, rng.normal_matrix(3, 4)};
  const EmbeddingSet b{Level::final, Modality::B, rng.normal_matrix(3, 4)};
  const auto ld = dissimilarity_matrix(a, b, Dissimilarity::mse);
  ASSERT_EQ(ld.delta.rows(), 6);
  ASSERT_EQ(ld.labels.size(), 6u);
  EXPECT_EQ(ld.labels[4].modality, Modality::B);
  EXPECT_EQ(ld.labels[4].pair_id, 1);
  EXPECT_NEAR(ld.delta(1, 4), (a.data.row(1) - b.data.row(1)).squaredNorm() / 4.0, 1e-12);
  const EmbeddingSet c{Level::final, Modality::B, rng.normal_matrix(3, 5)};
  EXPECT_THROW(dissimilarity_matrix(a, c, Dissimilarity::mse), DataError);
}

TEST(Dissimilarity, ImagesUseImageMse) {
  const std::vector<Image> a{make_noise(6, 5, 1), make_noise(6, 5, 2)}, b{make_noise(6, 5, 3), make_noise(6, 5, 4)};
  const auto ld = dissimilarity_matrix(a, b, Dissimilarity::mse);
  EXPECT_NEAR(ld.delta(0, 3), oracle::mse(a[0], b[1]), 1e-15);
  const auto le = dissimilarity_matrix(a, b, Dissimilarity::euclidean);
  EXPECT_NEAR(le.delta(1, 2), std::sqrt(oracle::mse(a[1], b[0]) * 30.0), 1e-12);
}

TEST(Sammon, PerfectEmbeddingHasZeroStressAndGradient) {
  const Matrix p = Rng(3).normal_matrix(8, 2);
  const Matrix d = oracle::planar_distances(p);
  EXPECT_NEAR(sammon_stress(d, p), 0.0, 1e-28);
  EXPECT_LT(sammon_gradient(d, p).norm(), 1e-12);
  EXPECT_NEAR(sammon_stress(oracle::planar_distances(equilateral()), equilateral()), 0.0, 1e-30);
  Matrix tri = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
  EXPECT_NEAR(sammon_stress(tri, equilateral()), 0.0, 1e-30);
}

TEST(Sammon, MatchesNaiveFormula) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(s);
    const Matrix d = oracle::planar_distances(rng.normal_matrix(4, 5));
    const Matrix p = rng.normal_matrix(4, 2);
    EXPECT_NEAR(sammon_stress(d, p), oracle::sammon_stress(d, p), 1e-12);
  }
}

TEST(Sammon, InvariantToRigidMotions) {
  Rng rng(4);
  const Matrix d = oracle::planar_distances(rng.normal_matrix(10, 6));
  const Matrix p = rng.normal_matrix(10, 2);
  const double s0 = sammon_stress(d, p);
  for (int k = 0; k < 20; ++k) {
    const Matrix q = rotate(p, rng.uniform(0, 6.3), rng.normal(0, 5), rng.normal(0, 5), k % 2 == 1);
    EXPECT_NEAR(sammon_stress(d, q), s0, 1e-10);
  }
}

TEST(Sammon, GradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(s + 10);
    const Matrix d = oracle::planar_distances(rng.normal_matrix(5, 4));
    const Matrix p = rng.normal_matrix(5, 2);
    const Matrix num = oracle::finite_difference([&](const Matrix& x) { return sammon_stress(d, x); }, p, 1e-6);
    EXPECT_LT(oracle::relative_error(sammon_gradient(d, p), num), 1e-6);
  }
}

TEST(Sammon, HomogeneousUnderCommonScaling) {
  Rng rng(5);
  const Matrix d = oracle::planar_distances(rng.normal_matrix(6, 3));
  const Matrix p = rng.normal_matrix(6, 2);
  for (double c : {0.01, 3.0, 250.0}) {
    // Both sums scale by c, so the stress is unchanged and its gradient
    // scales by 1/c.
    EXPECT_NEAR(sammon_stress(c * d, c * p), sammon_stress(d, p), 1e-12);
    EXPECT_LT((c * sammon_gradient(c * d, c * p) - sammon_gradient(d, p)).norm(), 1e-10);
  }
}

TEST(Sammon, CoincidentPointsAreCounted) {
  Matrix d = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
  Matrix p(3, 2);
  p << 0, 0, 0, 0, 1, 0;
  std::size_t coincident = 0;
  const Matrix g = sammon_gradient(d, p, &coincident);
  EXPECT_EQ(coincident, 1u);
  EXPECT_TRUE(g.allFinite());
}

TEST(Sammon, ZeroDissimilaritiesUseFloorWeight) {
  Matrix d(3, 3);
  d << 0, 0, 1, 0, 0, 1, 1, 1, 0;
  const SammonObjective obj(d);
  EXPECT_EQ(obj.diagnostics().zero_dissimilarities, 1u);
  Matrix p(3, 2);
  p << 0, 0, 0.001, 0, 1, 0;
  const double floor = 1e-6 * 2.0 / 3.0;
  const double r = 1.0 - std::hypot(1.0, 0.0), r2 = 1.0 - 0.999;
  EXPECT_NEAR(obj.stress(p), (1e-6 / floor + r * r + r2 * r2) / 2.0, 1e-9);
}

TEST(Sammon, RejectsInvalidMatrices) {
  Matrix d = Matrix::Zero(3, 3);
  d(0, 1) = 1.0;
  EXPECT_THROW(SammonObjective{d}, DataError);  // asymmetric
  d(1, 0) = 1.0;
  d(2, 2) = 0.5;
  EXPECT_THROW(SammonObjective{d}, DataError);  // diagonal
  EXPECT_THROW(SammonObjective{Matrix::Zero(1, 1)}, ContractError);
  EXPECT_THROW(SammonObjective{Matrix::Zero(2, 3)}, DataError);
  Matrix neg = -(Matrix::Ones(2, 2) - Matrix::Identity(2, 2));
  EXPECT_THROW(SammonObjective{neg}, DataError);
  Matrix nan = Matrix::Zero(2, 2);
  nan(0, 1) = nan(1, 0) = NAN;
  EXPECT_THROW(SammonObjective{nan}, DomainError);
}

TEST(Mds, RecoversPlanarConfiguration) {
  const Matrix p = Rng(6).normal_matrix(20, 2, 3.0);
  const auto sol = mds_fit(oracle::planar_distances(p));
  EXPECT_LT(sol.final_stress, 1e-6);
  EXPECT_EQ(sol.points.rows(), 20);
  EXPECT_EQ(sol.points.cols(), 2);
}

TEST(Mds, RandomInitHistoryIsMonotoneAndGradientSmall) {
  const Matrix p = Rng(7).normal_matrix(15, 2);
  const Matrix d = oracle::planar_distances(p);
  const auto sol = mds_fit(d, {5000, 1e-12, 3, MdsInit::random});
  ASSERT_GE(sol.stress_history.size(), 2u);
  for (std::size_t i = 1; i < sol.stress_history.size(); ++i)
    EXPECT_LE(sol.stress_history[i], sol.stress_history[i - 1]);
  EXPECT_EQ(sol.stress_history.back(), sol.final_stress);
  if (sol.final_stress < 1e-6) {
    EXPECT_LT(sammon_gradient(d, sol.points).norm(), 1e-4 * (1 + sol.final_stress));
  }
}

TEST(Mds, DeterministicForSeed) {
  Matrix d(3, 3);
  d << 0, 1, 2, 1, 0, 1.5, 2, 1.5, 0;
  const auto a = mds_fit(d, {2000, 1e-9, 42, MdsInit::random});
  const auto b = mds_fit(d, {2000, 1e-9, 42, MdsInit::random});
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.stress_history, b.stress_history);
}

TEST(Mds, RegularSimplexIsNotPlanar) {
  const Matrix d = Matrix::Ones(4, 4) - Matrix::Identity(4, 4);
  std::vector<double> finals;
  for (std::uint64_t seed = 1; seed <= 8; ++seed)
    finals.push_back(mds_fit(d, {4000, 1e-12, seed, MdsInit::random}).final_stress);
  const double best = *std::min_element(finals.begin(), finals.end());
  EXPECT_GT(best, 1e-4);
  for (double f : finals) EXPECT_LE(f, 1.1 * best);
}

TEST(Mds, ClassicalInitIsExactForPlanarInput) {
  const Matrix p = Rng(8).normal_matrix(10, 2);
  const Matrix x = classical_mds(oracle::planar_distances(p));
  EXPECT_LT((oracle::planar_distances(x) - oracle::planar_distances(p)).norm(), 1e-9);
}

TEST(Mds, ParsesInitNames) {
  EXPECT_EQ(mds_init_from_string("random"), MdsInit::random);
  EXPECT_THROW(mds_init_from_string("smacof"), ConfigError);
  EXPECT_THROW(dissimilarity_from_string("cosine"), ConfigError);
}

TEST(Spectrum, IdenticalRowsGiveZeroSpectrum) {
  const auto s = sv_spectrum(Matrix::Constant(5, 4, 2.5));
  ASSERT_EQ(s.values.size(), 4u);
  for (double v : s.values) EXPECT_EQ(v, 0.0);
  const auto m = collapse_metrics(s);
  EXPECT_EQ(m.collapsed_dims, 4);
  EXPECT_EQ(m.effective_rank, 0.0);
}

TEST(Spectrum, RankDeficientDataCollapses) {
  for (int k : {1, 3, 6}) {
    Rng rng{std::uint64_t(k)};
    const Matrix x = rng.normal_matrix(50, k) * rng.normal_matrix(k, 10);
    const auto s = sv_spectrum(x);
    int small = 0;
    for (double v : s.values) small += v < 1e-10 * s.values.front();
    EXPECT_EQ(small, 10 - k);
    for (std::size_t i = 1; i < s.values.size(); ++i) EXPECT_LE(s.values[i], s.values[i - 1]);
  }
}

TEST(Spectrum, SumEqualsCovarianceTrace) {
  const Matrix x = Rng(9).normal_matrix(40, 6);
  const auto s = sv_spectrum(x);
  double sum = 0.0;
  for (double v : s.values) sum += v;
  EXPECT_LT(oracle::relative_error(sum, sample_covariance(x).trace()), 1e-9);
}

TEST(Spectrum, ConstantColumnAddsOneZero) {
  const Matrix x = Rng(10).normal_matrix(30, 5);
  Matrix y(30, 6);
  y << x, Matrix::Constant(30, 1, 7.0);
  const auto a = sv_spectrum(x), b = sv_spectrum(y);
  const auto zeros = [](const SvSpectrum& s) {
    return std::count_if(s.values.begin(), s.values.end(), [&](double v) { return v < 1e-10 * s.values.front(); });
  };
  EXPECT_EQ(zeros(b), zeros(a) + 1);
}

TEST(Spectrum, NormalizedDividesByLargest) {
  const auto s = normalized(SvSpectrum{{4.0, 2.0, 0.0}});
  EXPECT_EQ(s.values, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_THROW(sv_spectrum(Matrix::Ones(1, 3)), DataError);
}

TEST(Collapse, Examples) {
  auto m = collapse_metrics({{1, 1, 1, 1}});
  EXPECT_EQ(m.collapsed_dims, 0);
  EXPECT_NEAR(m.effective_rank, 4.0, 1e-12);
  m = collapse_metrics({{1, 0, 0, 0}});
  EXPECT_EQ(m.collapsed_dims, 3);
  EXPECT_NEAR(m.effective_rank, 1.0, 1e-12);
  m = collapse_metrics({{1, 1e-3, 1e-12}}, 1e-6);
  EXPECT_EQ(m.collapsed_dims, 1);
  EXPECT_THROW(collapse_metrics({}), ContractError);
}

TEST(Collapse, EffectiveRankWithinBounds) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(8);
    for (double& x : v) x = std::exp(rng.normal(0, 3));
    std::sort(v.begin(), v.end(), std::greater<>());
    const auto m = collapse_metrics({v});
    EXPECT_GE(m.effective_rank, 1.0 - 1e-12);
    EXPECT_LE(m.effective_rank, 8.0 + 1e-12);
  }
}

TEST(Collapse, IsotropicSubspaceHasRankK) {
  for (int k : {1, 4, 16}) {
    const auto s = sv_spectrum(oracle::isotropic_subspace(200, 32, k, std::uint64_t(k)));
    const auto m = collapse_metrics(s);
    EXPECT_EQ(m.collapsed_dims, 32 - k);
    EXPECT_NEAR(m.effective_rank, double(k), 0.5);
  }
}
