#pragma once

// Embedding-space forensics: pooled dissimilarities, metric MDS under
// Sammon's stress, and singular-value spectra of embedding covariance.

#include "comir/contrastive.hpp"
#include "comir/core.hpp"
#include "comir/image.hpp"
#include "comir/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace comir {

enum class Dissimilarity { mse, euclidean };

inline Dissimilarity dissimilarity_from_string(std::string_view s) {
  if (s == "mse") return Dissimilarity::mse;
  if (s == "euclidean") return Dissimilarity::euclidean;
  throw ConfigError("unknown dissimilarity '" + std::string(s) + "'");
}

struct ItemLabel {
  Modality modality = Modality::A;
  long pair_id = 0;  // items sharing a pair_id come from the same sample
};

struct LabeledDissimilarity {
  Matrix delta;  // n x n, symmetric, zero diagonal
  std::vector<ItemLabel> labels;
};

inline double item_dissimilarity(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                                 Dissimilarity metric) {
  const double sq = (x - y).squaredNorm();
  return metric == Dissimilarity::mse ? sq / double(x.size()) : std::sqrt(sq);
}

/// Pairwise dissimilarities between the rows of `items`.
inline Matrix dissimilarity_matrix(const Matrix& items, Dissimilarity metric) {
  if (items.rows() < 1 || items.cols() < 1) throw DataError("dissimilarity_matrix: empty item set");
  if (!items.allFinite()) throw DomainError("dissimilarity_matrix: non-finite entries");
  const Eigen::Index n = items.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = item_dissimilarity(items.row(i).transpose(), items.row(j).transpose(), metric);
  return d;
}

/// Pools both modalities: rows 0..n-1 are modality A, n..2n-1 modality B, and
/// pair_id links row i of each.
inline LabeledDissimilarity dissimilarity_matrix(const EmbeddingSet& a, const EmbeddingSet& b,
                                                 Dissimilarity metric) {
  if (a.dim() != b.dim()) throw DataError("dissimilarity_matrix: embedding dimensions differ");
  Matrix pooled(a.size() + b.size(), a.dim());
  pooled << a.data, b.data;
  LabeledDissimilarity out{dissimilarity_matrix(pooled, metric), {}};
  for (Eigen::Index i = 0; i < a.size(); ++i) out.labels.push_back({a.modality, long(i)});
  for (Eigen::Index i = 0; i < b.size(); ++i) out.labels.push_back({b.modality, long(i)});
  return out;
}

/// Pooled images compared by image MSE (or Euclidean pixel distance).
inline LabeledDissimilarity dissimilarity_matrix(std::span<const Image> a, std::span<const Image> b,
                                                 Dissimilarity metric) {
  std::vector<const Image*> all;
  LabeledDissimilarity out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all.push_back(&a[i]);
    out.labels.push_back({Modality::A, long(i)});
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    all.push_back(&b[i]);
    out.labels.push_back({Modality::B, long(i)});
  }
  if (all.empty()) throw DataError("dissimilarity_matrix: no images");
  const Eigen::Index n = Eigen::Index(all.size());
  out.delta = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double m = image_mse(*all[std::size_t(i)], *all[std::size_t(j)]);
      out.delta(i, j) = out.delta(j, i) =
          metric == Dissimilarity::mse ? m : std::sqrt(m * double(all[std::size_t(i)]->size()));
    }
  return out;
}

struct SammonDiagnostics {
  std::size_t zero_dissimilarities = 0;  // pairs with d_ij == 0, weighted by 1/delta_floor
  std::size_t coincident_pairs = 0;      // pairs skipped in the gradient (points coincide)
};

/// Sammon stress (1/sum d_ij) * sum_{i<j} (d_ij - |x_i - x_j|)^2 / d_ij with
/// precomputed weights. Zero targets use the weight 1/floor, floor = 1e-6 *
/// mean(d_ij).
class SammonObjective {
 public:
  explicit SammonObjective(const Matrix& delta) : delta_(delta) {
    const Eigen::Index n = delta.rows();
    if (delta.cols() != n) throw DataError("sammon: dissimilarity matrix must be square");
    if (n < 2) throw ContractError("sammon: need at least two items");
    if (!delta.allFinite()) throw DomainError("sammon: non-finite dissimilarities");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (delta(i, i) != 0.0) throw DataError("sammon: non-zero diagonal");
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (delta(i, j) < 0.0) throw DataError("sammon: negative dissimilarity");
        if (std::abs(delta(i, j) - delta(j, i)) > 1e-12 * std::max(1.0, std::abs(delta(i, j))))
          throw DataError("sammon: dissimilarity matrix is not symmetric");
        sum += delta(i, j);
        if (delta(i, j) == 0.0) ++diag_.zero_dissimilarities;
      }
    }
    const double pairs = 0.5 * double(n) * double(n - 1);
    const double floor = sum > 0.0 ? 1e-6 * sum / pairs : 1e-6;
    normalizer_ = sum > 0.0 ? sum : 1.0;
    weight_ = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) weight_(i, j) = 1.0 / (delta(i, j) > 0.0 ? delta(i, j) : floor);
  }

  Eigen::Index size() const { return delta_.rows(); }
  const Matrix& delta() const { return delta_; }
  const SammonDiagnostics& diagnostics() const { return diag_; }

  double stress(const Matrix& points) const {
    check(points);
    const Eigen::Index n = size();
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double r = delta_(i, j) - (points.row(i) - points.row(j)).norm();
        s += r * r * weight_(i, j);
      }
    return s / normalizer_;
  }

  /// d stress / d points. Pairs whose points coincide while d_ij > 0 have no
  /// defined direction and are skipped (counted in `coincident`).
  Matrix gradient(const Matrix& points, std::size_t* coincident = nullptr) const {
    check(points);
    const Eigen::Index n = size();
    Matrix g = Matrix::Zero(n, points.cols());
    std::size_t skipped = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Eigen::RowVectorXd diff = points.row(i) - points.row(j);
        const double dist = diff.norm();
        if (dist == 0.0) {
          if (delta_(i, j) > 0.0) ++skipped;
          continue;
        }
        // d/dx_i of w (d - D)^2 = -2 w (d - D) (x_i - x_j) / D
        const Eigen::RowVectorXd c = (-2.0 * weight_(i, j) * (delta_(i, j) - dist) / dist) * diff;
        g.row(i) += c;
        g.row(j) -= c;
      }
    if (coincident) *coincident = skipped;
    return g / normalizer_;
  }

 private:
  void check(const Matrix& points) const {
    if (points.rows() != size() || points.cols() < 1)
      throw ContractError("sammon: point matrix does not match the dissimilarity matrix");
  }

  Matrix delta_;
  Matrix weight_;
  double normalizer_ = 1.0;
  SammonDiagnostics diag_;
};

inline double sammon_stress(const Matrix& delta, const Matrix& points) {
  return SammonObjective(delta).stress(points);
}

inline Matrix sammon_gradient(const Matrix& delta, const Matrix& points,
                              std::size_t* coincident = nullptr) {
  return SammonObjective(delta).gradient(points, coincident);
}

enum class MdsInit { random, classical };

inline MdsInit mds_init_from_string(std::string_view s) {
  if (s == "random") return MdsInit::random;
  if (s == "classical") return MdsInit::classical;
  throw ConfigError("unknown mds init '" + std::string(s) + "'");
}

struct MdsConfig {
  int max_iters = 2000;
  double tol = 1e-9;
  std::uint64_t seed = 1;
  MdsInit init = MdsInit::classical;
};

struct MdsSolution {
  Matrix points;  // n x 2
  double final_stress = 0.0;
  int iterations_used = 0;
  std::vector<double> stress_history;  // accepted steps only, nonincreasing
  SammonDiagnostics diagnostics;
};

/// Classical (Torgerson) scaling: top-2 eigenpairs of -1/2 J D^2 J.
inline Matrix classical_mds(const Matrix& delta, int dims = 2) {
  const Eigen::Index n = delta.rows();
  const Matrix d2 = delta.array().square().matrix();
  const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / double(n));
  Matrix b = -0.5 * j * d2 * j;
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success) throw NumericalError("classical_mds: eigendecomposition failed");
  Matrix x = Matrix::Zero(n, dims);
  for (int k = 0; k < dims && k < n; ++k) {
    const Eigen::Index idx = n - 1 - k;  // eigenvalues ascend
    const double lambda = std::max(0.0, es.eigenvalues()(idx));
    x.col(k) = es.eigenvectors().col(idx) * std::sqrt(lambda);
  }
  return x;
}

/// Gradient descent on Sammon stress with backtracking: a step that raises
/// the stress is rejected and the step halved; an accepted step grows it by
/// 1.05. Stops after max_iters or when the relative stress decrease of an
/// accepted step falls below tol.
inline MdsSolution mds_fit(const Matrix& delta, const MdsConfig& cfg = {}) {
  if (cfg.max_iters < 0 || !(cfg.tol >= 0.0)) throw ContractError("mds_fit: invalid config");
  const SammonObjective obj(delta);
  const Eigen::Index n = obj.size();

  double mean_d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) mean_d += delta(i, j);
  mean_d /= 0.5 * double(n) * double(n - 1);

  MdsSolution sol;
  sol.diagnostics = obj.diagnostics();
  if (cfg.init == MdsInit::classical) {
    sol.points = classical_mds(delta);
  } else {
    Rng rng(cfg.seed);
    sol.points = rng.normal_matrix(n, 2, mean_d > 0.0 ? mean_d : 1.0);
  }
  // Break exact coincidences so every pair has a gradient direction.
  {
    Rng jitter(cfg.seed ^ 0x5851f42d4c957f2dULL);
    const double eps = 1e-9 * (mean_d > 0.0 ? mean_d : 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if ((sol.points.row(i) - sol.points.row(j)).norm() == 0.0 && delta(i, j) > 0.0)
          sol.points.row(j) += Eigen::RowVector2d(jitter.normal(0.0, eps), jitter.normal(0.0, eps));
  }

  double stress = obj.stress(sol.points);
  if (!std::isfinite(stress)) throw NumericalError("mds_fit: non-finite initial stress");
  sol.stress_history.push_back(stress);

  double step = -1.0;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (stress == 0.0) break;
    const Matrix g = obj.gradient(sol.points);
    const double gmax = g.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0)) break;
    if (step < 0.0) step = 0.1 * (mean_d > 0.0 ? mean_d : 1.0) / gmax;

    bool accepted = false;
    double next_stress = stress;
    Matrix next;
    while (step * gmax > 1e-15 * (1.0 + sol.points.cwiseAbs().maxCoeff())) {
      next = sol.points - step * g;
      next_stress = obj.stress(next);
      if (!std::isfinite(next_stress))
        throw NumericalError("mds_fit: non-finite stress at iteration " + std::to_string(it));
      if (next_stress < stress) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const double rel = (stress - next_stress) / stress;
    sol.points = std::move(next);
    stress = next_stress;
    sol.stress_history.push_back(stress);
    step *= 1.05;
    if (rel < cfg.tol) {
      ++it;
      break;
    }
  }
  sol.final_stress = stress;
  sol.iterations_used = it;
  obj.gradient(sol.points, &sol.diagnostics.coincident_pairs);
  return sol;
}

struct SvSpectrum {
  std::vector<double> values;  // nonincreasing, >= 0
};

/// Singular values of the sample covariance (divide by n-1) of the rows.
inline SvSpectrum sv_spectrum(const Matrix& embeddings) {
  if (embeddings.rows() < 2) throw DataError("sv_spectrum: need at least two rows");
  if (!embeddings.allFinite()) throw DomainError("sv_spectrum: non-finite entries");
  const Matrix cov = sample_covariance(embeddings);
  Eigen::JacobiSVD<Matrix> svd(cov);
  SvSpectrum s;
  const Vector& v = svd.singularValues();
  s.values.resize(std::size_t(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) s.values[std::size_t(i)] = std::max(0.0, v(i));
  std::sort(s.values.begin(), s.values.end(), std::greater<>());
  return s;
}

/// Values divided by the largest one (no-op for an all-zero spectrum).
inline SvSpectrum normalized(SvSpectrum s) {
  if (!s.values.empty() && s.values.front() > 0.0) {
    const double top = s.values.front();
    for (double& v : s.values) v /= top;
  }
  return s;
}

struct CollapseMetrics {
  int collapsed_dims = 0;
  double effective_rank = 0.0;
};

/// collapsed_dims counts values below epsilon_rel * max; effective_rank is
/// exp of the entropy of the normalized squared values.
inline CollapseMetrics collapse_metrics(const SvSpectrum& spectrum, double epsilon_rel = 1e-6) {
  if (spectrum.values.empty()) throw ContractError("collapse_metrics: empty spectrum");
  const double top = *std::max_element(spectrum.values.begin(), spectrum.values.end());
  CollapseMetrics m;
  if (!(top > 0.0)) {
    m.collapsed_dims = int(spectrum.values.size());
    m.effective_rank = 0.0;
    return m;
  }
  double total = 0.0;
  for (double v : spectrum.values) {
    if (v < epsilon_rel * top) ++m.collapsed_dims;
    total += v * v;
  }
  double entropy = 0.0;
  for (double v : spectrum.values) {
    const double p = v * v / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  m.effective_rank = std::exp(entropy);
  return m;
}

}  // namespace comir
