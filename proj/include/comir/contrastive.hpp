#pragma once

// InfoNCE with pluggable critics, its analytic gradient, and the loss
// compositions used to add contrastive supervision at the bottleneck.

#include "comir/core.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace comir {

enum class Level { bottleneck, final };
enum class Modality { A, B };

inline std::string_view to_string(Level l) { return l == Level::bottleneck ? "bn" : "final"; }
inline std::string_view to_string(Modality m) { return m == Modality::A ? "A" : "B"; }

/// n paired samples x d dimensions at one network level for one modality.
struct EmbeddingSet {
  Level level = Level::final;
  Modality modality = Modality::A;
  Matrix data;  // row i = embedding of sample i

  Eigen::Index size() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
};

inline bool paired(const EmbeddingSet& a, const EmbeddingSet& b) {
  return a.size() == b.size() && a.dim() == b.dim() && a.level == b.level &&
         a.modality != b.modality && a.size() >= 1 && a.dim() >= 1;
}

enum class CriticKind { gaussian_l2, cosine, l1 };

inline std::string_view to_string(CriticKind k) {
  switch (k) {
    case CriticKind::gaussian_l2: return "gaussian_l2";
    case CriticKind::cosine: return "cosine";
    case CriticKind::l1: return "l1";
  }
  return "?";
}

inline CriticKind critic_from_string(std::string_view s) {
  if (s == "gaussian_l2" || s == "l2" || s == "mse") return CriticKind::gaussian_l2;
  if (s == "cosine") return CriticKind::cosine;
  if (s == "l1") return CriticKind::l1;
  throw ConfigError("unknown critic '" + std::string(s) + "'");
}

/// How the negatives in the softmax denominator are formed.
///   cross_pair: D_i = sum_j exp(h(y1_i, y2_j)/tau)
///   diagonal:   D_i = sum_j exp(h(y1_j, y2_j)/tau), the same-index form
enum class Pairing { diagonal, cross_pair };

inline std::string_view to_string(Pairing p) {
  return p == Pairing::diagonal ? "diagonal" : "cross_pair";
}

inline Pairing pairing_from_string(std::string_view s) {
  if (s == "diagonal") return Pairing::diagonal;
  if (s == "cross_pair") return Pairing::cross_pair;
  throw ConfigError("unknown pairing '" + std::string(s) + "'");
}

struct LossConfig {
  CriticKind critic = CriticKind::cosine;
  double temperature = 0.5;
  Pairing pairing = Pairing::cross_pair;
};

namespace detail {

inline void check_vectors(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw ContractError("critic: vector lengths differ");
  if (!a.allFinite() || !b.allFinite()) throw DomainError("critic: non-finite input");
}

}  // namespace detail

/// Similarity h(y1, y2). Higher means more similar for every kind.
inline double critic(CriticKind kind, const Eigen::Ref<const Vector>& y1,
                     const Eigen::Ref<const Vector>& y2) {
  detail::check_vectors(y1, y2);
  switch (kind) {
    case CriticKind::gaussian_l2: return -(y1 - y2).squaredNorm();
    case CriticKind::l1: return -(y1 - y2).lpNorm<1>();
    case CriticKind::cosine: {
      const double n1 = y1.norm();
      const double n2 = y2.norm();
      if (n1 == 0.0 || n2 == 0.0) throw DomainError("cosine critic: zero-norm input");
      return y1.dot(y2) / (n1 * n2);
    }
  }
  return 0.0;
}

/// (dh/dy1, dh/dy2). The l1 critic uses sign(0) = 0 at its kink.
inline std::pair<Vector, Vector> critic_gradient(CriticKind kind,
                                                 const Eigen::Ref<const Vector>& y1,
                                                 const Eigen::Ref<const Vector>& y2) {
  detail::check_vectors(y1, y2);
  switch (kind) {
    case CriticKind::gaussian_l2: {
      Vector g = -2.0 * (y1 - y2);
      return {g, -g};
    }
    case CriticKind::l1: {
      Vector g = -(y1 - y2).array().sign().matrix();
      return {g, -g};
    }
    case CriticKind::cosine: {
      const double n1 = y1.norm();
      const double n2 = y2.norm();
      if (n1 == 0.0 || n2 == 0.0) throw DomainError("cosine critic: zero-norm input");
      const double h = y1.dot(y2) / (n1 * n2);
      Vector g1 = y2 / (n1 * n2) - h * y1 / (n1 * n1);
      Vector g2 = y1 / (n1 * n2) - h * y2 / (n2 * n2);
      return {std::move(g1), std::move(g2)};
    }
  }
  return {};
}

struct InfoNceGradient {
  Matrix d_a;  // dL/dy1, n x d
  Matrix d_b;  // dL/dy2, n x d
};

namespace detail {

inline void check_paired(const EmbeddingSet& a, const EmbeddingSet& b, const LossConfig& cfg) {
  if (!paired(a, b)) throw ContractError("info_nce: embedding sets are not paired");
  if (!(cfg.temperature > 0.0)) throw ContractError("info_nce: temperature must be > 0");
  if (!a.data.allFinite() || !b.data.allFinite())
    throw DomainError("info_nce: non-finite embedding entries");
}

inline double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// log(sum_j exp(v_j - v_i)), i.e. lse(v) - v_i without the cancellation that
// subtraction suffers when v_i dominates and the result is close to zero.
inline double log_sum_exp_minus(const Eigen::Ref<const Vector>& v, Eigen::Index i) {
  const double m = v.maxCoeff();
  if (v(i) < m) return (m - v(i)) + std::log((v.array() - m).exp().sum());
  double rest = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (j != i) rest += std::exp(v(j) - m);
  return std::log1p(rest);
}

// Loss plus, optionally, dL/dscore where score = h/tau. For cross_pair the
// score matrix is n x n; for diagonal it is the n-vector of same-index scores
// stored in column 0.
inline double info_nce_impl(const EmbeddingSet& a, const EmbeddingSet& b, const LossConfig& cfg,
                            InfoNceGradient* grad) {
  check_paired(a, b, cfg);
  const Eigen::Index n = a.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_tau = 1.0 / cfg.temperature;

  if (grad) {
    grad->d_a = Matrix::Zero(n, a.dim());
    grad->d_b = Matrix::Zero(n, a.dim());
  }

  auto accumulate = [&](Eigen::Index i, Eigen::Index j, double d_score) {
    if (d_score == 0.0) return;
    auto [g1, g2] = critic_gradient(cfg.critic, a.data.row(i).transpose(),
                                    b.data.row(j).transpose());
    grad->d_a.row(i) += (d_score * inv_tau) * g1.transpose();
    grad->d_b.row(j) += (d_score * inv_tau) * g2.transpose();
  };

  if (cfg.pairing == Pairing::diagonal) {
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i)
      s(i) = critic(cfg.critic, a.data.row(i).transpose(), b.data.row(i).transpose()) * inv_tau;
    const double lse = log_sum_exp(s);
    // Every row shares the same denominator, so L = lse(s) - mean(s).
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += log_sum_exp_minus(s, i);
    loss *= inv_n;
    if (grad) {
      for (Eigen::Index i = 0; i < n; ++i) accumulate(i, i, std::exp(s(i) - lse) - inv_n);
    }
    return loss;
  }

  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      s(i, j) = critic(cfg.critic, a.data.row(i).transpose(), b.data.row(j).transpose()) * inv_tau;

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector row = s.row(i).transpose();
    const double lse = log_sum_exp(row);
    loss += log_sum_exp_minus(row, i);
    if (grad) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double p = std::exp(row(j) - lse);
        accumulate(i, j, (p - (i == j ? 1.0 : 0.0)) * inv_n);
      }
    }
  }
  return loss * inv_n;
}

}  // namespace detail

/// Mean over samples of -log(exp(h(y1_i, y2_i)/tau) / D_i). Always >= 0.
inline double info_nce_loss(const EmbeddingSet& a, const EmbeddingSet& b, const LossConfig& cfg) {
  return detail::info_nce_impl(a, b, cfg, nullptr);
}

inline InfoNceGradient info_nce_gradient(const EmbeddingSet& a, const EmbeddingSet& b,
                                         const LossConfig& cfg) {
  InfoNceGradient g;
  detail::info_nce_impl(a, b, cfg, &g);
  return g;
}

inline std::pair<double, InfoNceGradient> info_nce_loss_and_gradient(const EmbeddingSet& a,
                                                                     const EmbeddingSet& b,
                                                                     const LossConfig& cfg) {
  InfoNceGradient g;
  const double loss = detail::info_nce_impl(a, b, cfg, &g);
  return {loss, std::move(g)};
}

// ---------------------------------------------------------------------------
// Bottleneck supervision schedules

namespace schedule {

struct Baseline {};
/// Final-level and bottleneck losses take turns every iteration, both scaled by weight.
struct Alternating {
  double weight = 1.0;
};
/// L_C + alpha * L_BN every iteration.
struct Summed {
  double alpha = 0.5;
};
/// L_BN only while epoch < split_epoch, then L_C only.
struct Pretraining {
  int split_epoch = 50;
};

}  // namespace schedule

using ScheduleKind =
    std::variant<schedule::Baseline, schedule::Alternating, schedule::Summed, schedule::Pretraining>;

inline std::string_view schedule_name(const ScheduleKind& s) {
  switch (s.index()) {
    case 0: return "baseline";
    case 1: return "alternating";
    case 2: return "summed";
    default: return "pretraining";
  }
}

struct ActiveTerms {
  bool final_level = false;  // L_C
  bool bottleneck = false;   // L_BN

  friend bool operator==(const ActiveTerms&, const ActiveTerms&) = default;
};

inline std::string to_string(ActiveTerms t) {
  if (t.final_level && t.bottleneck) return "L_C+L_BN";
  if (t.final_level) return "L_C";
  if (t.bottleneck) return "L_BN";
  return "none";
}

struct ScheduleStep {
  int epoch = 0;
  long iteration = 0;  // global iteration counter; parity drives alternation
  int total_epochs = 1;
};

/// Per-term weights for one step. Pure function of the schedule and the step.
inline std::pair<double, double> schedule_weights(const ScheduleKind& sched,
                                                  const ScheduleStep& step) {
  if (step.total_epochs < 1 || step.epoch < 0 || step.epoch >= step.total_epochs)
    throw ContractError("schedule: epoch " + std::to_string(step.epoch) +
                        " outside [0, " + std::to_string(step.total_epochs) + ")");
  if (step.iteration < 0) throw ContractError("schedule: negative iteration");
  return std::visit(
      [&](const auto& s) -> std::pair<double, double> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, schedule::Baseline>) {
          return {1.0, 0.0};
        } else if constexpr (std::is_same_v<S, schedule::Alternating>) {
          if (!(s.weight > 0.0)) throw ContractError("alternating weight must be > 0");
          return step.iteration % 2 == 0 ? std::pair{s.weight, 0.0} : std::pair{0.0, s.weight};
        } else if constexpr (std::is_same_v<S, schedule::Summed>) {
          if (!(s.alpha > 0.0)) throw ContractError("summed alpha must be > 0");
          return {1.0, s.alpha};
        } else {
          if (s.split_epoch < 1 || s.split_epoch >= step.total_epochs)
            throw ContractError("pretraining split_epoch must lie in [1, total_epochs)");
          return step.epoch < s.split_epoch ? std::pair{0.0, 1.0} : std::pair{1.0, 0.0};
        }
      },
      sched);
}

struct ScheduleLoss {
  double loss = 0.0;
  ActiveTerms active;
  double final_term = 0.0;       // unweighted L_C, 0 when inactive
  double bottleneck_term = 0.0;  // unweighted L_BN, 0 when inactive
};

struct ScheduleGradient {
  // Zero matrices for inactive terms.
  InfoNceGradient final_level;
  InfoNceGradient bottleneck;
};

namespace detail {

inline ScheduleLoss schedule_impl(const EmbeddingSet& final_a, const EmbeddingSet& final_b,
                                  const EmbeddingSet& bn_a, const EmbeddingSet& bn_b,
                                  const LossConfig& cfg_final, const LossConfig& cfg_bn,
                                  const ScheduleKind& sched, const ScheduleStep& step,
                                  ScheduleGradient* grad) {
  if (!paired(final_a, final_b) || final_a.level != Level::final)
    throw ContractError("schedule_loss: final-level sets are not paired");
  if (!paired(bn_a, bn_b) || bn_a.level != Level::bottleneck)
    throw ContractError("schedule_loss: bottleneck sets are not paired");

  const auto [w_c, w_bn] = schedule_weights(sched, step);
  ScheduleLoss out;
  out.active = {w_c > 0.0, w_bn > 0.0};

  auto term = [&](const EmbeddingSet& a, const EmbeddingSet& b, const LossConfig& cfg, double w,
                  double& value, InfoNceGradient* g) {
    if (w == 0.0) {
      if (g) {
        g->d_a = Matrix::Zero(a.size(), a.dim());
        g->d_b = Matrix::Zero(b.size(), b.dim());
      }
      return;
    }
    if (g) {
      auto [l, lg] = info_nce_loss_and_gradient(a, b, cfg);
      value = l;
      g->d_a = w * lg.d_a;
      g->d_b = w * lg.d_b;
    } else {
      value = info_nce_loss(a, b, cfg);
    }
    out.loss += w * value;
  };

  term(final_a, final_b, cfg_final, w_c, out.final_term, grad ? &grad->final_level : nullptr);
  term(bn_a, bn_b, cfg_bn, w_bn, out.bottleneck_term, grad ? &grad->bottleneck : nullptr);
  return out;
}

}  // namespace detail

inline ScheduleLoss schedule_loss(const EmbeddingSet& final_a, const EmbeddingSet& final_b,
                                  const EmbeddingSet& bn_a, const EmbeddingSet& bn_b,
                                  const LossConfig& cfg_final, const LossConfig& cfg_bn,
                                  const ScheduleKind& sched, const ScheduleStep& step) {
  return detail::schedule_impl(final_a, final_b, bn_a, bn_b, cfg_final, cfg_bn, sched, step,
                               nullptr);
}

inline std::pair<ScheduleLoss, ScheduleGradient> schedule_loss_and_gradient(
    const EmbeddingSet& final_a, const EmbeddingSet& final_b, const EmbeddingSet& bn_a,
    const EmbeddingSet& bn_b, const LossConfig& cfg_final, const LossConfig& cfg_bn,
    const ScheduleKind& sched, const ScheduleStep& step) {
  ScheduleGradient g;
  auto l = detail::schedule_impl(final_a, final_b, bn_a, bn_b, cfg_final, cfg_bn, sched, step, &g);
  return {l, std::move(g)};
}

}  // namespace comir
