#pragma once

// Twin two-layer encoders trained on synthetic paired data.
//
//   bn    = tanh(X * W1)
//   final = bn * W2
//
// One encoder per modality, no shared weights. The bottleneck feeds the final
// layer, so whatever happens to the bottleneck during training propagates.

#include "comir/contrastive.hpp"
#include "comir/core.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace comir {

struct DatasetConfig {
  int samples = 256;
  int input_dim = 32;
  int latent_dim = 8;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;
};

/// X_j = Z * A_j + eps_j with a shared latent Z.
struct SyntheticPairDataset {
  DatasetConfig config;
  Matrix inputs_a;  // n x p
  Matrix inputs_b;  // n x p
};

inline SyntheticPairDataset make_dataset(const DatasetConfig& cfg) {
  require(cfg.samples >= 2 && cfg.input_dim >= 1 && cfg.latent_dim >= 1,
          "dataset: samples >= 2, input_dim >= 1, latent_dim >= 1");
  require(cfg.noise_sigma >= 0.0, "dataset: noise_sigma must be >= 0");
  Rng rng(cfg.seed);
  const Matrix z = rng.normal_matrix(cfg.samples, cfg.latent_dim);
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  const Matrix mix_a = rng.normal_matrix(cfg.latent_dim, cfg.input_dim, mix_scale);
  const Matrix mix_b = rng.normal_matrix(cfg.latent_dim, cfg.input_dim, mix_scale);
  const Matrix noise_a = rng.normal_matrix(cfg.samples, cfg.input_dim, cfg.noise_sigma);
  const Matrix noise_b = rng.normal_matrix(cfg.samples, cfg.input_dim, cfg.noise_sigma);
  return {cfg, z * mix_a + noise_a, z * mix_b + noise_b};
}

struct EncoderParams {
  Matrix w1;  // p x d_bn
  Matrix w2;  // d_bn x d_out
};

struct TwinEncoderParams {
  EncoderParams a;
  EncoderParams b;

  EncoderParams& operator[](Modality m) { return m == Modality::A ? a : b; }
  const EncoderParams& operator[](Modality m) const { return m == Modality::A ? a : b; }

  double squared_norm() const {
    return a.w1.squaredNorm() + a.w2.squaredNorm() + b.w1.squaredNorm() + b.w2.squaredNorm();
  }
  bool all_finite() const {
    return a.w1.allFinite() && a.w2.allFinite() && b.w1.allFinite() && b.w2.allFinite();
  }

  friend bool operator==(const TwinEncoderParams& x, const TwinEncoderParams& y) {
    return x.a.w1 == y.a.w1 && x.a.w2 == y.a.w2 && x.b.w1 == y.b.w1 && x.b.w2 == y.b.w2;
  }
};

/// Gaussian init with std 1/sqrt(fan_in).
inline TwinEncoderParams init_params(int input_dim, int bn_dim, int out_dim, std::uint64_t seed) {
  require(input_dim >= 1 && bn_dim >= 1 && out_dim >= 1, "init_params: dimensions must be >= 1");
  Rng rng(seed);
  TwinEncoderParams p;
  for (auto* e : {&p.a, &p.b}) {
    e->w1 = rng.normal_matrix(input_dim, bn_dim, 1.0 / std::sqrt(double(input_dim)));
    e->w2 = rng.normal_matrix(bn_dim, out_dim, 1.0 / std::sqrt(double(bn_dim)));
  }
  return p;
}

struct ForwardResult {
  EmbeddingSet bn;
  EmbeddingSet final;
};

inline ForwardResult forward(const TwinEncoderParams& params, const Matrix& inputs,
                             Modality modality) {
  const EncoderParams& e = params[modality];
  if (inputs.cols() != e.w1.rows() || e.w1.cols() != e.w2.rows())
    throw ContractError("forward: shape mismatch");
  ForwardResult r;
  r.bn = {Level::bottleneck, modality, (inputs * e.w1).array().tanh().matrix()};
  r.final = {Level::final, modality, r.bn.data * e.w2};
  return r;
}

/// Chain rule through one encoder. grads_bn is the loss gradient that enters
/// the bottleneck directly (from L_BN); grads_final enters at the output.
inline EncoderParams backward(const TwinEncoderParams& params, const Matrix& inputs,
                              Modality modality, const Matrix& grads_bn,
                              const Matrix& grads_final) {
  const EncoderParams& e = params[modality];
  if (inputs.cols() != e.w1.rows()) throw ContractError("backward: input shape mismatch");
  const Eigen::Index n = inputs.rows();
  if (grads_bn.rows() != n || grads_bn.cols() != e.w1.cols() || grads_final.rows() != n ||
      grads_final.cols() != e.w2.cols())
    throw ContractError("backward: gradient shape mismatch");

  const Matrix bn = (inputs * e.w1).array().tanh().matrix();
  EncoderParams g;
  g.w2 = bn.transpose() * grads_final;
  const Matrix d_bn = grads_final * e.w2.transpose() + grads_bn;
  const Matrix d_pre = (d_bn.array() * (1.0 - bn.array().square())).matrix();
  g.w1 = inputs.transpose() * d_pre;
  return g;
}

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double grad_clip_norm = 1.0;
  int epochs = 100;
  int iterations_per_epoch = 32;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int bn_dim = 8;
  int out_dim = 8;
};

inline void validate(const OptimizerConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw ContractError("learning_rate must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ContractError("momentum must be in [0, 1)");
  if (!(c.weight_decay >= 0.0)) throw ContractError("weight_decay must be >= 0");
  if (!(c.grad_clip_norm > 0.0)) throw ContractError("grad_clip_norm must be > 0");
  if (c.epochs < 1 || c.iterations_per_epoch < 1 || c.batch_size < 1)
    throw ContractError("epochs, iterations_per_epoch and batch_size must be >= 1");
}

/// Momentum buffers, shaped like the parameters.
struct SgdState {
  TwinEncoderParams velocity;

  static SgdState zeros_like(const TwinEncoderParams& p) {
    SgdState s;
    s.velocity.a = {Matrix::Zero(p.a.w1.rows(), p.a.w1.cols()),
                    Matrix::Zero(p.a.w2.rows(), p.a.w2.cols())};
    s.velocity.b = {Matrix::Zero(p.b.w1.rows(), p.b.w1.cols()),
                    Matrix::Zero(p.b.w2.rows(), p.b.w2.cols())};
    return s;
  }
};

/// Global-norm clipping, then v <- mu*v + g and w <- w - lr*(v + wd*w).
/// Returns the pre-clipping gradient norm.
inline double sgd_step(TwinEncoderParams& params, TwinEncoderParams grads, SgdState& state,
                       const OptimizerConfig& cfg) {
  const std::array<Matrix*, 4> p{&params.a.w1, &params.a.w2, &params.b.w1, &params.b.w2};
  const std::array<Matrix*, 4> g{&grads.a.w1, &grads.a.w2, &grads.b.w1, &grads.b.w2};
  const std::array<Matrix*, 4> v{&state.velocity.a.w1, &state.velocity.a.w2,
                                 &state.velocity.b.w1, &state.velocity.b.w2};
  for (std::size_t i = 0; i < 4; ++i)
    if (p[i]->rows() != g[i]->rows() || p[i]->cols() != g[i]->cols() ||
        p[i]->rows() != v[i]->rows() || p[i]->cols() != v[i]->cols())
      throw ContractError("sgd_step: shape mismatch");

  const double norm = std::sqrt(grads.squared_norm());
  const double scale = norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;
  for (std::size_t i = 0; i < 4; ++i) {
    *v[i] = cfg.momentum * *v[i] + scale * *g[i];
    *p[i] -= cfg.learning_rate * (*v[i] + cfg.weight_decay * *p[i]);
  }
  return norm;
}

struct TraceRecord {
  int epoch = 0;
  int iteration = 0;  // within the epoch
  ActiveTerms active;
  double loss = 0.0;
};

struct Embeddings {
  EmbeddingSet bn_a, bn_b, final_a, final_b;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;
  TwinEncoderParams initial_params;
  TwinEncoderParams final_params;
  Embeddings initial;  // whole dataset through the initial encoders
  Embeddings final;    // whole dataset through the trained encoders
};

inline Embeddings embed_dataset(const TwinEncoderParams& params, const SyntheticPairDataset& ds) {
  auto fa = forward(params, ds.inputs_a, Modality::A);
  auto fb = forward(params, ds.inputs_b, Modality::B);
  return {std::move(fa.bn), std::move(fb.bn), std::move(fa.final), std::move(fb.final)};
}

/// Scalar schedule loss of a batch and its gradients wrt all parameters.
inline std::pair<ScheduleLoss, TwinEncoderParams> batch_loss_and_gradient(
    const TwinEncoderParams& params, const Matrix& xa, const Matrix& xb,
    const LossConfig& cfg_final, const LossConfig& cfg_bn, const ScheduleKind& sched,
    const ScheduleStep& step) {
  const auto fa = forward(params, xa, Modality::A);
  const auto fb = forward(params, xb, Modality::B);
  auto [loss, g] = schedule_loss_and_gradient(fa.final, fb.final, fa.bn, fb.bn, cfg_final, cfg_bn,
                                              sched, step);
  TwinEncoderParams grads;
  grads.a = backward(params, xa, Modality::A, g.bottleneck.d_a, g.final_level.d_a);
  grads.b = backward(params, xb, Modality::B, g.bottleneck.d_b, g.final_level.d_b);
  return {loss, std::move(grads)};
}

/// Mean cosine similarity between row i of a and row i of b.
inline double mean_positive_cosine(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.rows() > 0,
          "mean_positive_cosine: shape mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double na = a.row(i).norm();
    const double nb = b.row(i).norm();
    s += (na > 0.0 && nb > 0.0) ? a.row(i).dot(b.row(i)) / (na * nb) : 0.0;
  }
  return s / static_cast<double>(a.rows());
}

/// Epoch-shuffled sampling without replacement; the order is reshuffled each
/// time it is exhausted.
class BatchSampler {
 public:
  BatchSampler(Eigen::Index n, std::uint64_t seed) : rng_(seed), order_(std::size_t(n)) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = Eigen::Index(i);
    cursor_ = order_.size();
  }

  void start_epoch() {
    rng_.shuffle(order_);
    cursor_ = 0;
  }

  std::vector<Eigen::Index> next(int batch_size) {
    std::vector<Eigen::Index> out;
    out.reserve(std::size_t(batch_size));
    while (int(out.size()) < batch_size) {
      if (cursor_ == order_.size()) start_epoch();
      out.push_back(order_[cursor_++]);
      if (out.size() == order_.size()) break;
    }
    return out;
  }

 private:
  Rng rng_;
  std::vector<Eigen::Index> order_;
  std::size_t cursor_;
};

inline Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(Eigen::Index(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = m.row(rows[i]);
  return out;
}

inline TrainingTrace run_training(const SyntheticPairDataset& ds, const ScheduleKind& sched,
                                  const LossConfig& cfg_final, const LossConfig& cfg_bn,
                                  const OptimizerConfig& opt) {
  validate(opt);
  if (ds.inputs_a.rows() != ds.inputs_b.rows() || ds.inputs_a.cols() != ds.inputs_b.cols() ||
      ds.inputs_a.rows() < 2)
    throw ContractError("run_training: dataset modalities must have equal shape and n >= 2");

  TrainingTrace trace;
  TwinEncoderParams params =
      init_params(int(ds.inputs_a.cols()), opt.bn_dim, opt.out_dim, opt.seed);
  trace.initial_params = params;
  trace.initial = embed_dataset(params, ds);

  SgdState state = SgdState::zeros_like(params);
  // Separate stream from the initializer so changing one never shifts the other.
  BatchSampler sampler(ds.inputs_a.rows(), opt.seed ^ 0x9e3779b97f4a7c15ULL);
  trace.records.reserve(std::size_t(opt.epochs) * std::size_t(opt.iterations_per_epoch));

  long global = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (int it = 0; it < opt.iterations_per_epoch; ++it, ++global) {
      const auto rows = sampler.next(opt.batch_size);
      const Matrix xa = gather_rows(ds.inputs_a, rows);
      const Matrix xb = gather_rows(ds.inputs_b, rows);
      auto [loss, grads] = batch_loss_and_gradient(params, xa, xb, cfg_final, cfg_bn, sched,
                                                   {epoch, global, opt.epochs});
      if (!std::isfinite(loss.loss) || !grads.all_finite())
        throw NumericalError("run_training: non-finite loss at epoch " + std::to_string(epoch) +
                             ", iteration " + std::to_string(it) + " (step " +
                             std::to_string(global) + ")");
      trace.records.push_back({epoch, it, loss.active, loss.loss});
      sgd_step(params, std::move(grads), state, opt);
    }
  }

  trace.final_params = params;
  trace.final = embed_dataset(params, ds);
  return trace;
}

}  // namespace comir
