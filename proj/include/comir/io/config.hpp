#pragma once

// Declarative experiment description. Every key is flat and doubles as a
// command-line flag (--<key>). Defaults follow the reference training and
// registration setup; unknown keys are rejected.

#include "comir/contrastive.hpp"
#include "comir/embedding.hpp"
#include "comir/io/text.hpp"
#include "comir/metrics.hpp"
#include "comir/registration/protocol.hpp"
#include "comir/registration/ransac.hpp"
#include "comir/registration/sift.hpp"
#include "comir/toy_optimizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace comir::io {

struct ExperimentConfig {
  // contrastive training
  std::string schedule = "baseline";
  std::string critic_final = "gaussian_l2";
  std::string critic_bn = "gaussian_l2";
  double tau_final = 0.5;
  double tau_bn = 0.5;
  std::string pairing = "cross_pair";
  double alpha = 0.5;
  double alternating_weight = 1.0;
  long split_epoch = 50;
  long epochs = 100;
  long iterations_per_epoch = 32;
  long batch_size = 32;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double grad_clip_norm = 1.0;
  long samples = 256;
  long input_dim = 32;
  long latent_dim = 8;
  long bn_dim = 8;
  long out_dim = 8;
  double noise_sigma = 0.1;
  std::uint64_t dataset_seed = 1;
  std::uint64_t optimizer_seed = 1;

  // registration protocol
  double max_theta_deg = 30.0;
  double max_translation_px = 100.0;
  double rsr_threshold_px = 100.0;
  double rsr_threshold_percent = 0.0;  // > 0 overrides rsr_threshold_px
  long pairs = 10;
  std::uint64_t pair_seed = 1;
  long texture_size = 834;
  std::uint64_t texture_seed = 1;
  long ransac_iterations = 1000;
  double inlier_threshold_px = 5.0;
  long min_inliers = 4;
  std::uint64_t ransac_seed = 1;
  long sift_min_octave_size = 128;
  long sift_max_octave_size = 1024;
  long sift_steps_per_octave = 3;
  double sift_initial_sigma = 1.6;
  double sift_contrast_threshold = 0.04;
  double sift_edge_threshold = 10.0;
  double ratio_test = 0.8;
  bool sift_subpixel = false;

  // image metrics
  std::string metrics = "mse,correlation,ssim,alpha_amd";
  long ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_dynamic_range = 1.0;
  double amd_alpha = 0.0;  // 0 = scale 40 px by image size / 834
  long amd_levels = 8;

  // embedding analysis
  std::string dissimilarity = "mse";
  long mds_max_iters = 2000;
  double mds_tol = 1e-9;
  std::uint64_t mds_seed = 1;
  std::string mds_init = "classical";
  bool spectrum_normalize = false;
  double collapse_epsilon = 1e-6;
  bool svg = false;

  std::string output_dir = "out";
  long threads = 1;
};

using FieldRef = std::variant<double*, long*, std::uint64_t*, bool*, std::string*>;

struct ConfigField {
  std::string name;
  FieldRef ref;
  std::string help;
};

inline std::vector<ConfigField> config_fields(ExperimentConfig& c) {
  return {
      {"schedule", &c.schedule, "baseline | alternating | summed | pretraining"},
      {"critic_final", &c.critic_final, "critic on the final layer: gaussian_l2 | cosine | l1"},
      {"critic_bn", &c.critic_bn, "critic on the bottleneck: gaussian_l2 | cosine | l1"},
      {"tau_final", &c.tau_final, "temperature of the final-layer loss"},
      {"tau_bn", &c.tau_bn, "temperature of the bottleneck loss"},
      {"pairing", &c.pairing, "negatives: cross_pair | diagonal"},
      {"alpha", &c.alpha, "weight of L_BN in the summed schedule"},
      {"alternating_weight", &c.alternating_weight, "loss weight in the alternating schedule"},
      {"split_epoch", &c.split_epoch, "first epoch of L_C in the pretraining schedule"},
      {"epochs", &c.epochs, "training epochs"},
      {"iterations_per_epoch", &c.iterations_per_epoch, "SGD steps per epoch"},
      {"batch_size", &c.batch_size, "samples per step"},
      {"learning_rate", &c.learning_rate, "SGD learning rate"},
      {"momentum", &c.momentum, "SGD momentum"},
      {"weight_decay", &c.weight_decay, "SGD weight decay"},
      {"grad_clip_norm", &c.grad_clip_norm, "global gradient norm limit"},
      {"samples", &c.samples, "synthetic dataset size"},
      {"input_dim", &c.input_dim, "synthetic input dimension"},
      {"latent_dim", &c.latent_dim, "shared latent dimension of the synthetic data"},
      {"bn_dim", &c.bn_dim, "bottleneck width"},
      {"out_dim", &c.out_dim, "final embedding width"},
      {"noise_sigma", &c.noise_sigma, "additive noise of the synthetic modalities"},
      {"dataset_seed", &c.dataset_seed, "seed of the synthetic dataset"},
      {"optimizer_seed", &c.optimizer_seed, "seed of initialization and batch sampling"},
      {"max_theta_deg", &c.max_theta_deg, "synthetic rotation bound, degrees"},
      {"max_translation_px", &c.max_translation_px, "synthetic translation bound, pixels"},
      {"rsr_threshold_px", &c.rsr_threshold_px, "success threshold on the corner error, pixels"},
      {"rsr_threshold_percent", &c.rsr_threshold_percent, "success threshold as % of image size (overrides px when > 0)"},
      {"pairs", &c.pairs, "number of synthesized test pairs"},
      {"pair_seed", &c.pair_seed, "seed of the synthesized transforms"},
      {"texture_size", &c.texture_size, "side of the generated texture when no source image is given"},
      {"texture_seed", &c.texture_seed, "seed of the generated texture"},
      {"ransac_iterations", &c.ransac_iterations, "RANSAC iterations"},
      {"inlier_threshold_px", &c.inlier_threshold_px, "RANSAC inlier threshold, pixels"},
      {"min_inliers", &c.min_inliers, "minimum consensus size"},
      {"ransac_seed", &c.ransac_seed, "RANSAC seed"},
      {"sift_min_octave_size", &c.sift_min_octave_size, "smallest octave side, pixels"},
      {"sift_max_octave_size", &c.sift_max_octave_size, "largest octave side, pixels"},
      {"sift_steps_per_octave", &c.sift_steps_per_octave, "scale steps per octave"},
      {"sift_initial_sigma", &c.sift_initial_sigma, "initial sigma of each octave"},
      {"sift_contrast_threshold", &c.sift_contrast_threshold, "DoG contrast threshold"},
      {"sift_edge_threshold", &c.sift_edge_threshold, "edge response ratio"},
      {"ratio_test", &c.ratio_test, "nearest/second-nearest distance ratio"},
      {"sift_subpixel", &c.sift_subpixel, "quadratic subpixel extremum refinement"},
      {"metrics", &c.metrics, "comma list of mse, correlation, ssim, alpha_amd"},
      {"ssim_window", &c.ssim_window, "SSIM window size (odd)"},
      {"ssim_sigma", &c.ssim_sigma, "SSIM Gaussian sigma"},
      {"ssim_dynamic_range", &c.ssim_dynamic_range, "SSIM dynamic range L"},
      {"amd_alpha", &c.amd_alpha, "alpha-AMD truncation, pixels (0 = scaled default)"},
      {"amd_levels", &c.amd_levels, "alpha-AMD quantization levels"},
      {"dissimilarity", &c.dissimilarity, "mse | euclidean"},
      {"mds_max_iters", &c.mds_max_iters, "MDS iteration budget"},
      {"mds_tol", &c.mds_tol, "MDS relative stress tolerance"},
      {"mds_seed", &c.mds_seed, "MDS seed"},
      {"mds_init", &c.mds_init, "classical | random"},
      {"spectrum_normalize", &c.spectrum_normalize, "divide spectra by their largest value"},
      {"collapse_epsilon", &c.collapse_epsilon, "relative threshold for collapsed dimensions"},
      {"svg", &c.svg, "also emit SVG plots"},
      {"output_dir", &c.output_dir, "output directory"},
      {"threads", &c.threads, "worker threads for independent pairs"},
  };
}

namespace detail {

inline void assign_json(const ConfigField& f, const nlohmann::json& v) {
  auto bad = [&](const char* want) {
    throw ConfigError("config key '" + f.name + "': expected " + want + ", got " + v.dump());
  };
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number()) bad("a number");
          *p = v.get<double>();
        } else if constexpr (std::is_same_v<T, long>) {
          if (!v.is_number_integer()) bad("an integer");
          *p = v.get<long>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (!v.is_number_unsigned()) bad("a non-negative integer");
          *p = v.get<std::uint64_t>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) bad("a boolean");
          *p = v.get<bool>();
        } else {
          if (!v.is_string()) bad("a string");
          *p = v.get<std::string>();
        }
      },
      f.ref);
}

}  // namespace detail

inline void assign_string(const ConfigField& f, const std::string& s) {
  auto bad = [&](const char* want) {
    throw ConfigError("--" + f.name + ": expected " + want + ", got '" + s + "'");
  };
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          const auto v = parse_real(s);
          if (!v) bad("a number");
          *p = *v;
        } else if constexpr (std::is_same_v<T, long>) {
          const auto v = parse_integer(s);
          if (!v) bad("an integer");
          *p = *v;
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          const auto v = parse_integer(s);
          if (!v || *v < 0) bad("a non-negative integer");
          *p = std::uint64_t(*v);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (s == "true" || s == "1") *p = true;
          else if (s == "false" || s == "0") *p = false;
          else bad("true or false");
        } else {
          *p = s;
        }
      },
      f.ref);
}

inline void apply_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  const auto fields = config_fields(cfg);
  for (const auto& [key, value] : j.items()) {
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.name == key; });
    if (it == fields.end()) throw ConfigError("config: unknown key '" + key + "'");
    detail::assign_json(*it, value);
  }
}

inline void load_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  apply_json(cfg, j);
}

/// COMIR_OUTPUT_DIR and COMIR_THREADS override the corresponding keys.
inline void apply_environment(ExperimentConfig& cfg) {
  if (const char* out = std::getenv("COMIR_OUTPUT_DIR"); out && *out) cfg.output_dir = out;
  if (const char* t = std::getenv("COMIR_THREADS"); t && *t) {
    const auto v = parse_integer(t);
    if (!v || *v < 1) throw ConfigError("COMIR_THREADS must be a positive integer");
    cfg.threads = *v;
  }
}

inline nlohmann::json to_json(ExperimentConfig cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_fields(cfg))
    std::visit([&](auto* p) { j[f.name] = *p; }, f.ref);
  return j;
}

// Conversions into the library's typed configs. Each validates its inputs.

inline LossConfig loss_config(const ExperimentConfig& c, Level level) {
  LossConfig l;
  l.critic = critic_from_string(level == Level::final ? c.critic_final : c.critic_bn);
  l.temperature = level == Level::final ? c.tau_final : c.tau_bn;
  l.pairing = pairing_from_string(c.pairing);
  if (!(l.temperature > 0.0)) throw ConfigError("temperatures must be > 0");
  return l;
}

inline ScheduleKind schedule_kind(const ExperimentConfig& c) {
  if (c.schedule == "baseline") return schedule::Baseline{};
  if (c.schedule == "alternating") {
    if (!(c.alternating_weight > 0.0)) throw ConfigError("alternating_weight must be > 0");
    return schedule::Alternating{c.alternating_weight};
  }
  if (c.schedule == "summed") {
    if (!(c.alpha > 0.0)) throw ConfigError("alpha must be > 0");
    return schedule::Summed{c.alpha};
  }
  if (c.schedule == "pretraining") {
    if (c.split_epoch < 1 || c.split_epoch >= c.epochs)
      throw ConfigError("split_epoch must lie in [1, epochs)");
    return schedule::Pretraining{int(c.split_epoch)};
  }
  throw ConfigError("unknown schedule '" + c.schedule + "'");
}

inline DatasetConfig dataset_config(const ExperimentConfig& c) {
  if (c.samples < 2 || c.input_dim < 1 || c.latent_dim < 1 || c.noise_sigma < 0.0)
    throw ConfigError("dataset: samples >= 2, input_dim >= 1, latent_dim >= 1, noise_sigma >= 0");
  return {int(c.samples), int(c.input_dim), int(c.latent_dim), c.noise_sigma, c.dataset_seed};
}

inline OptimizerConfig optimizer_config(const ExperimentConfig& c) {
  OptimizerConfig o;
  o.learning_rate = c.learning_rate;
  o.momentum = c.momentum;
  o.weight_decay = c.weight_decay;
  o.grad_clip_norm = c.grad_clip_norm;
  o.epochs = int(c.epochs);
  o.iterations_per_epoch = int(c.iterations_per_epoch);
  o.batch_size = int(c.batch_size);
  o.seed = c.optimizer_seed;
  o.bn_dim = int(c.bn_dim);
  o.out_dim = int(c.out_dim);
  if (o.bn_dim < 1 || o.out_dim < 1) throw ConfigError("bn_dim and out_dim must be >= 1");
  try {
    validate(o);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return o;
}

inline SiftConfig sift_config(const ExperimentConfig& c) {
  SiftConfig s;
  s.min_octave_size = int(c.sift_min_octave_size);
  s.max_octave_size = int(c.sift_max_octave_size);
  s.steps_per_octave = int(c.sift_steps_per_octave);
  s.initial_sigma = c.sift_initial_sigma;
  s.contrast_threshold = c.sift_contrast_threshold;
  s.edge_threshold = c.sift_edge_threshold;
  s.ratio_test_threshold = c.ratio_test;
  s.subpixel_refinement = c.sift_subpixel;
  try {
    validate(s);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline RansacConfig ransac_config(const ExperimentConfig& c) {
  RansacConfig r{int(c.ransac_iterations), c.inlier_threshold_px, int(c.min_inliers), c.ransac_seed};
  try {
    validate(r);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return r;
}

inline SsimConfig ssim_config(const ExperimentConfig& c) {
  if (c.ssim_window < 3 || c.ssim_window % 2 == 0) throw ConfigError("ssim_window must be odd and >= 3");
  if (!(c.ssim_sigma > 0.0) || !(c.ssim_dynamic_range > 0.0))
    throw ConfigError("ssim_sigma and ssim_dynamic_range must be > 0");
  return {int(c.ssim_window), c.ssim_sigma, c.ssim_dynamic_range};
}

inline AlphaAmdConfig amd_config(const ExperimentConfig& c, int width, int height) {
  if (c.amd_alpha < 0.0 || c.amd_levels < 1) throw ConfigError("amd_alpha >= 0 and amd_levels >= 1 required");
  return {c.amd_alpha > 0.0 ? c.amd_alpha : default_alpha(width, height), int(c.amd_levels)};
}

inline MdsConfig mds_config(const ExperimentConfig& c) {
  if (c.mds_max_iters < 0 || !(c.mds_tol >= 0.0)) throw ConfigError("mds_max_iters >= 0 and mds_tol >= 0 required");
  return {int(c.mds_max_iters), c.mds_tol, c.mds_seed, mds_init_from_string(c.mds_init)};
}

inline double rsr_threshold(const ExperimentConfig& c, int width, int height) {
  if (c.rsr_threshold_percent > 0.0) return threshold_from_percent(c.rsr_threshold_percent, width, height);
  if (!(c.rsr_threshold_px > 0.0)) throw ConfigError("rsr_threshold_px must be > 0");
  return c.rsr_threshold_px;
}

}  // namespace comir::io
