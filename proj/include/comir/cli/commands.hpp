#pragma once

// Command implementations behind the comirdiag tool. Each command reads its
// inputs, writes every output file atomically into cfg.output_dir and throws
// the library error types on failure; the tool maps those to exit codes.

#include "comir/embedding.hpp"
#include "comir/io/config.hpp"
#include "comir/io/csv.hpp"
#include "comir/io/matrix_file.hpp"
#include "comir/io/pgm.hpp"
#include "comir/io/svg.hpp"
#include "comir/metrics.hpp"
#include "comir/registration/protocol.hpp"
#include "comir/toy_optimizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace comir::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

inline void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// JSON has no inf/nan; they are written as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// CSV fields may not contain separators or newlines.
inline std::string field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

/// PGM files of a directory sorted by name, excluding mask siblings.
inline std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: '" + dir.string() + "'");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".pgm") continue;
    if (e.path().stem().extension() == ".mask") continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no .pgm images in '" + dir.string() + "'");
  return out;
}

/// Runs f(i) for i in [0, n) on up to `threads` workers. The first exception
/// is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, long threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(n, std::size_t(std::max(1L, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : io::split(s, ',')) {
    const auto w = io::split_whitespace(part);
    if (!w.empty()) out.push_back(w.front());
  }
  return out;
}

inline json transform_json(const RigidTransform& t) {
  return {{"theta_rad", t.theta}, {"tx", t.tx}, {"ty", t.ty}, {"cx", t.cx}, {"cy", t.cy}};
}

inline RigidTransform transform_from_json(const json& j, const std::string& source) {
  try {
    return {j.at("theta_rad").get<double>(), j.at("tx").get<double>(), j.at("ty").get<double>(),
            j.at("cx").get<double>(), j.at("cy").get<double>()};
  } catch (const json::exception& e) {
    throw DataError(source + ": ground truth needs theta_rad, tx, ty, cx, cy (" + e.what() + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train-toy

struct TrainSummary {
  double initial_loss = 0.0;
  double final_loss = 0.0;  // mean over the last epoch
  double loss_reduction = 0.0;
  double initial_cosine = 0.0;
  double final_cosine = 0.0;
};

inline TrainSummary train_toy(const io::ExperimentConfig& cfg, std::ostream& log) {
  const auto ds = make_dataset(io::dataset_config(cfg));
  const auto sched = io::schedule_kind(cfg);
  const auto opt = io::optimizer_config(cfg);
  const auto trace = run_training(ds, sched, io::loss_config(cfg, Level::final),
                                  io::loss_config(cfg, Level::bottleneck), opt);
  const fs::path out = cfg.output_dir;

  io::CsvTable t;
  t.header = {"epoch", "iteration", "step", "active", "loss"};
  long step = 0;
  for (const auto& r : trace.records)
    t.rows.push_back({std::to_string(r.epoch), std::to_string(r.iteration), std::to_string(step++),
                      to_string(r.active), io::format_real(r.loss)});
  t.metadata = {{"schedule", std::string(schedule_name(sched))}};
  io::save_csv(out / "trace.csv", t);

  auto save = [&](const char* stage, const EmbeddingSet& e) {
    const std::string name = std::string(stage) + "_" + std::string(to_string(e.level)) + "_" +
                             std::string(to_string(e.modality));
    io::save_matrix(out / (name + ".mtx"), e.data,
                    {"stage=" + std::string(stage), "level=" + std::string(to_string(e.level)),
                     "modality=" + std::string(to_string(e.modality)),
                     "schedule=" + std::string(schedule_name(sched))});
  };
  for (const auto* e : {&trace.initial.bn_a, &trace.initial.bn_b, &trace.initial.final_a, &trace.initial.final_b})
    save("initial", *e);
  for (const auto* e : {&trace.final.bn_a, &trace.final.bn_b, &trace.final.final_a, &trace.final.final_b})
    save("final", *e);

  TrainSummary s;
  s.initial_loss = trace.records.front().loss;
  double last = 0.0;
  long count = 0;
  for (const auto& r : trace.records)
    if (r.epoch == opt.epochs - 1) {
      last += r.loss;
      ++count;
    }
  s.final_loss = last / double(count);
  s.loss_reduction = s.initial_loss != 0.0 ? 1.0 - s.final_loss / s.initial_loss : 0.0;
  s.initial_cosine = mean_positive_cosine(trace.initial.final_a.data, trace.initial.final_b.data);
  s.final_cosine = mean_positive_cosine(trace.final.final_a.data, trace.final.final_b.data);

  // Output location and thread count do not affect results; leave them out so
  // reruns elsewhere stay byte-identical.
  json run_config = io::to_json(cfg);
  run_config.erase("output_dir");
  run_config.erase("threads");
  detail::write_json(out / "train_summary.json",
                     {{"schedule", schedule_name(sched)},
                      {"steps", trace.records.size()},
                      {"initial_loss", detail::number(s.initial_loss)},
                      {"final_loss", detail::number(s.final_loss)},
                      {"loss_reduction", detail::number(s.loss_reduction)},
                      {"initial_cosine", detail::number(s.initial_cosine)},
                      {"final_cosine", detail::number(s.final_cosine)},
                      {"bn_final_cosine", detail::number(mean_positive_cosine(trace.final.bn_a.data,
                                                                              trace.final.bn_b.data))},
                      {"config", run_config}});
  log << "train-toy: " << trace.records.size() << " steps, loss " << s.initial_loss << " -> "
      << s.final_loss << ", positive-pair cosine " << s.final_cosine << "\n";
  return s;
}

// ---------------------------------------------------------------------------
// register

struct RegisterInputs {
  std::string fixed_dir;   // with moving_dir: pairs matched by file name
  std::string moving_dir;  // <stem>.json next to each moving image holds the ground truth
  std::string source;      // synthesize pairs from this image
  std::string save_pairs;  // write synthesized pairs here (fixed/ and moving/)
};

struct RegistrationRow {
  std::string pair_id;
  double error_px = std::numeric_limits<double>::infinity();
  double threshold_px = 0.0;
  RegistrationDiagnostics diagnostics;
  std::optional<RigidTransform> estimate;
  std::string status;

  bool success() const { return error_px < threshold_px; }
};

struct RegistrationReport {
  std::vector<RegistrationRow> rows;
  double rsr = 0.0;
  double median_error_px = 0.0;
};

inline RegistrationReport register_command(const io::ExperimentConfig& cfg, const RegisterInputs& in,
                                           std::ostream& log) {
  const SiftConfig sift = io::sift_config(cfg);
  const RansacConfig ransac = io::ransac_config(cfg);
  const fs::path out = cfg.output_dir;
  std::vector<RegistrationRow> rows;

  const bool dir_mode = !in.fixed_dir.empty() || !in.moving_dir.empty();
  if (dir_mode) {
    if (in.fixed_dir.empty() || in.moving_dir.empty())
      throw ConfigError("register: --fixed-dir and --moving-dir go together");
    if (!in.source.empty()) throw ConfigError("register: --source cannot be combined with directories");
    const auto fixed = detail::list_images(in.fixed_dir);
    rows.resize(fixed.size());
    detail::parallel_for(fixed.size(), cfg.threads, [&](std::size_t i) {
      RegistrationRow& row = rows[i];
      row.pair_id = fixed[i].stem().string();
      try {
        const Image a = io::load_pgm(fixed[i]);
        const fs::path mp = fs::path(in.moving_dir) / fixed[i].filename();
        const Image b = io::load_pgm(mp);
        fs::path gp = mp;
        gp.replace_extension(".json");
        const RigidTransform gt = detail::transform_from_json(detail::read_json(gp), gp.string());
        row.threshold_px = io::rsr_threshold(cfg, a.width, a.height);
        const auto r = register_pair(a, b, sift, ransac);
        row.diagnostics = r.diagnostics;
        row.estimate = r.transform;
        if (r.transform) row.error_px = registration_error(*r.transform, gt, a.width, a.height);
        row.status = r.success() ? "ok" : "failed:" + r.diagnostics.failed_stage;
      } catch (const DataError& e) {
        row.status = detail::field(std::string("error:") + e.what());
      } catch (const DomainError& e) {
        row.status = detail::field(std::string("error:") + e.what());
      }
    });
  } else {
    const Image fixed = in.source.empty()
                            ? make_texture(int(cfg.texture_size), int(cfg.texture_size), cfg.texture_seed)
                            : io::load_pgm(in.source);
    if (cfg.pairs < 1) throw ConfigError("register: pairs must be >= 1");
    const double threshold = io::rsr_threshold(cfg, fixed.width, fixed.height);
    const Features ff = extract_features(fixed, sift);
    log << "register: " << ff.keypoints.size() << " keypoints in the fixed image\n";
    rows.resize(std::size_t(cfg.pairs));
    std::mutex save_mu;
    detail::parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
      RegistrationRow& row = rows[i];
      char id[32];
      std::snprintf(id, sizeof id, "pair_%03zu", i);
      row.pair_id = id;
      row.threshold_px = threshold;
      const TestPair tp = synthesize_test_pair(fixed, cfg.max_theta_deg, cfg.max_translation_px,
                                               cfg.pair_seed + i);
      if (!in.save_pairs.empty()) {
        const fs::path base = in.save_pairs;
        std::lock_guard lock(save_mu);
        io::save_pgm(base / "fixed" / (row.pair_id + ".pgm"), fixed, io::PgmFormat::binary_p5, 65535);
        io::save_pgm(base / "moving" / (row.pair_id + ".pgm"), tp.moving, io::PgmFormat::binary_p5, 65535);
        detail::write_json(base / "moving" / (row.pair_id + ".json"), detail::transform_json(tp.ground_truth));
      }
      const auto r = register_features(ff, extract_features(tp.moving, sift), fixed.width, fixed.height,
                                       sift, ransac);
      row.diagnostics = r.diagnostics;
      row.estimate = r.transform;
      if (r.transform) row.error_px = registration_error(*r.transform, tp.ground_truth, fixed.width, fixed.height);
      row.status = r.success() ? "ok" : "failed:" + r.diagnostics.failed_stage;
    });
  }

  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  RegistrationReport rep;
  std::vector<double> errors;
  std::size_t ok = 0;
  for (const auto& r : rows) {
    errors.push_back(r.error_px);
    ok += r.success() ? 1 : 0;
  }
  rep.rsr = 100.0 * double(ok) / double(rows.size());
  rep.median_error_px = median(errors);

  io::CsvTable t;
  t.header = {"pair_id", "error_px", "success", "inliers", "matches", "threshold_px",
              "keypoints_fixed", "keypoints_moving", "theta_rad", "tx", "ty", "status"};
  json jrows = json::array();
  for (const auto& r : rows) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const RigidTransform e = r.estimate.value_or(RigidTransform{nan, nan, nan, nan, nan});
    t.rows.push_back({r.pair_id, io::format_real(r.error_px), r.success() ? "1" : "0",
                      std::to_string(r.diagnostics.inliers), std::to_string(r.diagnostics.matches),
                      io::format_real(r.threshold_px), std::to_string(r.diagnostics.keypoints_fixed),
                      std::to_string(r.diagnostics.keypoints_moving), io::format_real(e.theta),
                      io::format_real(e.tx), io::format_real(e.ty), r.status});
    jrows.push_back({{"pair_id", r.pair_id},
                     {"error_px", detail::number(r.error_px)},
                     {"success", r.success()},
                     {"inliers", r.diagnostics.inliers},
                     {"matches", r.diagnostics.matches},
                     {"threshold_px", r.threshold_px},
                     {"status", r.status}});
  }
  t.metadata = {{"rsr", io::format_real(rep.rsr)}, {"median_error_px", io::format_real(rep.median_error_px)}};
  rep.rows = std::move(rows);
  io::save_csv(out / "registration.csv", t);
  detail::write_json(out / "registration_summary.json",
                     {{"pairs", rep.rows.size()},
                      {"successes", ok},
                      {"rsr", rep.rsr},
                      {"median_error_px", detail::number(rep.median_error_px)},
                      {"mode", dir_mode ? "directories" : "synthetic"},
                      {"rows", jrows}});
  log << "register: RSR " << rep.rsr << "% over " << rep.rows.size() << " pairs, median error "
      << rep.median_error_px << " px\n";
  return rep;
}

// ---------------------------------------------------------------------------
// eval-metrics

struct MetricsInputs {
  std::string a_dir;
  std::string b_dir;          // images paired with a_dir by file name
  std::string registration;   // optional registration.csv joined on pair_id
  std::string features_a;     // optional feature matrices for the Frechet distance
  std::string features_b;
};

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names = {"mse", "correlation", "ssim", "alpha_amd", "fid"};
  return names;
}

struct MetricsReport {
  std::vector<std::string> columns;  // per-pair numeric columns in output order
  std::vector<std::string> pair_ids;
  std::vector<std::vector<double>> values;  // [pair][column], nan when undefined
  std::vector<std::string> status;
  std::map<std::string, std::pair<double, double>> summary;  // column -> (median, mean) over finite values
  std::optional<double> frechet;
};

inline MetricsReport eval_metrics(const io::ExperimentConfig& cfg, const MetricsInputs& in, std::ostream& log) {
  if (in.a_dir.empty() || in.b_dir.empty()) throw ConfigError("eval-metrics: --a-dir and --b-dir are required");
  const auto selected = detail::split_list(cfg.metrics);
  if (selected.empty()) throw ConfigError("eval-metrics: empty metric selection");
  for (const auto& m : selected)
    if (std::find(known_metrics().begin(), known_metrics().end(), m) == known_metrics().end())
      throw ConfigError("eval-metrics: unknown metric '" + m + "'");
  auto wants = [&](const char* m) { return std::find(selected.begin(), selected.end(), m) != selected.end(); };
  const SsimConfig ssim = io::ssim_config(cfg);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  MetricsReport rep;
  for (const char* m : {"mse", "correlation", "ssim", "alpha_amd"})
    if (wants(m)) rep.columns.push_back(m);

  std::optional<io::CsvTable> reg;
  if (!in.registration.empty()) {
    reg = io::load_csv(in.registration);
    reg->column("pair_id");
    rep.columns.push_back("registration_error");
    rep.columns.push_back("success");
  }

  const auto files = detail::list_images(in.a_dir);
  const std::size_t n = files.size();
  rep.pair_ids.resize(n);
  rep.values.assign(n, std::vector<double>(rep.columns.size(), nan));
  rep.status.assign(n, "ok");
  std::vector<Image> images_a(n), images_b(n);
  std::vector<bool> loaded(n, false);

  detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
    rep.pair_ids[i] = files[i].stem().string();
    try {
      images_a[i] = io::load_pgm(files[i]);
      images_b[i] = io::load_pgm(fs::path(in.b_dir) / files[i].filename());
      if (!images_a[i].same_shape(images_b[i])) throw DataError("image dimensions differ");
      loaded[i] = true;
    } catch (const DataError& e) {
      rep.status[i] = detail::field(std::string("error:") + e.what());
      return;
    }
    const Image& a = images_a[i];
    const Image& b = images_b[i];
    std::vector<std::string> notes;
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      const std::string& m = rep.columns[c];
      try {
        if (m == "mse") rep.values[i][c] = image_mse(a, b);
        else if (m == "correlation") rep.values[i][c] = image_correlation(a, b);
        else if (m == "ssim") rep.values[i][c] = image_ssim(a, b, ssim);
        else if (m == "alpha_amd") rep.values[i][c] = alpha_amd(a, b, io::amd_config(cfg, a.width, a.height));
      } catch (const DomainError& e) {
        notes.push_back(m + " undefined");
      } catch (const DataError& e) {
        notes.push_back(m + " " + e.what());
      }
    }
    if (!notes.empty()) {
      std::string s = "partial:";
      for (std::size_t k = 0; k < notes.size(); ++k) s += (k ? "; " : "") + notes[k];
      rep.status[i] = detail::field(s);
    }
  });

  if (reg) {
    const std::size_t id_col = reg->column("pair_id");
    const std::size_t err_col = reg->column("error_px");
    const std::size_t ok_col = reg->column("success");
    const std::size_t ce = rep.columns.size() - 2;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& row : reg->rows)
        if (row[id_col] == rep.pair_ids[i]) {
          rep.values[i][ce] = io::parse_real(row[err_col]).value_or(nan);
          rep.values[i][ce + 1] = io::parse_real(row[ok_col]).value_or(nan);
          break;
        }
  }

  for (std::size_t c = 0; c < rep.columns.size(); ++c) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isnan(rep.values[i][c])) v.push_back(rep.values[i][c]);
    if (v.empty()) rep.summary[rep.columns[c]] = {nan, nan};
    else rep.summary[rep.columns[c]] = {median(v), mean(v)};
  }

  if (wants("fid") || !in.features_a.empty() || !in.features_b.empty()) {
    FeatureSet fa, fb;
    if (!in.features_a.empty() || !in.features_b.empty()) {
      if (in.features_a.empty() || in.features_b.empty())
        throw ConfigError("eval-metrics: --features-a and --features-b go together");
      fa = io::load_matrix(in.features_a).values;
      fb = io::load_matrix(in.features_b).values;
    } else {
      std::vector<Image> la, lb;
      for (std::size_t i = 0; i < n; ++i)
        if (loaded[i]) {
          la.push_back(images_a[i]);
          lb.push_back(images_b[i]);
        }
      if (la.empty()) throw DataError("eval-metrics: no loadable pairs for the Frechet distance");
      if (la.front().size() > 4096)
        throw ConfigError("eval-metrics: raw-pixel features are limited to 4096 pixels per image; "
                          "pass --features-a and --features-b");
      fa = raw_pixel_features(la);
      fb = raw_pixel_features(lb);
    }
    rep.frechet = frechet_distance(fa, fb);
  }

  const fs::path out = cfg.output_dir;
  io::CsvTable per;
  per.header = {"pair_id"};
  per.header.insert(per.header.end(), rep.columns.begin(), rep.columns.end());
  per.header.push_back("status");
  json jrows = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> r{rep.pair_ids[i]};
    json jr = {{"pair_id", rep.pair_ids[i]}};
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      r.push_back(io::format_real(rep.values[i][c]));
      jr[rep.columns[c]] = detail::number(rep.values[i][c]);
    }
    r.push_back(rep.status[i]);
    jr["status"] = rep.status[i];
    per.rows.push_back(std::move(r));
    jrows.push_back(std::move(jr));
  }
  io::CsvTable sum;
  sum.header = {"metric", "median", "mean"};
  json jsum = json::object();
  for (const auto& c : rep.columns) {
    const auto [md, mn] = rep.summary.at(c);
    sum.rows.push_back({c, io::format_real(md), io::format_real(mn)});
    jsum[c] = {{"median", detail::number(md)}, {"mean", detail::number(mn)}};
  }
  if (rep.frechet) {
    per.metadata.emplace_back("frechet_distance", io::format_real(*rep.frechet));
    sum.metadata.emplace_back("frechet_distance", io::format_real(*rep.frechet));
  }
  json j = {{"pairs", jrows}, {"summary", jsum}};
  if (rep.frechet) j["frechet_distance"] = detail::number(*rep.frechet);
  io::save_csv(out / "metrics.csv", per);
  io::save_csv(out / "metrics_summary.csv", sum);
  detail::write_json(out / "metrics.json", j);
  log << "eval-metrics: " << n << " pairs\n";
  return rep;
}

// ---------------------------------------------------------------------------
// mds

struct MdsInputs {
  std::string a;      // embeddings of modality A (rows = samples)
  std::string b;      // optional paired embeddings of modality B
  std::string delta;  // or a precomputed square dissimilarity matrix
  std::string name = "mds";
};

inline MdsSolution mds_command(const io::ExperimentConfig& cfg, const MdsInputs& in, std::ostream& log) {
  LabeledDissimilarity ld;
  const Dissimilarity metric = dissimilarity_from_string(cfg.dissimilarity);
  if (!in.delta.empty()) {
    if (!in.a.empty() || !in.b.empty()) throw ConfigError("mds: --delta excludes --a/--b");
    ld.delta = io::load_matrix(in.delta).values;
    if (ld.delta.rows() != ld.delta.cols()) throw DataError(in.delta + ": dissimilarity matrix must be square");
    for (Eigen::Index i = 0; i < ld.delta.rows(); ++i) ld.labels.push_back({Modality::A, long(i)});
  } else if (!in.a.empty() && !in.b.empty()) {
    const EmbeddingSet a{Level::final, Modality::A, io::load_matrix(in.a).values};
    const EmbeddingSet b{Level::final, Modality::B, io::load_matrix(in.b).values};
    ld = dissimilarity_matrix(a, b, metric);
  } else if (!in.a.empty()) {
    const Matrix items = io::load_matrix(in.a).values;
    ld.delta = dissimilarity_matrix(items, metric);
    for (Eigen::Index i = 0; i < items.rows(); ++i) ld.labels.push_back({Modality::A, long(i)});
  } else {
    throw ConfigError("mds: pass --a [--b] or --delta");
  }
  MdsSolution sol;
  try {
    sol = mds_fit(ld.delta, io::mds_config(cfg));
  } catch (const ContractError& e) {
    throw DataError(std::string("mds: ") + e.what());
  }

  const fs::path out = cfg.output_dir;
  io::CsvTable t;
  t.header = {"x", "y", "modality", "pair_id"};
  for (Eigen::Index i = 0; i < sol.points.rows(); ++i)
    t.rows.push_back({io::format_real(sol.points(i, 0)), io::format_real(sol.points(i, 1)),
                      std::string(to_string(ld.labels[std::size_t(i)].modality)),
                      std::to_string(ld.labels[std::size_t(i)].pair_id)});
  t.metadata = {{"final_stress", io::format_real(sol.final_stress)},
                {"iterations", std::to_string(sol.iterations_used)},
                {"init", cfg.mds_init},
                {"dissimilarity", in.delta.empty() ? cfg.dissimilarity : "precomputed"},
                {"zero_dissimilarities", std::to_string(sol.diagnostics.zero_dissimilarities)},
                {"coincident_pairs", std::to_string(sol.diagnostics.coincident_pairs)}};
  io::save_csv(out / (in.name + ".csv"), t);

  io::CsvTable h;
  h.header = {"step", "stress"};
  for (std::size_t k = 0; k < sol.stress_history.size(); ++k)
    h.rows.push_back({std::to_string(k), io::format_real(sol.stress_history[k])});
  io::save_csv(out / (in.name + "_history.csv"), h);

  detail::write_json(out / (in.name + "_summary.json"),
                     {{"final_stress", detail::number(sol.final_stress)},
                      {"iterations", sol.iterations_used},
                      {"points", sol.points.rows()},
                      {"zero_dissimilarities", sol.diagnostics.zero_dissimilarities},
                      {"coincident_pairs", sol.diagnostics.coincident_pairs}});
  if (cfg.svg) io::write_file_atomic(out / (in.name + ".svg"), io::mds_scatter_svg(sol.points, ld.labels, in.name));
  log << "mds: " << sol.points.rows() << " points, stress " << sol.final_stress << " after "
      << sol.iterations_used << " iterations\n";
  return sol;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumInputs {
  std::vector<std::string> inputs;  // embedding matrices
};

inline std::map<std::string, std::pair<SvSpectrum, CollapseMetrics>> spectrum_command(
    const io::ExperimentConfig& cfg, const SpectrumInputs& in, std::ostream& log) {
  if (in.inputs.empty()) throw ConfigError("spectrum: pass at least one --input");
  if (!(cfg.collapse_epsilon > 0.0)) throw ConfigError("collapse_epsilon must be > 0");
  const fs::path out = cfg.output_dir;
  std::map<std::string, std::pair<SvSpectrum, CollapseMetrics>> result;
  std::vector<std::vector<double>> series;
  std::vector<std::string> names;
  json summary = json::object();
  for (const auto& path : in.inputs) {
    const std::string stem = fs::path(path).stem().string();
    if (result.count(stem)) throw ConfigError("spectrum: duplicate input name '" + stem + "'");
    const Matrix m = io::load_matrix(path).values;
    if (m.rows() < 2 || m.cols() < 1) throw DataError(path + ": need at least two rows");
    SvSpectrum s = sv_spectrum(m);
    const CollapseMetrics cm = collapse_metrics(s, cfg.collapse_epsilon);
    if (cfg.spectrum_normalize) s = normalized(std::move(s));

    io::CsvTable t;
    t.header = {"index", "value"};
    for (std::size_t i = 0; i < s.values.size(); ++i)
      t.rows.push_back({std::to_string(i), io::format_real(s.values[i])});
    t.metadata = {{"collapsed_dims", std::to_string(cm.collapsed_dims)},
                  {"effective_rank", io::format_real(cm.effective_rank)},
                  {"epsilon", io::format_real(cfg.collapse_epsilon)},
                  {"normalized", cfg.spectrum_normalize ? "true" : "false"}};
    io::save_csv(out / ("spectrum_" + stem + ".csv"), t);
    summary[stem] = {{"collapsed_dims", cm.collapsed_dims},
                     {"effective_rank", detail::number(cm.effective_rank)},
                     {"dims", s.values.size()}};
    log << "spectrum: " << stem << " effective rank " << cm.effective_rank << ", " << cm.collapsed_dims
        << " collapsed of " << s.values.size() << "\n";
    series.push_back(s.values);
    names.push_back(stem);
    result.emplace(stem, std::pair{std::move(s), cm});
  }
  detail::write_json(out / "spectrum_summary.json", summary);
  if (cfg.svg) io::write_file_atomic(out / "spectrum.svg", io::spectrum_svg(series, names));
  return result;
}

// ---------------------------------------------------------------------------
// report

struct ReportInputs {
  std::vector<std::string> runs;  // run directories
  std::string target = "rsr";     // PCC of every mean_* column against this one
};

namespace detail {

inline void flatten(const json& j, const std::string& prefix, std::map<std::string, double>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (k == "config" || k == "rows" || (k == "pairs" && v.is_array())) continue;
      flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    }
  } else if (j.is_number()) {
    out[prefix] = j.get<double>();
  } else if (j.is_boolean()) {
    out[prefix] = j.get<bool>() ? 1.0 : 0.0;
  } else if (j.is_null()) {
    out[prefix] = std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

struct RunReport {
  std::vector<std::string> runs;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // [run][column]
  std::vector<std::pair<std::string, double>> pcc;
};

/// Scalars found in a run directory: every numeric field of its *_summary.json
/// files, and mean_/median_ columns from metrics_summary.csv.
inline std::map<std::string, double> collect_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("report: not a directory: '" + dir.string() + "'");
  std::map<std::string, double> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const std::string name = p.filename().string();
    if (name.size() > 13 && name.ends_with("_summary.json")) {
      detail::flatten(detail::read_json(p), "", out);
    } else if (name == "metrics_summary.csv") {
      const auto t = io::load_csv(p);
      const auto m = t.column("metric"), md = t.column("median"), mn = t.column("mean");
      for (const auto& r : t.rows) {
        out["median_" + r[m]] = io::parse_real(r[md]).value_or(std::numeric_limits<double>::quiet_NaN());
        out["mean_" + r[m]] = io::parse_real(r[mn]).value_or(std::numeric_limits<double>::quiet_NaN());
      }
      if (const auto f = t.meta("frechet_distance")) out["frechet_distance"] = io::parse_real(*f).value_or(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (out.empty()) throw DataError("report: no summaries found in '" + dir.string() + "'");
  return out;
}

inline RunReport report_command(const io::ExperimentConfig& cfg, const ReportInputs& in, std::ostream& log) {
  if (in.runs.empty()) throw ConfigError("report: pass at least one --run directory");
  RunReport rep;
  std::vector<std::map<std::string, double>> scalars;
  std::set<std::string> keys;
  for (const auto& r : in.runs) {
    scalars.push_back(collect_run(r));
    std::string name = fs::path(r).filename().string();
    if (name.empty()) name = fs::path(r).parent_path().filename().string();
    rep.runs.push_back(detail::field(name));
    for (const auto& [k, v] : scalars.back()) keys.insert(k);
  }
  rep.columns.assign(keys.begin(), keys.end());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : scalars) {
    std::vector<double> row;
    for (const auto& k : rep.columns) row.push_back(s.count(k) ? s.at(k) : nan);
    rep.values.push_back(std::move(row));
  }

  const fs::path out = cfg.output_dir;
  io::CsvTable t;
  t.header = {"run"};
  t.header.insert(t.header.end(), rep.columns.begin(), rep.columns.end());
  json jruns = json::array();
  for (std::size_t i = 0; i < rep.runs.size(); ++i) {
    std::vector<std::string> row{rep.runs[i]};
    json jr = {{"run", rep.runs[i]}};
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      row.push_back(io::format_real(rep.values[i][c]));
      jr[rep.columns[c]] = detail::number(rep.values[i][c]);
    }
    t.rows.push_back(std::move(row));
    jruns.push_back(std::move(jr));
  }
  io::save_csv(out / "report.csv", t);
  json j = {{"runs", jruns}};

  // PCC of per-run metric means against the target, over runs where both exist.
  const auto target = std::find(rep.columns.begin(), rep.columns.end(), in.target);
  if (target != rep.columns.end() && rep.runs.size() >= 3) {
    const std::size_t tc = std::size_t(target - rep.columns.begin());
    io::CsvTable p;
    p.header = {"metric", "pcc", "runs"};
    json jp = json::object();
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      if (!rep.columns[c].starts_with("mean_")) continue;
      std::vector<double> x, y;
      for (std::size_t i = 0; i < rep.runs.size(); ++i)
        if (std::isfinite(rep.values[i][c]) && std::isfinite(rep.values[i][tc])) {
          x.push_back(rep.values[i][c]);
          y.push_back(rep.values[i][tc]);
        }
      double r = nan;
      if (x.size() >= 3) {
        try {
          r = pcc(x, y);
        } catch (const DomainError&) {
        }
      }
      rep.pcc.emplace_back(rep.columns[c], r);
      p.rows.push_back({rep.columns[c], io::format_real(r), std::to_string(x.size())});
      jp[rep.columns[c]] = detail::number(r);
    }
    p.metadata = {{"target", in.target}};
    io::save_csv(out / "pcc.csv", p);
    j["pcc"] = jp;
    j["pcc_target"] = in.target;
  }
  detail::write_json(out / "report.json", j);
  log << "report: " << rep.runs.size() << " runs, " << rep.columns.size() << " columns\n";
  return rep;
}

}  // namespace comir::cli
