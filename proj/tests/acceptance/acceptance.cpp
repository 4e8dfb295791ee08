// Acceptance run: one PASS/FAIL line per headline criterion.
//
//   acceptance <path to comirdiag> <work directory>
//
// Library-level criteria call the headers directly; the CLI, pipeline and
// determinism criteria drive the comirdiag binary through the shell.

#include "comir/cli/commands.hpp"
#include "support/oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using namespace comir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

fs::path g_tool;

int run_tool(const std::string& args) {
  const std::string cmd = quote(g_tool.string()) + " -q " + args + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(io::read_file(p)); }

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (auto& v : img.pixels) v = rng.uniform(0.0, 1.0);
  return img;
}

// ---------------------------------------------------------------------------

Outcome gradient_suites() {
  const auto start = Clock::now();
  double worst_nce = 0, worst_toy = 0, worst_sammon = 0;
  int instances = 0;
  const CriticKind critics[] = {CriticKind::gaussian_l2, CriticKind::cosine, CriticKind::l1};
  for (auto k : critics)
    for (auto p : {Pairing::diagonal, Pairing::cross_pair})
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(5000 + seed);
        const EmbeddingSet a{Level::final, Modality::A, rng.normal_matrix(5, 4)};
        const EmbeddingSet b{Level::final, Modality::B, rng.normal_matrix(5, 4)};
        const LossConfig cfg{k, 0.5, p};
        const auto g = info_nce_gradient(a, b, cfg);
        const Matrix na = oracle::finite_difference(
            [&](const Matrix& x) { return info_nce_loss({Level::final, Modality::A, x}, b, cfg); }, a.data);
        const Matrix nb = oracle::finite_difference(
            [&](const Matrix& x) { return info_nce_loss(a, {Level::final, Modality::B, x}, cfg); }, b.data);
        worst_nce = std::max({worst_nce, oracle::relative_error(g.d_a, na), oracle::relative_error(g.d_b, nb)});
        ++instances;
      }

  const auto ds = make_dataset({64, 8, 3, 0.1, 11});
  const ScheduleKind schedules[] = {schedule::Alternating{1.0}, schedule::Summed{0.5}, schedule::Pretraining{1}};
  for (const auto& sched : schedules)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Matrix xa = ds.inputs_a.middleRows(Eigen::Index(seed % 8) * 6, 6);
      const Matrix xb = ds.inputs_b.middleRows(Eigen::Index(seed % 8) * 6, 6);
      const TwinEncoderParams p = init_params(8, 3, 2, 700 + seed);
      const LossConfig cf{critics[seed % 3], 0.5}, cb{CriticKind::gaussian_l2, 0.5};
      const long it = long(seed % 2);
      const ScheduleStep step{int(seed % 2), it, 2};
      const auto [l, g] = batch_loss_and_gradient(p, xa, xb, cf, cb, sched, step);
      const Matrix num = oracle::finite_difference(
          [&](const Matrix& v) {
            return batch_loss_and_gradient(oracle::unflatten(v, p), xa, xb, cf, cb, sched, step).first.loss;
          },
          oracle::flatten(p));
      worst_toy = std::max(worst_toy, oracle::relative_error(oracle::flatten(g), num));
      ++instances;
    }

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(900 + seed);
    const Matrix d = oracle::planar_distances(rng.normal_matrix(6, 4));
    const Matrix p = rng.normal_matrix(6, 2);
    const Matrix num = oracle::finite_difference([&](const Matrix& x) { return sammon_stress(d, x); }, p, 1e-6);
    worst_sammon = std::max(worst_sammon, oracle::relative_error(sammon_gradient(d, p), num));
    ++instances;
  }
  const double t = seconds_since(start);
  const double worst = std::max({worst_nce, worst_toy, worst_sammon});
  return {worst < 1e-5 && t < 60.0,
          std::to_string(instances) + " instances, max rel err info_nce " + fmt(worst_nce) + " toy " +
              fmt(worst_toy) + " sammon " + fmt(worst_sammon) + " (< 1e-5), " + fmt(t) + " s (< 60)"};
}

Outcome infonce_oracle() {
  double worst = 0;
  int cases = 0;
  for (auto k : {CriticKind::gaussian_l2, CriticKind::cosine, CriticKind::l1})
    for (auto p : {Pairing::diagonal, Pairing::cross_pair})
      for (int n = 1; n <= 6; ++n)
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
          Rng rng(std::uint64_t(n) * 100 + seed);
          const EmbeddingSet a{Level::final, Modality::A, rng.normal_matrix(n, 3)};
          const EmbeddingSet b{Level::final, Modality::B, rng.normal_matrix(n, 3)};
          for (double tau : {0.1, 0.5, 2.0}) {
            const LossConfig cfg{k, tau, p};
            const double ref = oracle::info_nce(a.data, b.data, cfg);
            worst = std::max(worst, oracle::relative_error(info_nce_loss(a, b, cfg), ref));
            ++cases;
          }
        }
  return {worst < 1e-10, std::to_string(cases) + " cases, max rel err " + fmt(worst) + " (< 1e-10)"};
}

Outcome registration_protocol(const fs::path& work) {
  const fs::path out = work / "registration_834";
  const auto start = Clock::now();
  const int rc = run_tool("--threads 1 --pairs 50 --texture_size 834 --rsr_threshold_px 100 --output_dir " +
                          quote(out.string()) + " register");
  const double t = seconds_since(start);
  if (rc != 0) return {false, "comirdiag register exited with " + std::to_string(rc)};
  const auto j = read_json(out / "registration_summary.json");
  const double rsr = j["rsr"].get<double>();
  const double med = j["median_error_px"].is_null() ? INFINITY : j["median_error_px"].get<double>();
  return {j["pairs"] == 50 && rsr >= 95.0 && med < 5.0 && t < 600.0,
          "50 pairs at 834 px: RSR " + fmt(rsr) + "% (>= 95), median error " + fmt(med) + " px (< 5), " + fmt(t) +
              " s (< 600)"};
}

Outcome closed_form_error() {
  double worst = 0;
  Rng rng(17);
  for (auto [w, h] : {std::pair{834, 834}, std::pair{640, 480}, std::pair{31, 77}}) {
    const Point2 c = image_center(w, h);
    const double r = 0.5 * std::hypot(w - 1.0, h - 1.0);
    for (int i = 0; i < 20; ++i) {
      const RigidTransform gt{rng.uniform(-0.5, 0.5), rng.uniform(-50, 50), rng.uniform(-50, 50), c.x, c.y};
      RigidTransform shifted = gt;
      const double dx = rng.uniform(-20, 20), dy = rng.uniform(-20, 20);
      shifted.tx += dx;
      shifted.ty += dy;
      worst = std::max(worst, std::fabs(registration_error(shifted, gt, w, h) - std::hypot(dx, dy)));
      const double theta = rng.uniform(-3.0, 3.0);
      const RigidTransform rot{theta, 0, 0, c.x, c.y};
      worst = std::max(worst, std::fabs(registration_error(rot, RigidTransform::identity(c), w, h) -
                                        2.0 * r * std::sin(std::fabs(theta) / 2.0)));
    }
  }
  return {worst < 1e-9, "120 cases, max abs deviation " + fmt(worst) + " px (< 1e-9)"};
}

Outcome metric_identities() {
  bool ok = true;
  double worst_identity = 0, worst_oracle = 0, worst_frechet = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Image a = random_image(16, 16, s), b = random_image(16, 16, s + 100);
    ok &= image_mse(a, a) == 0.0;
    ok &= alpha_amd(a, a, {4.0, 8}) == 0.0;
    worst_identity = std::max({worst_identity, std::fabs(image_ssim(a, a) - 1.0),
                               std::fabs(image_correlation(a, a) - 1.0)});
    const Matrix f = Rng(s).normal_matrix(40, 6);
    worst_identity = std::max(worst_identity, std::fabs(frechet_distance(f, f)));
    worst_oracle = std::max({worst_oracle, std::fabs(image_mse(a, b) - oracle::mse(a, b)),
                             std::fabs(image_correlation(a, b) - oracle::correlation(a, b)),
                             std::fabs(image_ssim(a, b) - oracle::ssim(a, b))});

    const Matrix x = Rng(s + 200).normal_matrix(30, 1, 1.5).array() + 0.3;
    const Matrix y = Rng(s + 300).normal_matrix(45, 1, 0.6).array() - 0.8;
    auto stats = [](const Matrix& m) {
      const double mu = m.mean();
      return std::pair{mu, std::sqrt((m.array() - mu).square().sum() / double(m.rows() - 1))};
    };
    const auto [m1, s1] = stats(x);
    const auto [m2, s2] = stats(y);
    worst_frechet = std::max(worst_frechet,
                             std::fabs(frechet_distance(x, y) - ((m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2))));
  }
  ok &= worst_identity < 1e-9 && worst_oracle < 1e-10 && worst_frechet < 1e-9;
  return {ok, "identities max dev " + fmt(worst_identity) + ", 16x16 oracle max dev " + fmt(worst_oracle) +
                  " (< 1e-10), 1-D Frechet max dev " + fmt(worst_frechet) + " (< 1e-9)"};
}

Outcome mds_planar() {
  const Matrix p = Rng(31).normal_matrix(20, 2, 2.0);
  const Matrix d = oracle::planar_distances(p);
  std::vector<MdsSolution> runs;
  runs.push_back(mds_fit(d, {2000, 1e-9, 1, MdsInit::classical}));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) runs.push_back(mds_fit(d, {2000, 1e-12, seed, MdsInit::random}));
  runs.push_back(mds_fit(Matrix::Ones(5, 5) - Matrix::Identity(5, 5), {2000, 1e-12, 3, MdsInit::random}));
  bool monotone = true;
  for (const auto& r : runs)
    for (std::size_t i = 1; i < r.stress_history.size(); ++i) monotone &= r.stress_history[i] <= r.stress_history[i - 1];
  // Classical init is exact on planar input, so the iterative solver is
  // judged on the random starts.
  const auto& planar = runs.front();
  double worst_random = 0;
  int most_iters = 0;
  for (std::size_t r = 1; r <= 5; ++r) {
    worst_random = std::max(worst_random, runs[r].final_stress);
    most_iters = std::max(most_iters, runs[r].iterations_used);
  }
  return {planar.final_stress < 1e-6 && worst_random < 1e-6 && most_iters <= 2000 && monotone,
          "planar stress " + fmt(planar.final_stress) + " from classical init, worst of 5 random inits " +
              fmt(worst_random) + " (< 1e-6) within " + std::to_string(most_iters) +
              " iterations; history monotone on " + std::to_string(runs.size()) + " runs: " +
              (monotone ? "yes" : "no")};
}

Outcome collapse_detection() {
  bool ok = true;
  std::string detail;
  const int d = 32;
  for (int k : {1, 4, 16}) {
    const Matrix x = oracle::isotropic_subspace(200, d, k, std::uint64_t(40 + k));
    const auto s = sv_spectrum(x);
    const int small = int(std::count_if(s.values.begin(), s.values.end(),
                                        [&](double v) { return v < 1e-10 * s.values.front(); }));
    const double er = collapse_metrics(s).effective_rank;
    ok &= small == d - k && std::fabs(er - k) <= 0.5;
    detail += (detail.empty() ? "" : "; ") + std::string("k=") + std::to_string(k) + ": " + std::to_string(small) +
              " small (want " + std::to_string(d - k) + "), effective rank " + fmt(er);
  }
  return {ok, detail};
}

// train-toy -> spectrum -> mds -> report for three schedules
bool pipeline(const fs::path& root, std::string& why) {
  fs::remove_all(root);
  const char* schedules[] = {"baseline", "pretraining", "summed"};
  std::string runs;
  for (const char* s : schedules) {
    const fs::path dir = root / s;
    const std::string o = " --output_dir " + quote(dir.string());
    const std::string ok = " --schedule " + std::string(s) + o;
    if (run_tool(ok + " train-toy") != 0) return why = std::string("train-toy ") + s + " failed", false;
    if (run_tool(o + " spectrum --input " + quote((dir / "final_bn_A.mtx").string()) + " --input " +
                 quote((dir / "final_final_A.mtx").string())) != 0)
      return why = std::string("spectrum ") + s + " failed", false;
    if (run_tool(o + " mds --a " + quote((dir / "final_final_A.mtx").string()) + " --b " +
                 quote((dir / "final_final_B.mtx").string())) != 0)
      return why = std::string("mds ") + s + " failed", false;
    runs += " --run " + quote(dir.string());
  }
  if (run_tool(" --output_dir " + quote((root / "report").string()) + " report --target final_cosine" + runs) != 0)
    return why = "report failed", false;
  return true;
}

std::vector<fs::path> output_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      const auto ext = e.path().extension();
      if (ext == ".csv" || ext == ".mtx" || ext == ".json" || ext == ".pgm") out.push_back(fs::relative(e.path(), root));
    }
  std::sort(out.begin(), out.end());
  return out;
}

std::string compare_trees(const fs::path& a, const fs::path& b, std::size_t& count) {
  const auto fa = output_files(a), fb = output_files(b);
  count = fa.size();
  if (fa != fb) return "file sets differ";
  for (const auto& f : fa)
    if (io::read_file(a / f) != io::read_file(b / f)) return "differs: " + f.string();
  return "";
}

Outcome schedule_probe(const fs::path& work) {
  const fs::path root = work / "pipeline_1";
  const auto start = Clock::now();
  std::string why;
  if (!pipeline(root, why)) return {false, why};
  const double t = seconds_since(start);
  const auto base = read_json(root / "baseline" / "train_summary.json");
  const double cos = base["final_cosine"].get<double>();
  const double red = base["loss_reduction"].get<double>();
  const bool spectra = fs::exists(root / "pretraining" / "spectrum_final_bn_A.csv") &&
                       fs::exists(root / "pretraining" / "spectrum_final_final_A.csv");
  const bool report = fs::exists(root / "report" / "report.csv");

  std::string second;
  const fs::path root2 = work / "pipeline_2";
  if (!pipeline(root2, second)) return {false, "second pipeline run: " + second};
  std::size_t n = 0;
  const std::string diff = compare_trees(root, root2, n);
  return {cos > 0.9 && red >= 0.9 && spectra && report && t < 300.0 && diff.empty(),
          "baseline cosine " + fmt(cos) + " (> 0.9), loss reduction " + fmt(100 * red) +
              "% (>= 90); pretraining spectra " + (spectra ? "written" : "missing") + "; pipeline " + fmt(t) +
              " s (< 300); rerun " + (diff.empty() ? "identical over " + std::to_string(n) + " files" : diff)};
}

// Every command run twice into separate trees; all outputs compared byte for byte.
Outcome determinism(const fs::path& work) {
  std::vector<std::string> failures;
  auto run_all = [&](const fs::path& root) {
    fs::remove_all(root);
    const auto o = [&](const char* sub) { return " --output_dir " + quote((root / sub).string()); };
    const std::string pairs = quote((root / "pairs").string());
    const std::string toy = " --epochs 10 --split_epoch 5 --schedule alternating";
    bool ok = run_tool(toy + o("toy") + " train-toy") == 0;
    ok &= run_tool(" --texture_size 300 --pairs 3 --threads 2 --rsr_threshold_percent 2" + o("reg") +
                   " register --save-pairs " + pairs) == 0;
    ok &= run_tool(o("met") + " eval-metrics --a-dir " + quote((root / "pairs" / "fixed").string()) + " --b-dir " +
                   quote((root / "pairs" / "moving").string()) + " --registration " +
                   quote((root / "reg" / "registration.csv").string())) == 0;
    ok &= run_tool(o("toy") + " spectrum --input " + quote((root / "toy" / "final_final_B.mtx").string())) == 0;
    ok &= run_tool(" --mds_init random --mds_seed 5 --svg" + o("mds") + " mds --a " +
                   quote((root / "toy" / "initial_final_A.mtx").string())) == 0;
    ok &= run_tool(o("rep") + " report --run " + quote((root / "toy").string()) + " --run " +
                   quote((root / "reg").string()) + " --run " + quote((root / "met").string())) == 0;
    return ok;
  };
  const fs::path a = work / "determinism_1", b = work / "determinism_2";
  if (!run_all(a) || !run_all(b)) return {false, "a command exited nonzero"};
  std::size_t n = 0;
  const std::string diff = compare_trees(a, b, n);
  return {diff.empty() && n > 0, diff.empty() ? "6 commands, " + std::to_string(n) + " output files identical" : diff};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <comirdiag> <work directory>\n";
    return 2;
  }
  g_tool = fs::absolute(argv[1]);
  const fs::path work = fs::absolute(argv[2]);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient_suites", gradient_suites},
      {"infonce_oracle", infonce_oracle},
      {"registration_protocol_834", [&] { return registration_protocol(work); }},
      {"registration_error_closed_form", closed_form_error},
      {"metric_identities_and_oracles", metric_identities},
      {"mds_planar_and_monotone", mds_planar},
      {"collapse_detection", collapse_detection},
      {"schedule_probe_and_pipeline", [&] { return schedule_probe(work); }},
      {"cli_determinism", [&] { return determinism(work); }},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += r.pass ? 0 : 1;
    std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
  }
  std::cout << (criteria.size() - std::size_t(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
