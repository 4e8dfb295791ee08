// comirdiag: experiments around contrastive multimodal representations.
//
//   comirdiag [--config FILE] [--<key> VALUE ...] <command> [command options]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure.

#include "comir/cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

}  // namespace

int main(int argc, char** argv) {
  using namespace comir;

  CLI::App app{"Contrastive representation diagnostics: toy training, registration, metrics, MDS, spectra"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON experiment config (flat keys)");
  app.add_flag("-q,--quiet", quiet, "no progress output");

  // Every config key doubles as a flag. Values are applied after the file and
  // the environment, so flags win.
  io::ExperimentConfig defaults;
  std::map<std::string, std::string> overrides;
  for (const auto& f : io::config_fields(defaults)) {
    const bool is_bool = std::holds_alternative<bool*>(f.ref);
    auto* opt = app.add_option_function<std::string>(
        "--" + f.name, [&overrides, name = f.name](const std::string& v) { overrides[name] = v; }, f.help);
    opt->group("Experiment keys");
    if (is_bool) opt->expected(0, 1)->default_str("true");
  }

  auto* train = app.add_subcommand("train-toy", "train twin encoders on synthetic paired data");

  cli::RegisterInputs reg_in;
  auto* reg = app.add_subcommand("register", "SIFT + RANSAC rigid registration of image pairs");
  reg->add_option("--fixed-dir", reg_in.fixed_dir, "directory of fixed images");
  reg->add_option("--moving-dir", reg_in.moving_dir, "directory of moving images with <stem>.json ground truth");
  reg->add_option("--source", reg_in.source, "image from which test pairs are synthesized");
  reg->add_option("--save-pairs", reg_in.save_pairs, "write synthesized pairs under this directory");

  cli::MetricsInputs met_in;
  auto* met = app.add_subcommand("eval-metrics", "pixelwise and set-level similarity of aligned image pairs");
  met->add_option("--a-dir", met_in.a_dir, "images of the first modality")->required();
  met->add_option("--b-dir", met_in.b_dir, "images of the second modality, same file names")->required();
  met->add_option("--registration", met_in.registration, "registration.csv to join on pair_id");
  met->add_option("--features-a", met_in.features_a, "feature matrix for the Frechet distance");
  met->add_option("--features-b", met_in.features_b, "feature matrix for the Frechet distance");

  cli::MdsInputs mds_in;
  auto* mds = app.add_subcommand("mds", "2-D metric MDS under Sammon stress");
  mds->add_option("--a", mds_in.a, "embedding matrix (modality A)");
  mds->add_option("--b", mds_in.b, "paired embedding matrix (modality B)");
  mds->add_option("--delta", mds_in.delta, "precomputed dissimilarity matrix");
  mds->add_option("--name", mds_in.name, "output file prefix")->capture_default_str();

  cli::SpectrumInputs spec_in;
  auto* spec = app.add_subcommand("spectrum", "singular-value spectra of embedding covariance");
  spec->add_option("--input", spec_in.inputs, "embedding matrix (repeatable)")->required();

  cli::ReportInputs rep_in;
  auto* rep = app.add_subcommand("report", "aggregate run directories");
  rep->add_option("--run", rep_in.runs, "run directory (repeatable)")->required();
  rep->add_option("--target", rep_in.target, "column correlated against metric means")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  static std::ostream discard(nullptr);
  std::ostream& log = quiet ? discard : std::cerr;
  try {
    io::ExperimentConfig cfg;
    if (!config_path.empty()) io::load_config_file(cfg, config_path);
    io::apply_environment(cfg);
    const auto fields = io::config_fields(cfg);
    for (const auto& [name, value] : overrides)
      for (const auto& f : fields)
        if (f.name == name) io::assign_string(f, value);

    const auto start = std::chrono::steady_clock::now();
    if (*train) cli::train_toy(cfg, log);
    else if (*reg) cli::register_command(cfg, reg_in, log);
    else if (*met) cli::eval_metrics(cfg, met_in, log);
    else if (*mds) cli::mds_command(cfg, mds_in, log);
    else if (*spec) cli::spectrum_command(cfg, spec_in, log);
    else if (*rep) cli::report_command(cfg, rep_in, log);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    log << "done in " << took.count() << " s\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DomainError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
}
