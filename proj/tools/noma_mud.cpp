#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "noma/errors.hpp"
#include "noma/experiments.hpp"
#include "noma/parallel.hpp"
#include "noma/sparsity.hpp"

namespace {

/// NOMA_OUT_DIR, when set, re-roots relative output paths.
std::string resolve_out(const std::string& path) {
  if (path.empty()) return path;
  const char* dir = std::getenv("NOMA_OUT_DIR");
  if (!dir || *dir == '\0') return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(dir) / p).string();
}

int run(int argc, char** argv) {
  CLI::App app{"Grant-free NOMA multi-user detection toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file");

  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads for trial loops")
      ->capture_default_str();

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Meta-train a generator");
  noma::TrainSpec tspec;
  std::string maml_mode = "first_order";
  train_cmd->add_option("--K", tspec.sys.K, "Users")->capture_default_str();
  train_cmd->add_option("--M", tspec.sys.M, "Subcarriers")
      ->capture_default_str();
  train_cmd->add_option("--J", tspec.sys.J, "Slots per frame")
      ->capture_default_str();
  train_cmd->add_option("--S", tspec.sys.S, "Active users")
      ->capture_default_str();
  train_cmd->add_option("--snr", tspec.sys.snr_db, "Training SNR in dB")
      ->capture_default_str();
  train_cmd->add_option("--seed", tspec.sys.seed, "Master seed")
      ->capture_default_str();
  train_cmd->add_option("--steps", tspec.train.max_steps, "Outer steps")
      ->capture_default_str();
  train_cmd->add_option("--inner-steps", tspec.train.inner_steps,
                        "Latent descent steps T")
      ->capture_default_str();
  train_cmd->add_option("--batch", tspec.train.batch, "Tasks per outer step")
      ->capture_default_str();
  train_cmd->add_option("--lr", tspec.train.outer_lr, "Outer learning rate")
      ->capture_default_str();
  train_cmd->add_option("--alpha0", tspec.train.alpha0,
                        "Initial latent step size")
      ->capture_default_str();
  train_cmd
      ->add_option("--alpha-lr", tspec.train.alpha_lr,
                   "Adam rate for the latent step size (0 reuses --lr)")
      ->capture_default_str();
  train_cmd
      ->add_option("--dataset-size", tspec.train.dataset_size,
                   "Fixed task pool size (0 streams fresh tasks)")
      ->capture_default_str();
  train_cmd
      ->add_option("--maml-mode", maml_mode,
                   "first_order or full_unroll (small problems only)")
      ->check(CLI::IsMember({"first_order", "full_unroll"}))
      ->capture_default_str();
  train_cmd->add_option("--C1", tspec.C1, "Hidden channels, layer 1")
      ->capture_default_str();
  train_cmd->add_option("--C2", tspec.C2, "Hidden channels, layer 2")
      ->capture_default_str();
  train_cmd->add_option("--model-out", tspec.model_out, "Model file to write")
      ->required();
  train_cmd->add_option("--curve-out", tspec.curve_out,
                        "Loss curve CSV (optional)");

  // sweep ------------------------------------------------------------------
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run a detection sweep over a grid");
  noma::ExperimentSpec espec;
  std::string sparsity_source = "known";
  sweep_cmd->add_option("--K", espec.K, "Users")->capture_default_str();
  sweep_cmd->add_option("--snr", espec.snr_db, "SNR grid in dB")
      ->capture_default_str();
  sweep_cmd->add_option("--S", espec.S, "Sparsity grid")
      ->capture_default_str();
  sweep_cmd->add_option("--M", espec.M, "Subcarrier grid")
      ->capture_default_str();
  sweep_cmd->add_option("--J", espec.J, "Slot grid")->capture_default_str();
  sweep_cmd
      ->add_option("--detectors", espec.detectors,
                   "Any of: genmud somp bpdn oracle_ls")
      ->required();
  sweep_cmd->add_option("--trials", espec.trials, "Trials per grid point")
      ->capture_default_str();
  sweep_cmd
      ->add_option("--sparsity-source", sparsity_source,
                   "known or estimated")
      ->check(CLI::IsMember({"known", "estimated"}))
      ->capture_default_str();
  sweep_cmd->add_option("--model", espec.model_path,
                        "Generator model file (genmud)");
  sweep_cmd->add_option("--detect-steps", espec.detect_steps,
                        "Latent descent steps at detection")
      ->capture_default_str();
  sweep_cmd->add_option("--seed", espec.seed, "Master seed")
      ->capture_default_str();
  sweep_cmd->add_option("--output", espec.output,
                        "CSV path (default: stdout)");

  // estimate ---------------------------------------------------------------
  auto* est_cmd = app.add_subcommand(
      "estimate", "Sweep the closed-form sparsity estimator error");
  std::size_t est_k = 200, est_s = 40, est_trials = 10000;
  std::vector<double> est_snr = {10.0};
  std::vector<std::size_t> est_m = {100};
  std::vector<std::size_t> est_j = {1, 7, 50};
  std::uint64_t est_seed = 0;
  std::string est_output;
  est_cmd->add_option("--K", est_k, "Users")->capture_default_str();
  est_cmd->add_option("--S", est_s, "True sparsity")->capture_default_str();
  est_cmd->add_option("--snr", est_snr, "SNR grid in dB")
      ->capture_default_str();
  est_cmd->add_option("--M", est_m, "Subcarrier grid")->capture_default_str();
  est_cmd->add_option("--J", est_j, "Slot grid")->capture_default_str();
  est_cmd->add_option("--trials", est_trials, "Trials per point")
      ->capture_default_str();
  est_cmd->add_option("--seed", est_seed, "Master seed")
      ->capture_default_str();
  est_cmd->add_option("--output", est_output, "CSV path (default: stdout)");

  // plotdata ---------------------------------------------------------------
  auto* plot_cmd = app.add_subcommand(
      "plotdata", "Split a sweep CSV into per-detector TSV series");
  std::string plot_input, plot_figure, plot_dir = ".";
  plot_cmd->add_option("--input", plot_input, "Sweep CSV to read")
      ->required();
  plot_cmd
      ->add_option("--figure", plot_figure,
                   "ser_vs_snr, pd_vs_snr, pfa_vs_snr, ser_vs_sparsity "
                   "or en_vs_j")
      ->required();
  plot_cmd->add_option("--out-dir", plot_dir, "Series output directory")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  noma::worker_threads() = threads > 0 ? threads : 1;

  if (*train_cmd) {
    tspec.train.maml_mode = maml_mode == "full_unroll"
                                ? noma::TrainConfig::MamlMode::kFullUnroll
                                : noma::TrainConfig::MamlMode::kFirstOrder;
    tspec.model_out = resolve_out(tspec.model_out);
    tspec.curve_out = resolve_out(tspec.curve_out);
    const auto model = noma::run_training(tspec);
    std::cout << "trained " << tspec.train.max_steps << " steps (K="
              << model.hyper.K << ", J=" << model.hyper.J
              << ", alpha=" << model.params.alpha << ")\n"
              << "model written to " << tspec.model_out << "\n";
    if (!tspec.curve_out.empty()) {
      std::cout << "loss curve written to " << tspec.curve_out << "\n";
    }
    return 0;
  }

  if (*sweep_cmd) {
    espec.estimated_sparsity = sparsity_source == "estimated";
    espec.output = resolve_out(espec.output);
    const auto rows = noma::run_sweep(espec);
    if (espec.output.empty()) {
      std::cout << noma::csv_string(rows);
    } else {
      noma::write_csv(rows, espec.output);
      std::cout << rows.size() << " rows written to " << espec.output << "\n";
    }
    return 0;
  }

  if (*est_cmd) {
    const auto table = noma::estimator_error_sweep(
        est_k, est_s, est_snr, est_m, est_j, est_trials, est_seed);
    std::vector<noma::ResultRow> rows;
    for (const auto& p : table) {
      noma::ResultRow r;
      r.snr_db = p.snr_db;
      r.S = est_s;
      r.M = p.m;
      r.J = p.j;
      r.detector = "estimator";
      r.trials = p.trials;
      r.has_detection = false;
      r.has_en = true;
      r.en = p.mean_en;
      r.seed = est_seed;
      rows.push_back(std::move(r));
    }
    est_output = resolve_out(est_output);
    if (est_output.empty()) {
      std::cout << noma::csv_string(rows);
    } else {
      noma::write_csv(rows, est_output);
      std::cout << rows.size() << " rows written to " << est_output << "\n";
    }
    return 0;
  }

  // plotdata
  const auto rows = noma::read_csv(plot_input);
  const auto written =
      noma::emit_plot_data(rows, plot_figure, resolve_out(plot_dir));
  for (const auto& p : written) std::cout << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const noma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const noma::VersionMismatchError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const noma::CorruptFileError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const noma::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
