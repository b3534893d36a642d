#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noma/genmud.hpp"
#include "noma/system_model.hpp"

namespace noma {

/// One reproducible sweep: cartesian grid of scenario parameters times a set
/// of detectors, fixed trial count per point.
struct ExperimentSpec {
  std::size_t K = 200;
  std::vector<double> snr_db = {10.0};
  std::vector<std::size_t> S = {40};
  std::vector<std::size_t> M = {100};
  std::vector<std::size_t> J = {7};
  std::vector<std::string> detectors;  // genmud | somp | bpdn | oracle_ls
  std::size_t trials = 100;
  bool estimated_sparsity = false;  // detectors consume the estimate of S
  std::string model_path;           // required iff genmud is selected
  std::size_t detect_steps = 20;    // latent descent steps at detection
  std::uint64_t seed = 0;
  std::string output;               // CSV path ("" = stdout by the CLI)

  void validate() const;
};

struct ResultRow {
  double snr_db = 0.0;
  std::size_t S = 0;
  std::size_t M = 0;
  std::size_t J = 0;
  std::string detector;
  std::size_t trials = 0;
  bool has_detection = true;  // estimator-only rows carry just en
  double ser = 0.0;
  double pd = 0.0;
  double pfa = 0.0;
  bool has_en = false;
  double en = 0.0;
  std::uint64_t seed = 0;
};

/// Runs every grid point x detector. All detectors at one point share the
/// same per-trial realizations (paired comparison); per-trial seeds hash
/// (master seed, point index, trial index) so any point can be re-run alone.
std::vector<ResultRow> run_sweep(const ExperimentSpec& spec);

/// Stable schema: snr_db,S,M,J,detector,trials,ser,pd,pfa,en,seed.
/// Blank cells where a metric does not apply; LF line endings.
std::string csv_string(const std::vector<ResultRow>& rows);
void write_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_csv(const std::string& path);

/// Training orchestration: trains on the simulated task distribution at
/// sys.snr_db with sys.seed (both authoritative over the TrainConfig
/// copies), saves the model, and optionally writes a per-step loss curve
/// CSV (step,loss_g,loss_h,alpha).
struct TrainSpec {
  SystemConfig sys;
  TrainConfig train;
  std::size_t C1 = 64;
  std::size_t C2 = 64;
  std::string model_out;
  std::string curve_out;  // "" skips the curve file
};
GeneratorModel run_training(const TrainSpec& spec);

/// Known figure ids: ser_vs_snr, pd_vs_snr, pfa_vs_snr, ser_vs_sparsity,
/// en_vs_j. Emits one two-column TSV per detector into out_dir and returns
/// the written paths. The table should vary only the figure's x dimension.
std::vector<std::string> emit_plot_data(const std::vector<ResultRow>& rows,
                                        const std::string& figure,
                                        const std::string& out_dir);

}  // namespace noma
