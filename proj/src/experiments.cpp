#include "noma/experiments.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "noma/baselines.hpp"
#include "noma/errors.hpp"
#include "noma/metrics.hpp"
#include "noma/parallel.hpp"
#include "noma/sparsity.hpp"

namespace noma {

namespace {

const std::set<std::string> kKnownDetectors = {"genmud", "somp", "bpdn",
                                               "oracle_ls"};

bool uses(const ExperimentSpec& spec, const std::string& name) {
  return std::find(spec.detectors.begin(), spec.detectors.end(), name) !=
         spec.detectors.end();
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Per-trial, per-detector raw tallies; divisions happen once per point.
struct TrialTally {
  ErrorCounts counts;
};

}  // namespace

void ExperimentSpec::validate() const {
  if (K == 0) throw ConfigError("sweep: K must be >= 1");
  if (snr_db.empty() || S.empty() || M.empty() || J.empty()) {
    throw ConfigError("sweep: every grid dimension needs at least one value");
  }
  if (detectors.empty()) {
    throw ConfigError("sweep: select at least one detector");
  }
  for (const auto& d : detectors) {
    if (!kKnownDetectors.count(d)) {
      throw ConfigError("sweep: unknown detector '" + d +
                        "' (known: genmud, somp, bpdn, oracle_ls)");
    }
  }
  if (trials == 0) throw ConfigError("sweep: trials must be >= 1");
  for (std::size_t s : S) {
    if (s == 0 || s > K) {
      throw ConfigError("sweep: grid S=" + std::to_string(s) +
                        " outside [1, K=" + std::to_string(K) + "]");
    }
  }
  const bool genmud_selected =
      std::find(detectors.begin(), detectors.end(), "genmud") !=
      detectors.end();
  if (genmud_selected && model_path.empty()) {
    throw ConfigError("sweep: genmud requires a model path");
  }
  if (!genmud_selected && !model_path.empty()) {
    throw ConfigError("sweep: model path given but genmud is not selected");
  }
}

std::vector<ResultRow> run_sweep(const ExperimentSpec& spec) {
  spec.validate();

  std::optional<GeneratorModel> model;
  if (uses(spec, "genmud")) {
    model = load_model(spec.model_path);
  }

  std::vector<ResultRow> rows;
  std::uint64_t point_index = 0;
  for (double snr : spec.snr_db) {
    for (std::size_t s : spec.S) {
      for (std::size_t m : spec.M) {
        for (std::size_t j : spec.J) {
          SystemConfig cfg;
          cfg.K = spec.K;
          cfg.M = m;
          cfg.J = j;
          cfg.S = s;
          cfg.snr_db = snr;
          cfg.validate();
          if (model) {
            require_model_shape(*model, spec.K, j);
          }
          const double tau = linear_snr(snr);
          const double sigma_sq = noise_variance_for_snr(cfg);

          const std::size_t n_det = spec.detectors.size();
          std::vector<std::vector<TrialTally>> tallies(
              spec.trials, std::vector<TrialTally>(n_det));
          std::vector<double> en(spec.trials, 0.0);

          parallel_for(spec.trials, [&](std::size_t trial) {
            const std::uint64_t tseed =
                rng::trial_seed(spec.seed, point_index, trial);
            const Instance inst = sample_instance(cfg, tseed);
            const CMat& h = inst.channel.effective;
            const CMat& y = inst.rx.Y;

            std::size_t s_for_detectors = s;
            if (spec.estimated_sparsity) {
              const auto est = estimate_sparsity(y, tau);
              en[trial] = normalized_error(static_cast<double>(s), est.s_hat);
              s_for_detectors = est.clamped(spec.K);
            }

            for (std::size_t d = 0; d < n_det; ++d) {
              const std::string& name = spec.detectors[d];
              Frame estimate;
              if (name == "oracle_ls") {
                // The oracle knows the true support; the sparsity source is
                // irrelevant to it by definition.
                estimate = oracle_ls(y, h, inst.frame.support);
              } else if (name == "somp") {
                RecoverySettings settings;
                settings.sparsity = s_for_detectors;
                estimate = somp_detect(y, h, settings);
              } else if (name == "bpdn") {
                RecoverySettings settings;
                settings.sparsity = s_for_detectors;
                settings.bpdn_lambda = default_bpdn_lambda(sigma_sq, h, j);
                estimate = bpdn_recover(y, h, settings).frame;
              } else {
                auto rng =
                    rng::derive_stream(tseed, rng::StreamTag::kLatent);
                estimate = genmud_detect(*model, y, h, s_for_detectors,
                                         spec.detect_steps, rng);
              }
              tallies[trial][d].counts =
                  count_errors(inst.frame, estimate.symbols);
            }
          });

          // Fixed-order integer reduction, one division at the end.
          for (std::size_t d = 0; d < n_det; ++d) {
            ErrorCounts total;
            for (std::size_t t = 0; t < spec.trials; ++t) {
              total.symbol_errors += tallies[t][d].counts.symbol_errors;
              total.detections += tallies[t][d].counts.detections;
              total.false_alarms += tallies[t][d].counts.false_alarms;
            }
            const double active =
                static_cast<double>(s) * static_cast<double>(j) *
                static_cast<double>(spec.trials);
            const double inactive = static_cast<double>(spec.K - s) *
                                    static_cast<double>(j) *
                                    static_cast<double>(spec.trials);

            ResultRow row;
            row.snr_db = snr;
            row.S = s;
            row.M = m;
            row.J = j;
            row.detector = spec.detectors[d];
            row.trials = spec.trials;
            row.ser = static_cast<double>(total.symbol_errors) / active;
            row.pd = static_cast<double>(total.detections) / active;
            row.pfa = static_cast<double>(total.false_alarms) / inactive;
            if (spec.estimated_sparsity) {
              double sum = 0.0;
              for (double v : en) sum += v;
              row.has_en = true;
              row.en = sum / static_cast<double>(spec.trials);
            }
            row.seed = spec.seed;
            rows.push_back(std::move(row));
          }
          ++point_index;
        }
      }
    }
  }
  return rows;
}

std::string csv_string(const std::vector<ResultRow>& rows) {
  std::string out = "snr_db,S,M,J,detector,trials,ser,pd,pfa,en,seed\n";
  for (const auto& r : rows) {
    out += fmt_double(r.snr_db);
    out += ',';
    out += std::to_string(r.S);
    out += ',';
    out += std::to_string(r.M);
    out += ',';
    out += std::to_string(r.J);
    out += ',';
    out += r.detector;
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    if (r.has_detection) {
      out += fmt_double(r.ser);
      out += ',';
      out += fmt_double(r.pd);
      out += ',';
      out += fmt_double(r.pfa);
      out += ',';
    } else {
      out += ",,,";
    }
    if (r.has_en) out += fmt_double(r.en);
    out += ',';
    out += std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("write_csv: cannot open " + path);
  f << csv_string(rows);
  if (!f) throw Error("write_csv: write failed for " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) {
    throw CorruptFileError("read_csv: empty file " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "snr_db,S,M,J,detector,trials,ser,pd,pfa,en,seed") {
    throw CorruptFileError("read_csv: unexpected header in " + path + ": " +
                           line);
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 11) {
      throw CorruptFileError("read_csv: line " + std::to_string(line_no) +
                             " has " + std::to_string(cells.size()) +
                             " cells, expected 11");
    }
    try {
      ResultRow r;
      r.snr_db = std::stod(cells[0]);
      r.S = std::stoul(cells[1]);
      r.M = std::stoul(cells[2]);
      r.J = std::stoul(cells[3]);
      r.detector = cells[4];
      r.trials = std::stoul(cells[5]);
      r.has_detection = !cells[6].empty();
      if (r.has_detection) {
        r.ser = std::stod(cells[6]);
        r.pd = std::stod(cells[7]);
        r.pfa = std::stod(cells[8]);
      }
      r.has_en = !cells[9].empty();
      if (r.has_en) r.en = std::stod(cells[9]);
      r.seed = std::stoull(cells[10]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw CorruptFileError("read_csv: line " + std::to_string(line_no) +
                             ": " + e.what());
    }
  }
  return rows;
}

GeneratorModel run_training(const TrainSpec& spec) {
  if (spec.model_out.empty()) {
    throw ConfigError("train: model output path required");
  }
  SystemConfig sys = spec.sys;
  sys.validate();

  TrainConfig cfg = spec.train;
  cfg.train_snr_db = sys.snr_db;
  cfg.seed = sys.seed;
  cfg.validate();

  GeneratorHyper hyper;
  hyper.K = sys.K;
  hyper.J = sys.J;
  hyper.C1 = spec.C1;
  hyper.C2 = spec.C2;
  hyper.validate();

  const auto source = simulated_task_source(sys, cfg.dataset_size);
  TrainResult result = train(source, hyper, cfg);
  save_model(result.model, spec.model_out);

  if (!spec.curve_out.empty()) {
    std::ofstream f(spec.curve_out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("train: cannot open " + spec.curve_out);
    f << "step,loss_g,loss_h,alpha\n";
    for (std::size_t i = 0; i < result.log.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i,
                    result.log[i].loss_g, result.log[i].loss_h,
                    result.log[i].alpha);
      f << buf;
    }
    if (!f) throw Error("train: write failed for " + spec.curve_out);
  }
  return result.model;
}

std::vector<std::string> emit_plot_data(const std::vector<ResultRow>& rows,
                                        const std::string& figure,
                                        const std::string& out_dir) {
  if (rows.empty()) throw ConfigError("plotdata: empty result table");

  enum class X { kSnr, kS, kJ };
  enum class Y { kSer, kPd, kPfa, kEn };
  X x_axis;
  Y y_axis;
  if (figure == "ser_vs_snr") {
    x_axis = X::kSnr;
    y_axis = Y::kSer;
  } else if (figure == "pd_vs_snr") {
    x_axis = X::kSnr;
    y_axis = Y::kPd;
  } else if (figure == "pfa_vs_snr") {
    x_axis = X::kSnr;
    y_axis = Y::kPfa;
  } else if (figure == "ser_vs_sparsity") {
    x_axis = X::kS;
    y_axis = Y::kSer;
  } else if (figure == "en_vs_j") {
    x_axis = X::kJ;
    y_axis = Y::kEn;
  } else {
    throw ConfigError("plotdata: unknown figure id '" + figure +
                      "' (ser_vs_snr, pd_vs_snr, pfa_vs_snr, "
                      "ser_vs_sparsity, en_vs_j)");
  }

  std::filesystem::create_directories(out_dir);

  // One series per detector, preserving row order within it.
  std::vector<std::string> detector_order;
  for (const auto& r : rows) {
    if (std::find(detector_order.begin(), detector_order.end(), r.detector) ==
        detector_order.end()) {
      detector_order.push_back(r.detector);
    }
  }

  std::vector<std::string> written;
  for (const auto& det : detector_order) {
    std::string body = "x\ty\n";
    std::size_t points = 0;
    for (const auto& r : rows) {
      if (r.detector != det) continue;
      double x = 0.0;
      switch (x_axis) {
        case X::kSnr: x = r.snr_db; break;
        case X::kS: x = static_cast<double>(r.S); break;
        case X::kJ: x = static_cast<double>(r.J); break;
      }
      double y = 0.0;
      bool ok = true;
      switch (y_axis) {
        case Y::kSer: y = r.ser; ok = r.has_detection; break;
        case Y::kPd: y = r.pd; ok = r.has_detection; break;
        case Y::kPfa: y = r.pfa; ok = r.has_detection; break;
        case Y::kEn: y = r.en; ok = r.has_en; break;
      }
      if (!ok) continue;
      body += fmt_double(x);
      body += '\t';
      body += fmt_double(y);
      body += '\n';
      ++points;
    }
    if (points == 0) continue;
    const std::string path =
        (std::filesystem::path(out_dir) / (figure + "_" + det + ".tsv"))
            .string();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("plotdata: cannot open " + path);
    f << body;
    if (!f) throw Error("plotdata: write failed for " + path);
    written.push_back(path);
  }
  if (written.empty()) {
    throw ConfigError("plotdata: no rows carry the metric for figure '" +
                      figure + "'");
  }
  return written;
}

}  // namespace noma
