#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "noma/errors.hpp"
#include "noma/experiments.hpp"

using namespace noma;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.K = 24;
  spec.snr_db = {30.0};
  spec.S = {3};
  spec.M = {12};
  spec.J = {3};
  spec.detectors = {"oracle_ls", "somp"};
  spec.trials = 25;
  spec.seed = 7;
  return spec;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("spec validation") {
  auto spec = small_spec();
  CHECK_NOTHROW(spec.validate());

  auto bad = spec;
  bad.detectors = {"oracle_ls", "mystery"};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.detectors.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.trials = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.S = {30};  // exceeds K
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.detectors = {"genmud"};  // needs a model
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.model_path = "some/model.bin";  // model without genmud
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sweep emits one row per grid point and detector") {
  auto spec = small_spec();
  spec.snr_db = {10.0, 20.0};
  spec.S = {2, 3};
  auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 2 * 2 * 2);  // snr x S x detectors
  for (const auto& r : rows) {
    CHECK(r.trials == 25);
    CHECK(r.has_detection);
    CHECK_FALSE(r.has_en);
    CHECK(r.seed == 7);
    CHECK(r.pd >= 0.0);
    CHECK(r.pd <= 1.0);
    CHECK(r.pfa >= 0.0);
    CHECK(r.pfa <= 1.0);
  }
}

TEST_CASE("oracle is exact at very high snr") {
  auto spec = small_spec();
  spec.snr_db = {300.0};
  spec.detectors = {"oracle_ls"};
  auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].ser == 0.0);
  CHECK(rows[0].pd == 1.0);
  CHECK(rows[0].pfa == 0.0);
}

TEST_CASE("ser improves with snr for somp") {
  auto spec = small_spec();
  spec.snr_db = {0.0, 25.0};
  spec.detectors = {"somp"};
  spec.trials = 40;
  auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].ser < rows[0].ser);
}

TEST_CASE("sweep output is byte deterministic") {
  auto spec = small_spec();
  auto csv1 = csv_string(run_sweep(spec));
  auto csv2 = csv_string(run_sweep(spec));
  CHECK(csv1 == csv2);
  CHECK(csv1.rfind("snr_db,S,M,J,detector,trials,ser,pd,pfa,en,seed\n", 0) ==
        0);
}

TEST_CASE("estimated sparsity adds en to every row") {
  auto spec = small_spec();
  spec.estimated_sparsity = true;
  auto rows = run_sweep(spec);
  for (const auto& r : rows) {
    CHECK(r.has_en);
    CHECK(r.en >= 0.0);
  }
}

TEST_CASE("csv round trip preserves rows") {
  auto spec = small_spec();
  auto rows = run_sweep(spec);
  auto path = tmp("noma_rows.csv");
  write_csv(rows, path.string());
  auto back = read_csv(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].detector == rows[i].detector);
    CHECK(back[i].snr_db == rows[i].snr_db);
    CHECK(back[i].S == rows[i].S);
    CHECK(back[i].trials == rows[i].trials);
    // Metric cells are written with 10 significant digits.
    CHECK(back[i].ser == doctest::Approx(rows[i].ser).epsilon(1e-9));
    CHECK(back[i].pd == doctest::Approx(rows[i].pd).epsilon(1e-9));
    CHECK(back[i].pfa == doctest::Approx(rows[i].pfa).epsilon(1e-9));
    CHECK(back[i].has_en == rows[i].has_en);
    CHECK(back[i].seed == rows[i].seed);
  }
}

TEST_CASE("read_csv rejects malformed input") {
  auto path = tmp("noma_bad.csv");
  {
    std::ofstream out(path);
    out << "wrong,header\n";
  }
  CHECK_THROWS_AS(read_csv(path.string()), CorruptFileError);
  {
    std::ofstream out(path);
    out << "snr_db,S,M,J,detector,trials,ser,pd,pfa,en,seed\n";
    out << "10,40,100,7,somp,5,0.1,0.9\n";  // too few cells
  }
  CHECK_THROWS_AS(read_csv(path.string()), CorruptFileError);
  {
    std::ofstream out(path);
    out << "snr_db,S,M,J,detector,trials,ser,pd,pfa,en,seed\n";
    out << "ten,40,100,7,somp,5,0.1,0.9,0.0,,3\n";  // non-numeric
  }
  CHECK_THROWS_AS(read_csv(path.string()), CorruptFileError);
  std::filesystem::remove(path);
}

TEST_CASE("plot data splits by detector with the figure's x axis") {
  std::vector<ResultRow> rows;
  for (double snr : {0.0, 5.0, 10.0}) {
    for (const char* det : {"somp", "bpdn"}) {
      ResultRow r;
      r.snr_db = snr;
      r.S = 40;
      r.M = 100;
      r.J = 7;
      r.detector = det;
      r.trials = 10;
      r.ser = 0.5 - snr / 100.0 - (det[0] == 'b' ? 0.01 : 0.0);
      r.pd = 0.9;
      r.pfa = 0.05;
      rows.push_back(r);
    }
  }

  auto dir = tmp("noma_plots");
  std::filesystem::remove_all(dir);
  auto written = emit_plot_data(rows, "ser_vs_snr", dir.string());
  REQUIRE(written.size() == 2);
  CHECK(std::filesystem::exists(written[0]));
  CHECK(written[0].find("ser_vs_snr_somp.tsv") != std::string::npos);
  CHECK(written[1].find("ser_vs_snr_bpdn.tsv") != std::string::npos);

  std::ifstream in(written[0]);
  std::string header, line1;
  std::getline(in, header);
  std::getline(in, line1);
  CHECK(header == "x\ty");
  CHECK(line1.rfind("0\t", 0) == 0);

  CHECK_THROWS_AS(emit_plot_data(rows, "nonsense", dir.string()), ConfigError);
  CHECK_THROWS_AS(emit_plot_data({}, "ser_vs_snr", dir.string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("en figure uses rows that carry the estimate") {
  std::vector<ResultRow> rows;
  for (std::size_t j : {1u, 7u, 50u}) {
    ResultRow r;
    r.snr_db = 10.0;
    r.S = 40;
    r.M = 100;
    r.J = j;
    r.detector = "estimator";
    r.trials = 10;
    r.has_detection = false;
    r.has_en = true;
    r.en = 0.1 / double(j);
    rows.push_back(r);
  }
  auto dir = tmp("noma_plots_en");
  std::filesystem::remove_all(dir);
  auto written = emit_plot_data(rows, "en_vs_j", dir.string());
  REQUIRE(written.size() == 1);
  std::ifstream in(written[0]);
  std::string header, l1, l2, l3;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1.rfind("1\t", 0) == 0);
  CHECK(l3.rfind("50\t", 0) == 0);
  std::filesystem::remove_all(dir);

  // Rows without the metric cannot make the figure.
  for (auto& r : rows) r.has_en = false;
  CHECK_THROWS_AS(emit_plot_data(rows, "en_vs_j", dir.string()), ConfigError);
}

TEST_CASE("training orchestration writes a model and a curve") {
  TrainSpec spec;
  spec.sys.K = 12;
  spec.sys.M = 6;
  spec.sys.S = 2;
  spec.sys.J = 3;
  spec.sys.snr_db = 15.0;
  spec.sys.seed = 5;
  spec.train.inner_steps = 2;
  spec.train.batch = 4;
  spec.train.max_steps = 8;
  spec.C1 = 10;
  spec.C2 = 8;
  spec.model_out = tmp("noma_train_model.bin").string();
  spec.curve_out = tmp("noma_train_curve.csv").string();

  auto model = run_training(spec);
  CHECK(model.hyper.K == 12);
  CHECK(model.hyper.C1 == 10);
  CHECK(std::filesystem::exists(spec.model_out));

  auto loaded = load_model(spec.model_out);
  CHECK(loaded.params.W1 == model.params.W1);

  std::ifstream in(spec.curve_out);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,loss_g,loss_h,alpha");
  int lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 8);

  std::filesystem::remove(spec.model_out);
  std::filesystem::remove(spec.curve_out);
}

TEST_CASE("sweep runs the genmud detector from a saved model") {
  // Train a throwaway model, then sweep with it.
  TrainSpec tspec;
  tspec.sys.K = 12;
  tspec.sys.M = 6;
  tspec.sys.S = 2;
  tspec.sys.J = 3;
  tspec.sys.snr_db = 12.0;
  tspec.sys.seed = 9;
  tspec.train.inner_steps = 2;
  tspec.train.batch = 2;
  tspec.train.max_steps = 5;
  tspec.C1 = 8;
  tspec.C2 = 8;
  tspec.model_out = tmp("noma_sweep_model.bin").string();
  run_training(tspec);

  ExperimentSpec spec;
  spec.K = 12;
  spec.snr_db = {12.0};
  spec.S = {2};
  spec.M = {6};
  spec.J = {3};
  spec.detectors = {"genmud", "oracle_ls"};
  spec.trials = 10;
  spec.model_path = tspec.model_out;
  spec.detect_steps = 4;
  spec.seed = 11;
  auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].detector == "genmud");
  CHECK(rows[0].pfa <= 1.0);

  // A sweep whose grid disagrees with the model must fail fast.
  spec.K = 16;
  spec.S = {2};
  CHECK_THROWS_AS(run_sweep(spec), VersionMismatchError);

  std::filesystem::remove(tspec.model_out);
}
