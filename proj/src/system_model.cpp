#include "noma/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "noma/errors.hpp"

namespace noma {

using nlohmann::json;

void SystemConfig::validate() const {
  if (K == 0) throw ConfigError("SystemConfig: K must be >= 1");
  if (M == 0) throw ConfigError("SystemConfig: M must be >= 1");
  if (J == 0) throw ConfigError("SystemConfig: J must be >= 1");
  if (S == 0 || S > K) {
    throw ConfigError("SystemConfig: need 0 < S <= K, got S=" +
                      std::to_string(S) + ", K=" + std::to_string(K));
  }
}

SpreadingMatrix SpreadingMatrix::toeplitz_rademacher(std::size_t m,
                                                     std::size_t k,
                                                     rng::Stream& rng) {
  std::vector<double> seq(m + k - 1);
  for (auto& v : seq) v = rng.rademacher();
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  SpreadingMatrix sp;
  sp.entries = RMat(m, k);
  for (std::size_t col = 0; col < k; ++col) {
    for (std::size_t row = 0; row < m; ++row) {
      sp.entries(row, col) = seq[col - row + m - 1] * scale;
    }
  }
  return sp;
}

ChannelMatrix ChannelMatrix::from_gains(CMat gains,
                                        const SpreadingMatrix& spreading) {
  if (gains.rows() != spreading.entries.rows() ||
      gains.cols() != spreading.entries.cols()) {
    throw ShapeMismatchError("ChannelMatrix: gains " +
                             std::to_string(gains.rows()) + "x" +
                             std::to_string(gains.cols()) + " vs spreading " +
                             std::to_string(spreading.entries.rows()) + "x" +
                             std::to_string(spreading.entries.cols()));
  }
  ChannelMatrix ch;
  ch.effective = gains.cwiseProduct(spreading.entries.cast<std::complex<double>>());
  ch.gains = std::move(gains);
  return ch;
}

ChannelMatrix sample_channel(const SystemConfig& cfg,
                             const SpreadingMatrix& spreading,
                             rng::Stream& rng) {
  CMat gains(cfg.M, cfg.K);
  for (std::size_t col = 0; col < cfg.K; ++col) {
    for (std::size_t row = 0; row < cfg.M; ++row) {
      gains(row, col) = rng.cnormal();
    }
  }
  return ChannelMatrix::from_gains(std::move(gains), spreading);
}

std::complex<double> qpsk_modulate(int b0, int b1) {
  // Gray labeling: first bit decides Im sign, second bit decides Re sign
  // such that (0,0)->1+i, (0,1)->-1+i, (1,1)->-1-i, (1,0)->1-i.
  const double re = (b1 == 0) ? 1.0 : -1.0;
  const double im = (b0 == 0) ? 1.0 : -1.0;
  return {re, im};
}

std::complex<double> nearest_qpsk(std::complex<double> v) {
  return {v.real() >= 0.0 ? 1.0 : -1.0, v.imag() >= 0.0 ? 1.0 : -1.0};
}

Frame sample_frame(const SystemConfig& cfg, rng::Stream& rng) {
  cfg.validate();
  // Partial Fisher-Yates over user indices: first S entries are a uniform
  // size-S subset.
  std::vector<std::size_t> idx(cfg.K);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < cfg.S; ++i) {
    const std::size_t j = i + rng.below(cfg.K - i);
    std::swap(idx[i], idx[j]);
  }
  Frame f;
  f.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.S));
  std::sort(f.support.begin(), f.support.end());

  f.symbols = CMat::Zero(cfg.K, cfg.J);
  for (std::size_t slot = 0; slot < cfg.J; ++slot) {
    for (std::size_t k : f.support) {
      f.symbols(k, slot) = kQpskAlphabet[rng.below(4)];
    }
  }
  return f;
}

double linear_snr(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

double noise_variance_for_snr(const SystemConfig& cfg) {
  const double tau = linear_snr(cfg.snr_db);
  return 2.0 * static_cast<double>(cfg.S) /
         (static_cast<double>(cfg.M) * tau);
}

ReceivedFrame transmit(const Frame& frame, const ChannelMatrix& channel,
                       double sigma_sq, double tau, rng::Stream& rng) {
  const auto M = channel.effective.rows();
  const auto K = channel.effective.cols();
  if (frame.symbols.rows() != K) {
    throw ShapeMismatchError("transmit: frame has " +
                             std::to_string(frame.symbols.rows()) +
                             " users, channel has " + std::to_string(K));
  }
  const auto J = frame.symbols.cols();
  ReceivedFrame rx;
  rx.sigma_sq = sigma_sq;
  rx.tau = tau;
  rx.Y = CMat::Zero(M, J);
  // Only active rows contribute; skipping the zero rows keeps large sweeps
  // cheap when S << K.
  for (std::size_t k : frame.support) {
    rx.Y.noalias() +=
        channel.effective.col(static_cast<Eigen::Index>(k)) *
        frame.symbols.row(static_cast<Eigen::Index>(k));
  }
  if (sigma_sq > 0.0) {
    const double sd = std::sqrt(sigma_sq);
    for (Eigen::Index j = 0; j < J; ++j) {
      for (Eigen::Index m = 0; m < M; ++m) {
        rx.Y(m, j) += sd * rng.cnormal();
      }
    }
  }
  return rx;
}

Instance sample_instance(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Instance inst;
  auto channel_rng = rng::derive_stream(seed, rng::StreamTag::kChannel);
  const auto spreading =
      SpreadingMatrix::toeplitz_rademacher(cfg.M, cfg.K, channel_rng);
  inst.channel = sample_channel(cfg, spreading, channel_rng);

  auto data_rng = rng::derive_stream(seed, rng::StreamTag::kData);
  inst.frame = sample_frame(cfg, data_rng);

  auto noise_rng = rng::derive_stream(seed, rng::StreamTag::kNoise);
  inst.rx = transmit(inst.frame, inst.channel, noise_variance_for_snr(cfg),
                     linear_snr(cfg.snr_db), noise_rng);
  return inst;
}

Scenario make_scenario(const SystemConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.cfg = cfg;
  sc.spreading_seed = rng::derive_seed(cfg.seed, rng::StreamTag::kChannel);

  rng::Stream channel_rng(sc.spreading_seed);
  const auto spreading =
      SpreadingMatrix::toeplitz_rademacher(cfg.M, cfg.K, channel_rng);
  sc.gains = sample_channel(cfg, spreading, channel_rng).gains;

  rng::Stream data_rng(rng::derive_seed(cfg.seed, rng::StreamTag::kData));
  sc.frame = sample_frame(cfg, data_rng);

  rng::Stream noise_rng(rng::derive_seed(cfg.seed, rng::StreamTag::kNoise));
  const double sd = std::sqrt(noise_variance_for_snr(cfg));
  sc.noise = CMat(cfg.M, cfg.J);
  for (Eigen::Index j = 0; j < sc.noise.cols(); ++j) {
    for (Eigen::Index m = 0; m < sc.noise.rows(); ++m) {
      sc.noise(m, j) = sd * noise_rng.cnormal();
    }
  }
  return sc;
}

ReceivedFrame realize(const Scenario& sc) {
  rng::Stream channel_rng(sc.spreading_seed);
  const auto spreading =
      SpreadingMatrix::toeplitz_rademacher(sc.cfg.M, sc.cfg.K, channel_rng);
  const auto channel = ChannelMatrix::from_gains(sc.gains, spreading);

  ReceivedFrame rx;
  rx.tau = linear_snr(sc.cfg.snr_db);
  rx.sigma_sq = noise_variance_for_snr(sc.cfg);
  rx.Y = CMat::Zero(sc.cfg.M, sc.cfg.J);
  for (std::size_t k : sc.frame.support) {
    rx.Y.noalias() +=
        channel.effective.col(static_cast<Eigen::Index>(k)) *
        sc.frame.symbols.row(static_cast<Eigen::Index>(k));
  }
  rx.Y += sc.noise;
  return rx;
}

namespace {

constexpr int kScenarioVersion = 1;

json cmat_to_json(const CMat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back({m(r, c).real(), m(r, c).imag()});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

CMat cmat_from_json(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty()) {
    throw CorruptFileError(std::string("scenario: bad matrix field ") + what);
  }
  const std::size_t nr = rows.size();
  const std::size_t nc = rows[0].size();
  CMat m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    if (!rows[r].is_array() || rows[r].size() != nc) {
      throw CorruptFileError(std::string("scenario: ragged matrix ") + what);
    }
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& cell = rows[r][c];
      if (!cell.is_array() || cell.size() != 2) {
        throw CorruptFileError(std::string("scenario: bad complex cell in ") +
                               what);
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {
          cell[0].get<double>(), cell[1].get<double>()};
    }
  }
  return m;
}

}  // namespace

void save_scenario(const Scenario& sc, const std::string& path) {
  json doc;
  doc["format"] = "noma-scenario";
  doc["version"] = kScenarioVersion;
  doc["config"] = {{"K", sc.cfg.K},       {"M", sc.cfg.M},
                   {"J", sc.cfg.J},       {"S", sc.cfg.S},
                   {"snr_db", sc.cfg.snr_db}, {"seed", sc.cfg.seed}};
  doc["spreading_seed"] = sc.spreading_seed;
  doc["gains"] = cmat_to_json(sc.gains);
  doc["support"] = sc.frame.support;
  doc["symbols"] = cmat_to_json(sc.frame.symbols);
  doc["noise"] = cmat_to_json(sc.noise);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_scenario: cannot open " + path);
  out << doc.dump(1, '\t') << '\n';
  if (!out) throw Error("save_scenario: write failed for " + path);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_scenario: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CorruptFileError("load_scenario: " + std::string(e.what()));
  }
  if (doc.value("format", "") != "noma-scenario") {
    throw VersionMismatchError("load_scenario: not a scenario file: " + path);
  }
  if (doc.value("version", -1) != kScenarioVersion) {
    throw VersionMismatchError(
        "load_scenario: unsupported version " +
        std::to_string(doc.value("version", -1)) + " (expected " +
        std::to_string(kScenarioVersion) + ")");
  }
  try {
    Scenario sc;
    const auto& c = doc.at("config");
    sc.cfg.K = c.at("K").get<std::size_t>();
    sc.cfg.M = c.at("M").get<std::size_t>();
    sc.cfg.J = c.at("J").get<std::size_t>();
    sc.cfg.S = c.at("S").get<std::size_t>();
    sc.cfg.snr_db = c.at("snr_db").get<double>();
    sc.cfg.seed = c.at("seed").get<std::uint64_t>();
    sc.cfg.validate();
    sc.spreading_seed = doc.at("spreading_seed").get<std::uint64_t>();
    sc.gains = cmat_from_json(doc.at("gains"), "gains");
    sc.frame.support = doc.at("support").get<std::vector<std::size_t>>();
    sc.frame.symbols = cmat_from_json(doc.at("symbols"), "symbols");
    sc.noise = cmat_from_json(doc.at("noise"), "noise");
    if (sc.gains.rows() != static_cast<Eigen::Index>(sc.cfg.M) ||
        sc.gains.cols() != static_cast<Eigen::Index>(sc.cfg.K) ||
        sc.frame.symbols.rows() != static_cast<Eigen::Index>(sc.cfg.K) ||
        sc.frame.symbols.cols() != static_cast<Eigen::Index>(sc.cfg.J) ||
        sc.noise.rows() != static_cast<Eigen::Index>(sc.cfg.M) ||
        sc.noise.cols() != static_cast<Eigen::Index>(sc.cfg.J) ||
        sc.frame.support.size() != sc.cfg.S) {
      throw CorruptFileError("load_scenario: shape/config disagreement in " +
                             path);
    }
    return sc;
  } catch (const json::exception& e) {
    throw CorruptFileError("load_scenario: " + std::string(e.what()));
  }
}

}  // namespace noma
