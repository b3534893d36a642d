#include "noma/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "noma/errors.hpp"

namespace noma {

namespace {

void check_problem(const CMat& y, const CMat& h) {
  if (y.rows() != h.rows()) {
    throw ShapeMismatchError("recovery: Y has " + std::to_string(y.rows()) +
                             " rows, H has " + std::to_string(h.rows()));
  }
}

void check_support(const std::vector<std::size_t>& support, Eigen::Index k) {
  std::set<std::size_t> seen;
  for (std::size_t s : support) {
    if (s >= static_cast<std::size_t>(k)) {
      throw ConfigError("recovery: support index " + std::to_string(s) +
                        " out of range for K=" + std::to_string(k));
    }
    if (!seen.insert(s).second) {
      throw ConfigError("recovery: duplicate support index " +
                        std::to_string(s));
    }
  }
}

CMat columns(const CMat& h, const std::vector<std::size_t>& support) {
  CMat sub(h.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    sub.col(static_cast<Eigen::Index>(i)) =
        h.col(static_cast<Eigen::Index>(support[i]));
  }
  return sub;
}

Frame map_rows_to_frame(const CMat& values,
                        const std::vector<std::size_t>& support,
                        Eigen::Index k, Eigen::Index j) {
  Frame f;
  f.symbols = CMat::Zero(k, j);
  f.support = support;
  std::sort(f.support.begin(), f.support.end());
  for (std::size_t i = 0; i < support.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(support[i]);
    for (Eigen::Index c = 0; c < j; ++c) {
      f.symbols(row, c) =
          nearest_qpsk(values(static_cast<Eigen::Index>(i), c));
    }
  }
  return f;
}

/// Indices of the n largest scores, ties resolved toward the lower index.
std::vector<std::size_t> top_n(const std::vector<double>& scores,
                               std::size_t n) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  order.resize(n);
  return order;
}

}  // namespace

Frame oracle_ls(const CMat& y, const CMat& h,
                const std::vector<std::size_t>& support) {
  check_problem(y, h);
  check_support(support, h.cols());
  if (support.empty()) {
    throw ConfigError("oracle_ls: empty support");
  }
  const CMat hs = columns(h, support);
  const CMat xs = linalg::least_squares(hs, y);
  return map_rows_to_frame(xs, support, h.cols(), y.cols());
}

Frame somp_detect(const CMat& y, const CMat& h,
                  const RecoverySettings& settings) {
  check_problem(y, h);
  const auto K = h.cols();
  const auto J = y.cols();
  const std::size_t S = settings.sparsity;
  if (S == 0 || S > static_cast<std::size_t>(K)) {
    throw ConfigError("somp_detect: need 0 < sparsity <= K, got " +
                      std::to_string(S));
  }

  std::vector<double> col_norm_sq(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    col_norm_sq[static_cast<std::size_t>(k)] = h.col(k).squaredNorm();
  }

  auto run = [&](const CMat& yj) {
    std::vector<std::size_t> support;
    std::vector<char> in_support(static_cast<std::size_t>(K), 0);
    CMat residual = yj;
    CMat xs;  // coefficients on `support` from the last successful re-solve
    for (std::size_t round = 0; round < S; ++round) {
      const CMat corr = h.adjoint() * residual;  // K x J
      double best = 0.0;
      std::size_t best_k = static_cast<std::size_t>(K);
      for (Eigen::Index k = 0; k < K; ++k) {
        const auto sk = static_cast<std::size_t>(k);
        if (in_support[sk] || col_norm_sq[sk] == 0.0) continue;
        const double score = corr.row(k).squaredNorm() / col_norm_sq[sk];
        if (score > best) {
          best = score;
          best_k = sk;
        }
      }
      // A zero residual correlates with nothing; selecting would be
      // arbitrary, so the support stays partial.
      if (best_k == static_cast<std::size_t>(K)) break;
      support.push_back(best_k);
      in_support[best_k] = 1;
      const CMat hs = columns(h, support);
      try {
        xs = linalg::least_squares(hs, yj);
      } catch (const RankDeficientError&) {
        // Newly selected column is (numerically) dependent on the rest:
        // stop early with the previous support.
        support.pop_back();
        break;
      }
      residual = yj - hs * xs;
    }
    if (support.empty()) {
      Frame f;
      f.symbols = CMat::Zero(K, yj.cols());
      return f;
    }
    return map_rows_to_frame(xs, support, K, yj.cols());
  };

  if (!settings.per_slot_omp) return run(y);

  // Per-slot ablation: each slot gets its own greedy support; the reported
  // frame support is the union, so entries inside it may still be zero in
  // slots that did not select the user.
  Frame f;
  f.symbols = CMat::Zero(K, J);
  std::set<std::size_t> union_support;
  for (Eigen::Index j = 0; j < J; ++j) {
    const Frame fj = run(y.col(j));
    f.symbols.col(j) = fj.symbols.col(0);
    union_support.insert(fj.support.begin(), fj.support.end());
  }
  f.support.assign(union_support.begin(), union_support.end());
  return f;
}

double default_bpdn_lambda(double sigma_sq, const CMat& h, std::size_t j) {
  if (sigma_sq < 0.0) {
    throw ConfigError("default_bpdn_lambda: negative noise variance");
  }
  if (j == 0) throw ConfigError("default_bpdn_lambda: J must be >= 1");
  const auto K = h.cols();
  std::vector<double> norms(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    norms[static_cast<std::size_t>(k)] = h.col(k).norm();
  }
  std::nth_element(norms.begin(), norms.begin() + norms.size() / 2,
                   norms.end());
  const double med = norms[norms.size() / 2];
  return std::sqrt(sigma_sq) *
         std::sqrt(2.0 * std::log(static_cast<double>(K))) * med *
         std::sqrt(static_cast<double>(j));
}

BpdnResult bpdn_recover(const CMat& y, const CMat& h,
                        const RecoverySettings& settings) {
  check_problem(y, h);
  const auto K = h.cols();
  const auto J = y.cols();
  const std::size_t S = settings.sparsity;
  if (S == 0 || S > static_cast<std::size_t>(K)) {
    throw ConfigError("bpdn_recover: need 0 < sparsity <= K, got " +
                      std::to_string(S));
  }
  if (settings.max_iters == 0) {
    throw ConfigError("bpdn_recover: max_iters must be >= 1");
  }
  if (settings.bpdn_lambda < 0.0) {
    throw ConfigError("bpdn_recover: bpdn_lambda must be >= 0");
  }
  if (settings.bpdn_tol <= 0.0) {
    throw ConfigError("bpdn_recover: bpdn_tol must be > 0");
  }
  const double lambda = settings.bpdn_lambda;

  // Lipschitz constant of the smooth part: lambda_max(H^H H) by power
  // iteration, inflated 2% to absorb estimation error.
  const CMat hh = h.adjoint() * h;
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(K);
  v /= v.norm();
  double eig = 1.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXcd w = hh * v;
    const double n = w.norm();
    if (n == 0.0) break;  // H = 0: any step size works
    eig = n;
    v = w / n;
  }
  const double L = std::max(eig * 1.02, 1e-12);
  const double step = 1.0 / L;
  const double thresh = lambda * step;

  auto objective = [&](const CMat& x) {
    const CMat r = y - h * x;
    double row_sum = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) row_sum += x.row(k).norm();
    return 0.5 * r.squaredNorm() + lambda * row_sum;
  };

  BpdnResult res;
  CMat x = CMat::Zero(K, J);
  res.objective.push_back(objective(x));
  for (std::size_t it = 0; it < settings.max_iters; ++it) {
    const CMat grad = h.adjoint() * (h * x - y);
    CMat z = x - step * grad;
    // Row-wise group soft threshold.
    for (Eigen::Index k = 0; k < K; ++k) {
      const double n = z.row(k).norm();
      const double scale = n > thresh ? (1.0 - thresh / n) : 0.0;
      z.row(k) *= scale;
    }
    x = std::move(z);
    const double obj = objective(x);
    res.objective.push_back(obj);
    const double prev = res.objective[res.objective.size() - 2];
    if (std::abs(prev - obj) <= settings.bpdn_tol * std::max(1.0, prev)) {
      res.converged = true;
      break;
    }
  }
  res.raw = x;

  // Debias: sparsity largest rows by energy, zero-norm rows excluded (they
  // carry no evidence and would make the restricted LS arbitrary).
  std::vector<double> row_energy(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    row_energy[static_cast<std::size_t>(k)] = x.row(k).squaredNorm();
  }
  std::vector<std::size_t> picked = top_n(row_energy, S);
  std::vector<std::size_t> support;
  for (std::size_t k : picked) {
    if (row_energy[k] > 0.0) support.push_back(k);
  }
  if (support.empty()) {
    // Everything thresholded away: fall back to correlation scores so the
    // caller still gets a size-S hard estimate.
    const CMat corr = h.adjoint() * y;
    std::vector<double> scores(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) {
      scores[static_cast<std::size_t>(k)] = corr.row(k).squaredNorm();
    }
    support = top_n(scores, S);
  }
  res.frame = oracle_ls(y, h, support);
  return res;
}

}  // namespace noma
