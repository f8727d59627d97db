#include "ncbsbl/sbl_baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ncbsbl {

ScalarPosterior sbl_posterior(const CMatrix& data, const CMatrix& dictionary,
                              const RVector& gamma, double beta) {
  const Eigen::Index rows = dictionary.rows();
  const CMatrix AG = dictionary * gamma.cast<cdouble>().asDiagonal();
  CMatrix Sy = (1.0 / beta) * CMatrix::Identity(rows, rows);
  Sy.noalias() += AG * dictionary.adjoint();
  Eigen::LLT<CMatrix> llt(Sy);
  if (llt.info() != Eigen::Success) throw std::runtime_error("data covariance is not positive definite");
  ScalarPosterior out;
  out.mu = AG.adjoint() * llt.solve(data);
  out.Sigma = CMatrix(gamma.cast<cdouble>().asDiagonal()) - AG.adjoint() * llt.solve(AG);
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.adjoint()).eval();
  return out;
}

SblResult sbl_em_solve(const CMatrix& data, const CMatrix& dictionary, const SolverConfig& cfg) {
  cfg.validate();
  if (data.rows() != dictionary.rows()) {
    throw std::invalid_argument("data and dictionary row counts differ");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index rows = data.rows();
  const Eigen::Index N = dictionary.cols();
  const Eigen::Index L = data.cols();
  const double rows_d = static_cast<double>(rows);
  const double L_d = static_cast<double>(L);

  SblResult res;
  res.hypers.gamma = RVector::Zero(N);
  res.mu = CMatrix::Zero(N, L);
  const double energy = data.squaredNorm();
  if (energy == 0.0) {
    res.report.converged = true;
    res.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }

  double noise_var = initial_noise_variance(
      data, cfg.beta_mode == BetaMode::adaptive ? BetaMode::fixed_normalized : cfg.beta_mode);
  RVector gamma = RVector::Constant(N, energy / (rows_d * L_d));
  std::vector<Eigen::Index> active(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) active[static_cast<std::size_t>(n)] = n;

  CMatrix A_act = dictionary;
  while (res.report.iterations < cfg.max_iter) {
    const auto na = static_cast<Eigen::Index>(active.size());
    RVector g_act(na);
    for (Eigen::Index a = 0; a < na; ++a) g_act[a] = gamma[active[static_cast<std::size_t>(a)]];

    const CMatrix AG = A_act * g_act.cast<cdouble>().asDiagonal();
    CMatrix Sy = noise_var * CMatrix::Identity(rows, rows);
    Sy.noalias() += AG * A_act.adjoint();
    Eigen::LLT<CMatrix> llt(Sy);
    if (llt.info() != Eigen::Success) throw std::runtime_error("EM-SBL covariance lost definiteness");
    const CMatrix W = llt.solve(A_act);
    const CMatrix CZ = llt.solve(data);
    const CMatrix mu = AG.adjoint() * CZ;
    const RVector s = A_act.conjugate().cwiseProduct(W).colwise().sum().real().transpose();

    RVector next = RVector::Zero(N);
    for (Eigen::Index a = 0; a < na; ++a) {
      const double g = g_act[a];
      next[active[static_cast<std::size_t>(a)]] =
          std::max(0.0, mu.row(a).squaredNorm() / L_d + g - g * g * s[a]);
    }
    if (cfg.beta_mode == BetaMode::adaptive) {
      const double tr_inv = llt.solve(CMatrix::Identity(rows, rows)).trace().real();
      const double resid = noise_var * noise_var * CZ.squaredNorm();
      const double spread = noise_var * rows_d - noise_var * noise_var * tr_inv;
      noise_var = std::max((resid + L_d * spread) / (rows_d * L_d), 1e-12 * energy / (rows_d * L_d));
    }

    const double g_max = next.maxCoeff();
    std::vector<Eigen::Index> kept;
    kept.reserve(active.size());
    for (Eigen::Index n : active) {
      if (next[n] > 0.0 && next[n] >= cfg.prune_floor * g_max) {
        kept.push_back(n);
      } else {
        next[n] = 0.0;
      }
    }
    const double base = gamma.norm();
    const double eps = base == 0.0 ? 0.0 : (next - gamma).norm() / base;
    gamma = next;
    ++res.report.iterations;
    if (cfg.keep_gamma_history) {
      res.report.gamma_history.emplace_back(gamma.data(), gamma.data() + gamma.size());
    }
    if (kept.size() != active.size()) {
      active = std::move(kept);
      A_act.resize(rows, static_cast<Eigen::Index>(active.size()));
      for (std::size_t a = 0; a < active.size(); ++a) {
        A_act.col(static_cast<Eigen::Index>(a)) = dictionary.col(active[a]);
      }
    }
    if (active.empty() || !(eps > cfg.eps_min)) {
      res.report.converged = true;
      break;
    }
  }

  // Posterior and cost for the final hyperparameters.
  if (!active.empty()) {
    RVector g_act(static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) g_act[static_cast<Eigen::Index>(a)] = gamma[active[a]];
    const ScalarPosterior post = sbl_posterior(data, A_act, g_act, 1.0 / noise_var);
    for (std::size_t a = 0; a < active.size(); ++a) {
      res.mu.row(active[a]) = post.mu.row(static_cast<Eigen::Index>(a));
    }
  }
  CMatrix Sy = noise_var * CMatrix::Identity(rows, rows);
  for (Eigen::Index n : active) Sy.noalias() += gamma[n] * dictionary.col(n) * dictionary.col(n).adjoint();
  Eigen::LLT<CMatrix> llt(Sy);
  double logdet = 0.0;
  for (Eigen::Index k = 0; k < rows; ++k) logdet += 2.0 * std::log(llt.matrixLLT()(k, k).real());
  res.report.final_cost = L_d * logdet + data.conjugate().cwiseProduct(llt.solve(data)).sum().real();

  res.hypers.gamma = gamma;
  res.hypers.beta = 1.0 / noise_var;
  res.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

CMatrix nc_dictionary(const GridSpec& grid, std::size_t num_elements, double phi_rad) {
  const CMatrix A = build_dictionary(grid, num_elements);
  const auto M = A.rows();
  const cdouble rot = std::polar(1.0, phi_rad);
  CMatrix D(2 * M, A.cols());
  D.topRows(M) = rot * A.conjugate();
  D.bottomRows(M) = std::conj(rot) * A;
  return D;
}

double common_phase(std::span<const double> known_phis) {
  if (known_phis.empty()) throw std::invalid_argument("NC-SBL needs the known NC phase");
  for (double p : known_phis) {
    if (std::abs(p - known_phis.front()) > 1e-12) {
      throw std::invalid_argument(
          "NC-SBL assumes one NC phase shared by all sources; distinct phases were supplied");
    }
  }
  return known_phis.front();
}

SblResult nc_sbl_solve(const AugmentedObservation& obs, const GridSpec& grid,
                       std::span<const double> known_phis, const SolverConfig& cfg) {
  const double phi = common_phase(known_phis);
  return sbl_em_solve(obs.Y, nc_dictionary(grid, obs.num_elements(), phi), cfg);
}

}  // namespace ncbsbl
