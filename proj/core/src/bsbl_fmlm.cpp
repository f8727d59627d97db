#include "ncbsbl/bsbl_fmlm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ncbsbl {

namespace {

// An action must lower the cost by more than this (relative to |cost|) to be taken.
constexpr double kImprovementTol = 1e-12;
// Largest entry of (I - S_i L_i)^{-1} trusted before switching to a dense solve.
constexpr double kMaxMinusIGain = 1e6;

double gamma_change(const std::vector<double>& old_gamma, const std::vector<double>& new_gamma) {
  double diff = 0.0;
  double base = 0.0;
  for (std::size_t i = 0; i < old_gamma.size(); ++i) {
    const double d = new_gamma[i] - old_gamma[i];
    diff += d * d;
    base += old_gamma[i] * old_gamma[i];
  }
  if (base == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(diff / base);
}

}  // namespace

std::string_view to_string(BetaMode mode) {
  switch (mode) {
    case BetaMode::fixed_paper: return "fixed_paper";
    case BetaMode::fixed_normalized: return "fixed_normalized";
    case BetaMode::adaptive: return "adaptive";
  }
  return "unknown";
}

BetaMode parse_beta_mode(std::string_view name) {
  if (name == "fixed_paper") return BetaMode::fixed_paper;
  if (name == "fixed_normalized") return BetaMode::fixed_normalized;
  if (name == "adaptive") return BetaMode::adaptive;
  throw std::invalid_argument("unknown beta mode '" + std::string(name) + "'");
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::add: return "add";
    case ActionKind::reestimate: return "reestimate";
    case ActionKind::remove: return "remove";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (max_iter == 0) throw std::invalid_argument("max_iter must be at least 1");
  if (!(eps_min > 0.0)) throw std::invalid_argument("eps_min must be positive");
  if (!(r_clip > 0.0 && r_clip < 1.0)) throw std::invalid_argument("r_clip must lie in (0, 1)");
  if (!(prune_floor >= 0.0 && prune_floor < 1.0)) {
    throw std::invalid_argument("prune_floor must lie in [0, 1)");
  }
}

double initial_noise_variance(const CMatrix& data, BetaMode mode) {
  const double energy = data.squaredNorm();
  if (energy == 0.0) return 1.0;
  if (mode == BetaMode::fixed_paper) return 0.01 * energy;
  return 0.01 * energy / static_cast<double>(data.size());
}

CMatrix block_adjoint_times(const BlockDictionary& dict, const CMatrix& W) {
  const auto M = static_cast<Eigen::Index>(dict.num_elements);
  const auto N = static_cast<Eigen::Index>(dict.num_blocks);
  const CMatrix top = dict.A.transpose() * W.topRows(M);
  const CMatrix bottom = dict.A.adjoint() * W.bottomRows(M);
  CMatrix out(2 * N, W.cols());
  for (Eigen::Index n = 0; n < N; ++n) {
    out.row(2 * n) = top.row(n);
    out.row(2 * n + 1) = bottom.row(n);
  }
  return out;
}

FmlmSolver::FmlmSolver(const CMatrix& Y, const BlockDictionary& dict, SolverConfig cfg)
    : Y_(Y), dict_(&dict), cfg_(cfg) {
  cfg_.validate();
  if (Y.rows() != static_cast<Eigen::Index>(dict.rows()) || dict.V.cols() != 2 * dict.A.cols()) {
    throw std::invalid_argument("observation has " + std::to_string(Y.rows()) +
                                " rows but the block dictionary expects " +
                                std::to_string(dict.rows()));
  }
  if (Y.cols() == 0) throw std::invalid_argument("observation has no snapshots");
  y_energy_ = Y.squaredNorm();
  noise_var_ = initial_noise_variance(
      Y, cfg_.beta_mode == BetaMode::adaptive ? BetaMode::fixed_normalized : cfg_.beta_mode);

  const std::size_t N = dict.num_blocks;
  L_.assign(N, Mat2c::Zero());
  gamma_.assign(N, 0.0);
  G_.assign(N, Mat2c::Identity());
  r_.assign(N, cdouble{});
  active_.assign(N, false);
  refresh();
  cost_ = marginal_cost();
}

CMatrix FmlmSolver::dense_covariance() const {
  const auto rows = static_cast<Eigen::Index>(dict_->rows());
  CMatrix C = noise_var_ * CMatrix::Identity(rows, rows);
  for (std::size_t i : active_set_) {
    const auto Vi = dict_->block(i);
    C.noalias() += Vi * L_[i] * Vi.adjoint();
  }
  return C;
}

void FmlmSolver::refresh() {
  const CMatrix C = dense_covariance();
  Eigen::LLT<CMatrix> llt(C);
  if (llt.info() != Eigen::Success) throw std::runtime_error("data covariance lost definiteness");
  Cinv_ = llt.solve(CMatrix::Identity(C.rows(), C.cols()));
  Cinv_ = 0.5 * (Cinv_ + Cinv_.adjoint()).eval();

  const std::size_t N = dict_->num_blocks;
  const CMatrix W = Cinv_ * dict_->V;
  S_.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto idx = static_cast<Eigen::Index>(2 * n);
    S_[n] = hermitian_part(dict_->V.middleCols(idx, 2).adjoint() * W.middleCols(idx, 2));
  }
  Qt_ = block_adjoint_times(*dict_, Cinv_ * Y_);
}

void FmlmSolver::set_noise_variance(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("noise variance must be positive and finite");
  }
  noise_var_ = value;
  refresh();
  cost_ = marginal_cost();
}

double FmlmSolver::inverse_drift() const {
  const CMatrix C = dense_covariance();
  const CMatrix fresh = C.llt().solve(CMatrix::Identity(C.rows(), C.cols()));
  return (fresh - Cinv_).cwiseAbs().maxCoeff();
}

FmlmSolver::LeaveOneOut FmlmSolver::leave_one_out(std::size_t i) const {
  const auto idx = static_cast<Eigen::Index>(2 * i);
  if (!active_[i]) return {S_[i], Qt_.middleRows(idx, 2)};

  // (I - S_i L_i)^{-1} maps full-C quantities to C_{-i} ones. It blows up when
  // block i explains the data almost exactly at small noise, so fall back to a
  // dense solve against C_{-i} there.
  const Mat2c m = (Mat2c::Identity() - S_[i] * L_[i]).inverse();
  LeaveOneOut out{hermitian_part(m * S_[i]), m * Qt_.middleRows(idx, 2)};
  const bool well_conditioned = m.allFinite() && m.cwiseAbs().maxCoeff() < kMaxMinusIGain &&
                                Eigen::LLT<Mat2c>(out.U).info() == Eigen::Success;
  if (well_conditioned) return out;

  const auto Vi = dict_->block(i);
  const CMatrix C_minus = dense_covariance() - Vi * L_[i] * Vi.adjoint();
  const Eigen::LLT<CMatrix> llt(C_minus);
  const CMatrix W = llt.solve(Vi);
  out.U = hermitian_part(Vi.adjoint() * W);
  out.Q = W.adjoint() * Y_;
  return out;
}

Mat2c FmlmSolver::U(std::size_t i) const { return leave_one_out(i).U; }

CMatrix FmlmSolver::Q(std::size_t i) const { return leave_one_out(i).Q; }

Mat2c FmlmSolver::scatter(std::size_t i) const {
  const CMatrix q = leave_one_out(i).Q;
  return hermitian_part(q * q.adjoint());
}

BlockConstraint FmlmSolver::candidate(std::size_t i) const {
  const Mat2c sc = scatter(i) / static_cast<double>(snapshots());
  return constrain_block(update_block(U(i), sc), cfg_.r_clip);
}

double FmlmSolver::cost_delta(std::size_t i, const Mat2c& value) const {
  return block_cost_delta(value, L_[i], U(i), scatter(i), snapshots());
}

std::optional<BlockAction> FmlmSolver::propose() const {
  const std::size_t N = num_blocks();
  const std::size_t L = snapshots();
  const double inv_l = 1.0 / static_cast<double>(L);

  std::optional<BlockAction> best;
  double best_delta = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    Mat2c Ui;
    Mat2c qqh;
    if (active_[i]) {
      const LeaveOneOut loo = leave_one_out(i);
      Ui = loo.U;
      qqh = hermitian_part(loo.Q * loo.Q.adjoint());
    } else {
      const auto qt = Qt_.middleRows(static_cast<Eigen::Index>(2 * i), 2);
      Ui = S_[i];
      qqh = qt * qt.adjoint();
    }
    const BlockConstraint cand = constrain_block(update_block(Ui, qqh * inv_l), cfg_.r_clip);
    if (!active_[i] && cand.gamma == 0.0) continue;

    BlockAction act;
    act.block = i;
    if (!active_[i]) {
      act.kind = ActionKind::add;
    } else if (cand.gamma == 0.0) {
      act.kind = ActionKind::remove;
    } else {
      act.kind = ActionKind::reestimate;
    }
    act.value = act.kind == ActionKind::remove ? Mat2c::Zero() : cand.combined();
    act.delta_cost = block_cost_delta(act.value, L_[i], Ui, qqh, L);
    if (act.delta_cost < best_delta) {
      best_delta = act.delta_cost;
      best = act;
    }
  }
  const double tol = kImprovementTol * std::max(1.0, std::abs(cost_));
  if (best && best->delta_cost < -tol) return best;
  return std::nullopt;
}

void FmlmSolver::rank2_update(std::size_t i, const Mat2c& delta) {
  const auto M = static_cast<Eigen::Index>(dict_->num_elements);
  const auto col = dict_->A.col(static_cast<Eigen::Index>(i));

  // E = C^{-1} V_i, using the block's structure [conj(a) 0; 0 a].
  CMatrix E(2 * M, 2);
  E.col(0) = Cinv_.leftCols(M) * col.conjugate();
  E.col(1) = Cinv_.rightCols(M) * col;

  const Mat2c K = delta * (Mat2c::Identity() + S_[i] * delta).inverse();
  const CMatrix X = block_adjoint_times(*dict_, E);  // 2N x 2: V_n^H C^{-1} V_i
  const CMatrix EhY = E.adjoint() * Y_;

  Cinv_.noalias() -= E * K * E.adjoint();
  for (std::size_t n = 0; n < S_.size(); ++n) {
    const Eigen::Matrix2cd Xn = X.middleRows(static_cast<Eigen::Index>(2 * n), 2);
    S_[n] = hermitian_part(S_[n] - Xn * K * Xn.adjoint());
  }
  Qt_.noalias() -= X * (K * EhY);
}

void FmlmSolver::apply(const BlockAction& action) {
  const std::size_t i = action.block;
  if (i >= num_blocks()) throw std::out_of_range("block index out of range");
  const Mat2c value =
      action.kind == ActionKind::remove ? Mat2c::Zero() : hermitian_part(action.value);
  const double delta_cost = cost_delta(i, value);

  rank2_update(i, value - L_[i]);
  L_[i] = value;
  cost_ += delta_cost;

  const double g = 0.5 * (value(0, 0).real() + value(1, 1).real());
  const bool now_active = g > 0.0;
  if (now_active) {
    gamma_[i] = g;
    G_[i] = value / g;
    r_[i] = G_[i](0, 1);
  } else {
    L_[i].setZero();
    gamma_[i] = 0.0;
    G_[i].setIdentity();
    r_[i] = cdouble{};
  }
  if (now_active != active_[i]) {
    active_[i] = now_active;
    auto pos = std::lower_bound(active_set_.begin(), active_set_.end(), i);
    if (now_active) {
      active_set_.insert(pos, i);
    } else {
      active_set_.erase(pos);
    }
  }
}

void FmlmSolver::set_block(std::size_t i, const Mat2c& value) {
  BlockAction act;
  act.block = i;
  act.value = value;
  act.kind = value.isZero(0.0) ? ActionKind::remove
             : active_[i]      ? ActionKind::reestimate
                               : ActionKind::add;
  apply(act);
}

std::vector<std::size_t> FmlmSolver::prune() {
  std::vector<std::size_t> removed;
  if (active_set_.empty() || cfg_.prune_floor == 0.0) return removed;
  double g_max = 0.0;
  for (std::size_t i : active_set_) g_max = std::max(g_max, gamma_[i]);
  const double floor = cfg_.prune_floor * g_max;
  for (std::size_t i : active_set_) {
    if (gamma_[i] < floor) removed.push_back(i);
  }
  for (std::size_t i : removed) {
    BlockAction act;
    act.kind = ActionKind::remove;
    act.block = i;
    apply(act);
  }
  return removed;
}

void FmlmSolver::update_noise() {
  // EM update written through C^{-1}: with C = s I + V G V^H,
  //   Y - V mu = s C^{-1} Y   and   tr(Sigma V^H V) = s rows - s^2 tr(C^{-1}).
  const double s = noise_var_;
  const double rows = static_cast<double>(dict_->rows());
  const double L = static_cast<double>(snapshots());
  const double resid = s * s * (Cinv_ * Y_).squaredNorm();
  const double spread = s * rows - s * s * Cinv_.trace().real();
  double next = (resid + L * spread) / (rows * L);
  const double floor = 1e-8 * std::max(y_energy_ / (rows * L), 1e-300);
  next = std::max(next, floor);
  noise_var_ = next;
  refresh();
  cost_ = marginal_cost();
}

FmlmSolver::StepOutcome FmlmSolver::step() {
  StepOutcome out;
  out.action = propose();
  if (!out.action) {
    if (cfg_.beta_mode == BetaMode::adaptive) {
      const double before = noise_var_;
      update_noise();
      out.noise_change = std::abs(noise_var_ - before) / before;
    }
    return out;
  }
  apply(*out.action);
  out.pruned = prune();
  if (cfg_.beta_mode == BetaMode::adaptive) update_noise();
  return out;
}

double FmlmSolver::marginal_cost() const {
  const CMatrix C = dense_covariance();
  Eigen::LLT<CMatrix> llt(C);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  const CMatrix& factor = llt.matrixLLT();
  for (Eigen::Index k = 0; k < factor.rows(); ++k) logdet += 2.0 * std::log(factor(k, k).real());
  const CMatrix cy = llt.solve(Y_);
  const double quad = (Y_.conjugate().cwiseProduct(cy)).sum().real();
  return static_cast<double>(snapshots()) * logdet + quad;
}

PosteriorState FmlmSolver::posterior() const {
  PosteriorState ps;
  const std::size_t N = num_blocks();
  const auto L = static_cast<Eigen::Index>(snapshots());
  ps.active_set = active_set_;
  ps.mu = CMatrix::Zero(static_cast<Eigen::Index>(2 * N), L);
  for (std::size_t i : active_set_) {
    const auto idx = static_cast<Eigen::Index>(2 * i);
    ps.mu.middleRows(idx, 2) = L_[i] * Qt_.middleRows(idx, 2);
  }

  // Sigma = Gamma - Gamma V_A^H C^{-1} V_A Gamma over the active blocks.
  const auto na = static_cast<Eigen::Index>(active_set_.size());
  CMatrix VA(static_cast<Eigen::Index>(dict_->rows()), 2 * na);
  CMatrix Gamma = CMatrix::Zero(2 * na, 2 * na);
  for (Eigen::Index a = 0; a < na; ++a) {
    const std::size_t i = active_set_[static_cast<std::size_t>(a)];
    VA.middleCols(2 * a, 2) = dict_->block(i);
    Gamma.block(2 * a, 2 * a, 2, 2) = L_[i];
  }
  const CMatrix inner = VA.adjoint() * Cinv_ * VA;
  ps.Sigma = Gamma - Gamma * inner * Gamma;
  ps.Sigma = 0.5 * (ps.Sigma + ps.Sigma.adjoint()).eval();

  ps.U.resize(N);
  ps.Q.resize(static_cast<Eigen::Index>(2 * N), L);
  for (std::size_t i = 0; i < N; ++i) {
    ps.U[i] = U(i);
    ps.Q.middleRows(static_cast<Eigen::Index>(2 * i), 2) = Q(i);
  }
  ps.cost = marginal_cost();
  return ps;
}

BlockHyperparameters FmlmSolver::hyperparameters() const {
  return BlockHyperparameters{gamma_, G_, L_, r_, beta()};
}

FmlmSolver::StopReason FmlmSolver::descend(SolverReport& report) {
  std::vector<double> gamma_old = gamma_;
  while (report.iterations < cfg_.max_iter) {
    StepOutcome step_out = step();
    if (!step_out.action) {
      if (!step_out.noise_change || !(*step_out.noise_change > cfg_.eps_min)) {
        return StopReason::no_action;
      }
      ++report.iterations;
      continue;
    }
    ++report.iterations;
    const double cost_now = marginal_cost();
    report.action_log.push_back(ActionRecord{step_out.action->kind, step_out.action->block,
                                             step_out.action->delta_cost, cost_now, false});
    for (std::size_t i : step_out.pruned) {
      report.action_log.push_back(ActionRecord{ActionKind::remove, i, 0.0, cost_now, true});
    }
    if (cfg_.debug_dense_check) {
      const double drift = inverse_drift();
      const double scale = Cinv_.cwiseAbs().maxCoeff();
      if (drift > 1e-6 * scale) {
        throw std::runtime_error("incremental C^{-1} drifted from the dense inverse");
      }
    }
    if (cfg_.keep_gamma_history) report.gamma_history.push_back(gamma_);
    const double eps = gamma_change(gamma_old, gamma_);
    gamma_old = gamma_;
    if (!(eps > cfg_.eps_min)) return StopReason::small_change;
  }
  return StopReason::max_iter;
}

bool FmlmSolver::escape(SolverReport& report) {
  const double base = marginal_cost();
  const double tol = 1e-9 * std::max(1.0, std::abs(base));
  const std::vector<std::size_t> active = active_set_;
  for (std::size_t j : active) {
    if (report.iterations >= cfg_.max_iter) return false;
    FmlmSolver trial = *this;
    SolverReport trial_report = report;
    BlockAction drop;
    drop.kind = ActionKind::remove;
    drop.block = j;
    drop.delta_cost = trial.cost_delta(j, Mat2c::Zero());
    trial.apply(drop);
    // A downdate of a dominant block loses most digits when the noise is small.
    trial.refresh();
    if (cfg_.beta_mode == BetaMode::adaptive) trial.update_noise();
    ++trial_report.iterations;
    trial_report.action_log.push_back(
        ActionRecord{ActionKind::remove, j, drop.delta_cost, trial.marginal_cost(), false});
    trial.descend(trial_report);
    if (trial.marginal_cost() < base - tol) {
      for (std::size_t k = report.action_log.size(); k < trial_report.action_log.size(); ++k) {
        trial_report.action_log[k].escape = true;
      }
      *this = std::move(trial);
      report = std::move(trial_report);
      return true;
    }
  }
  return false;
}

SolverResult FmlmSolver::solve() {
  const auto t0 = std::chrono::steady_clock::now();
  SolverReport report;
  cost_ = marginal_cost();
  report.initial_cost = cost_;

  const StopReason stop = descend(report);
  // Escapes only follow a genuine greedy stall; an eps or max_iter stop is final.
  if (cfg_.escape_local_minima && stop == StopReason::no_action) {
    while (escape(report)) {
    }
  }
  report.converged = report.iterations < cfg_.max_iter;

  SolverResult result;
  result.posterior = posterior();
  result.hypers = hyperparameters();
  report.final_cost = result.posterior.cost;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.report = std::move(report);
  return result;
}

SolverResult solve(const CMatrix& Y, const BlockDictionary& dict, const SolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  FmlmSolver solver(Y, dict, cfg);
  SolverResult result = solver.solve();
  result.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace ncbsbl
