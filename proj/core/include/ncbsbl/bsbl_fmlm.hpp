#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "ncbsbl/array_model.hpp"
#include "ncbsbl/block_math.hpp"
#include "ncbsbl/types.hpp"

namespace ncbsbl {

/// How the noise precision beta is chosen.
///  - fixed_paper:      1/beta = 0.01 * ||Y||_F^2
///  - fixed_normalized: 1/beta = 0.01 * ||Y||_F^2 / (rows * L)
///  - adaptive:         EM re-estimate after every step, started from fixed_normalized
enum class BetaMode { fixed_paper, fixed_normalized, adaptive };

std::string_view to_string(BetaMode mode);
BetaMode parse_beta_mode(std::string_view name);

struct SolverConfig {
  std::size_t max_iter = 500;
  double eps_min = 1e-4;
  BetaMode beta_mode = BetaMode::fixed_paper;
  double r_clip = 0.99;
  // Active blocks with gamma below prune_floor * max(gamma) are removed.
  double prune_floor = 1e-10;
  bool keep_gamma_history = false;
  // After convergence, retry from each active block removed and keep the
  // result if the marginal cost drops. Greedy adds of neighbouring cells
  // otherwise lock in a split support for close sources.
  bool escape_local_minima = true;
  // Rebuild C^{-1} densely after each step and check the incremental copy.
  bool debug_dense_check = false;

  void validate() const;
};

/// Noise variance 1/beta for the given data under a fixed policy. Zero data
/// yields 1.0 so the model stays well-posed.
double initial_noise_variance(const CMatrix& data, BetaMode mode);

enum class ActionKind { add, reestimate, remove };

std::string_view to_string(ActionKind kind);

struct BlockAction {
  ActionKind kind = ActionKind::add;
  std::size_t block = 0;
  Mat2c value = Mat2c::Zero();  // new block covariance L_i
  double delta_cost = 0.0;
};

struct ActionRecord {
  ActionKind kind;
  std::size_t block;
  double delta_cost;
  double cost_after;
  bool pruned;  // forced by the prune floor rather than selected
  // Part of an accepted escape move. Only the last record of a consecutive
  // escape run is a committed state; the ones before it may sit above the
  // cost the move started from.
  bool escape = false;
};

struct SolverReport {
  std::size_t iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  double wall_time_s = 0.0;
  std::vector<std::vector<double>> gamma_history;
  std::vector<ActionRecord> action_log;
  double initial_cost = 0.0;
};

struct BlockHyperparameters {
  std::vector<double> gamma;
  std::vector<Mat2c> G;
  std::vector<Mat2c> L;
  std::vector<cdouble> r;
  double beta = 1.0;
};

struct PosteriorState {
  CMatrix mu;                           // 2N x L, zero outside the active blocks
  CMatrix Sigma;                        // 2|A| x 2|A| over the active blocks
  std::vector<std::size_t> active_set;  // ascending block indices
  std::vector<Mat2c> U;                 // per block, against C_{-i}
  CMatrix Q;                            // 2N x L, rows (2i, 2i+1) against C_{-i}
  double cost = 0.0;
};

struct SolverResult {
  PosteriorState posterior;
  BlockHyperparameters hypers;
  SolverReport report;
};

/// Fast marginal likelihood maximisation over the permuted block model
/// Y = V X + W.
///
/// The solver keeps C^{-1} (2M x 2M) together with S_n = V_n^H C^{-1} V_n and
/// Qt_n = V_n^H C^{-1} Y for every block. An action changes one block
/// covariance by D; all cached quantities then follow from a rank-2 Woodbury
/// correction with capacitance D (I + S_i D)^{-1}, which never needs D^{-1}.
/// Quantities against C_{-i} are recovered from the full-C ones through
/// (I - S_i L_i)^{-1}.
///
/// The dictionary must outlive the solver.
class FmlmSolver {
 public:
  FmlmSolver(const CMatrix& Y, const BlockDictionary& dict, SolverConfig cfg);

  std::size_t num_blocks() const { return dict_->num_blocks; }
  std::size_t snapshots() const { return static_cast<std::size_t>(Y_.cols()); }
  double beta() const { return 1.0 / noise_var_; }
  double noise_variance() const { return noise_var_; }
  const SolverConfig& config() const { return cfg_; }

  bool is_active(std::size_t i) const { return active_[i]; }
  const std::vector<std::size_t>& active_set() const { return active_set_; }
  const Mat2c& block_covariance(std::size_t i) const { return L_[i]; }
  double gamma(std::size_t i) const { return gamma_[i]; }

  /// V_i^H C_{-i}^{-1} V_i.
  Mat2c U(std::size_t i) const;
  /// V_i^H C_{-i}^{-1} Y (2 x L).
  CMatrix Q(std::size_t i) const;

  /// Constrained optimal covariance for block i given everything else.
  BlockConstraint candidate(std::size_t i) const;

  /// Change of the marginal cost if block i's covariance became `value`.
  double cost_delta(std::size_t i, const Mat2c& value) const;

  /// Best single block action, or nothing when no action lowers the cost by
  /// more than the numerical tolerance. Ties go to the lowest block index.
  std::optional<BlockAction> propose() const;

  /// Applies an action (any Hermitian PSD value is accepted; remove zeroes it).
  void apply(const BlockAction& action);

  /// Sets block i to `value` through the same incremental path.
  void set_block(std::size_t i, const Mat2c& value);

  struct StepOutcome {
    std::optional<BlockAction> action;
    std::vector<std::size_t> pruned;
    // Adaptive mode only: set when no block action helped and beta alone was
    // re-estimated; holds |new - old| / old of the noise variance.
    std::optional<double> noise_change;
  };

  /// One iteration: propose, apply, prune, and (adaptive mode) refresh beta.
  /// In adaptive mode a step with no improving block action still updates beta.
  StepOutcome step();

  /// Iterates step() until the normalised gamma change drops to eps_min, no
  /// action improves the cost, or max_iter is reached. Beta-only steps count
  /// as iterations and continue while the noise variance moves by more than
  /// eps_min relative.
  SolverResult solve();

  /// L log|C| + tr(Y^H C^{-1} Y), from a Cholesky factor of C assembled over
  /// the active blocks.
  double marginal_cost() const;

  PosteriorState posterior() const;
  BlockHyperparameters hyperparameters() const;

  /// Replaces beta^{-1} and rebuilds the maintained quantities.
  void set_noise_variance(double value);

  /// Rebuilds C^{-1}, S and Qt densely from the active set.
  void refresh();

  /// Largest absolute entry difference between the maintained C^{-1} and a
  /// fresh dense inverse.
  double inverse_drift() const;

 private:
  enum class StopReason { no_action, small_change, max_iter };
  StopReason descend(SolverReport& report);
  bool escape(SolverReport& report);
  void rank2_update(std::size_t i, const Mat2c& delta);
  std::vector<std::size_t> prune();
  void update_noise();
  Mat2c scatter(std::size_t i) const;  // Q_i Q_i^H (against C_{-i})
  struct LeaveOneOut {
    Mat2c U;    // V_i^H C_{-i}^{-1} V_i
    CMatrix Q;  // V_i^H C_{-i}^{-1} Y
  };
  LeaveOneOut leave_one_out(std::size_t i) const;
  CMatrix dense_covariance() const;

  CMatrix Y_;
  const BlockDictionary* dict_;
  SolverConfig cfg_;
  double noise_var_ = 1.0;
  double y_energy_ = 0.0;
  double cost_ = 0.0;  // tracked through accepted deltas

  CMatrix Cinv_;
  std::vector<Mat2c> S_;
  CMatrix Qt_;  // 2N x L

  std::vector<Mat2c> L_;
  std::vector<double> gamma_;
  std::vector<Mat2c> G_;
  std::vector<cdouble> r_;
  std::vector<bool> active_;
  std::vector<std::size_t> active_set_;
};

/// Convenience wrapper: construct, solve, return.
SolverResult solve(const CMatrix& Y, const BlockDictionary& dict, const SolverConfig& cfg);

/// V^H W for the structured dictionary, computed from the M x N half as
/// rows 2n = a_n^T W_top and rows 2n+1 = a_n^H W_bottom.
CMatrix block_adjoint_times(const BlockDictionary& dict, const CMatrix& W);

}  // namespace ncbsbl
