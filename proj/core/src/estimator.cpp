#include "ncbsbl/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ncbsbl {

Spectrum block_spectrum(const CMatrix& x_hat) {
  if (x_hat.rows() % 2 != 0) throw std::invalid_argument("block signal must have 2N rows");
  const Eigen::Index N = x_hat.rows() / 2;
  const double inv_l = x_hat.cols() > 0 ? 1.0 / static_cast<double>(x_hat.cols()) : 0.0;
  Spectrum s;
  s.values.resize(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) {
    s.values[static_cast<std::size_t>(n)] =
        inv_l * (x_hat.row(2 * n).cwiseAbs().sum() + x_hat.row(2 * n + 1).cwiseAbs().sum());
  }
  return s;
}

Spectrum row_spectrum(const CMatrix& x_hat) {
  const double inv_l = x_hat.cols() > 0 ? 1.0 / static_cast<double>(x_hat.cols()) : 0.0;
  Spectrum s;
  s.values.resize(static_cast<std::size_t>(x_hat.rows()));
  for (Eigen::Index n = 0; n < x_hat.rows(); ++n) {
    s.values[static_cast<std::size_t>(n)] = inv_l * x_hat.row(n).cwiseAbs().sum();
  }
  return s;
}

PeakSet find_peaks(const Spectrum& spec, std::size_t K) {
  PeakSet out;
  const auto& v = spec.values;
  const std::size_t n = v.size();
  if (n == 0 || *std::max_element(v.begin(), v.end()) <= 0.0) {
    out.failed = true;
    return out;
  }
  std::vector<std::size_t> peaks;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i) {
    const bool above_left = i == 0 || v[i] > v[i - 1];
    const bool above_right = i + 1 == n || v[i] > v[i + 1];
    (above_left && above_right ? peaks : others).push_back(i);
  }
  const auto by_value = [&v](std::size_t a, std::size_t b) {
    return v[a] != v[b] ? v[a] > v[b] : a < b;
  };
  std::stable_sort(peaks.begin(), peaks.end(), by_value);
  if (peaks.size() >= K) {
    out.indices.assign(peaks.begin(), peaks.begin() + static_cast<std::ptrdiff_t>(K));
  } else {
    out.padded = true;
    out.indices = peaks;
    std::stable_sort(others.begin(), others.end(), by_value);
    const std::size_t need = std::min(K - peaks.size(), others.size());
    out.indices.insert(out.indices.end(), others.begin(),
                       others.begin() + static_cast<std::ptrdiff_t>(need));
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

std::vector<std::optional<double>> estimate_phases(const CMatrix& x_hat,
                                                   std::span<const std::size_t> blocks) {
  std::vector<std::optional<double>> out;
  out.reserve(blocks.size());
  for (std::size_t b : blocks) {
    const auto row = x_hat.row(static_cast<Eigen::Index>(2 * b));
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index l = 0; l < row.size(); ++l) {
      const cdouble x = row[l];
      if (x == cdouble{}) continue;
      sum += 0.5 * std::arg(x * x);
      ++count;
    }
    out.push_back(count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt);
  }
  return out;
}

TrialEstimate EstimationResult::as_trial() const {
  return TrialEstimate{thetas_deg, phis_rad, peaks.failed};
}

EstimationResult estimate_block(const CMatrix& x_hat, const GridSpec& grid, std::size_t K) {
  EstimationResult r;
  r.spectrum = block_spectrum(x_hat);
  r.peaks = find_peaks(r.spectrum, K);
  for (std::size_t idx : r.peaks.indices) r.thetas_deg.push_back(grid.angle(idx));
  for (const auto& p : estimate_phases(x_hat, r.peaks.indices)) {
    r.phis_rad.push_back(p.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  return r;
}

EstimationResult estimate_scalar(const CMatrix& x_hat, const GridSpec& grid, std::size_t K) {
  EstimationResult r;
  r.spectrum = row_spectrum(x_hat);
  r.peaks = find_peaks(r.spectrum, K);
  for (std::size_t idx : r.peaks.indices) r.thetas_deg.push_back(grid.angle(idx));
  return r;
}

double wrap_phase_mod_pi(double delta) {
  double r = std::remainder(delta, kPi);
  if (r <= -kPi / 2.0) r += kPi;
  return r;
}

std::vector<std::size_t> pair_estimates(std::span<const double> estimates,
                                        std::span<const double> truth) {
  if (estimates.size() != truth.size()) {
    throw std::invalid_argument("estimate and truth counts differ");
  }
  std::vector<std::size_t> perm(truth.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) cost += std::abs(estimates[perm[k]] - truth[k]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

RmseResult pair_and_rmse(std::span<const TrialEstimate> trials, std::span<const double> thetas_deg,
                         std::span<const double> phis_rad, const MissPenalty& penalty) {
  if (trials.empty()) throw std::invalid_argument("RMSE needs at least one trial");
  const std::size_t K = thetas_deg.size();
  if (K == 0) throw std::invalid_argument("RMSE needs at least one source");

  bool has_phase = false;
  if (!phis_rad.empty()) {
    for (const auto& t : trials) has_phase = has_phase || (!t.failed && !t.phis_rad.empty());
  }

  RmseResult out;
  double sum_doa = 0.0;
  double sum_phase = 0.0;
  for (const auto& t : trials) {
    const bool usable = !t.failed && t.thetas_deg.size() == K;
    if (!usable) {
      ++out.failed;
      sum_doa += static_cast<double>(K) * penalty.doa_deg * penalty.doa_deg;
      sum_phase += static_cast<double>(K) * penalty.phase_rad * penalty.phase_rad;
      continue;
    }
    const auto match = pair_estimates(t.thetas_deg, thetas_deg);
    for (std::size_t k = 0; k < K; ++k) {
      const double d = t.thetas_deg[match[k]] - thetas_deg[k];
      sum_doa += d * d;
      if (!has_phase) continue;
      double e = penalty.phase_rad;
      if (t.phis_rad.size() == K && !std::isnan(t.phis_rad[match[k]])) {
        e = wrap_phase_mod_pi(t.phis_rad[match[k]] - phis_rad[k]);
      }
      sum_phase += e * e;
    }
  }
  const double denom = static_cast<double>(K * trials.size());
  out.doa_deg = std::sqrt(sum_doa / denom);
  out.phase_rad = has_phase ? std::sqrt(sum_phase / denom) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

void write_spectrum_csv(const Spectrum& spec, const GridSpec& grid,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "angle_deg,power\n";
  char buf[64];
  for (std::size_t n = 0; n < spec.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.6f,%.12g\n", grid.angle(n), spec.values[n]);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace ncbsbl
