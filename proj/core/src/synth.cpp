#include "ncbsbl/synth.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ncbsbl {

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::gaussian_real: return "gaussian_real";
    case SourceKind::bpsk: return "bpsk";
  }
  return "unknown";
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "gaussian_real") return SourceKind::gaussian_real;
  if (name == "bpsk") return SourceKind::bpsk;
  throw std::invalid_argument("unknown source kind '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  if (num_elements == 0) throw std::invalid_argument("scenario needs M >= 1");
  if (snapshots == 0) throw std::invalid_argument("scenario needs L >= 1");
  if (thetas_deg.empty()) throw std::invalid_argument("scenario needs K >= 1 sources");
  if (phis_rad.size() != thetas_deg.size()) {
    throw std::invalid_argument("scenario needs one NC phase per source");
  }
  if (std::isnan(snr_db) || snr_db == -kNoiseless) {
    throw std::invalid_argument("SNR must be finite or +inf (noiseless)");
  }
  for (std::size_t k = 0; k < thetas_deg.size(); ++k) {
    const double t = thetas_deg[k];
    if (!(t > grid.theta_min() && t < grid.theta_max())) {
      throw std::invalid_argument("source DOA " + std::to_string(t) +
                                  " lies outside the open grid range");
    }
    if (on_grid && !grid.index_of(t, 1e-9 * std::max(1.0, grid.step()))) {
      throw std::invalid_argument("source DOA " + std::to_string(t) +
                                  " is not on the grid (on_grid mode)");
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (thetas_deg[j] == t) throw std::invalid_argument("source DOAs must be distinct");
    }
    if (!std::isfinite(phis_rad[k])) throw std::invalid_argument("NC phases must be finite");
  }
}

SourceSignals generate_sources(const ScenarioConfig& cfg, Rng& rng) {
  const auto K = static_cast<Eigen::Index>(cfg.num_sources());
  const auto L = static_cast<Eigen::Index>(cfg.snapshots);
  SourceSignals out;
  out.real_symbols.resize(K, L);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = 0; l < L; ++l) {
      out.real_symbols(k, l) = cfg.source_kind == SourceKind::bpsk ? (coin(rng) ? 1.0 : -1.0)
                                                                   : gauss(rng);
    }
  }
  out.rotated.resize(K, L);
  for (Eigen::Index k = 0; k < K; ++k) {
    const cdouble rot = cfg.phis_rad[static_cast<std::size_t>(k)] == 0.0
                            ? cdouble{1.0, 0.0}
                            : std::polar(1.0, -cfg.phis_rad[static_cast<std::size_t>(k)]);
    out.rotated.row(k) = rot * out.real_symbols.row(k).cast<cdouble>();
  }
  return out;
}

CMatrix augment(const CMatrix& Z) {
  CMatrix Y(2 * Z.rows(), Z.cols());
  Y.topRows(Z.rows()) = Z.conjugate();
  Y.bottomRows(Z.rows()) = Z;
  return Y;
}

AugmentedObservation synthesize(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SourceSignals src = generate_sources(cfg, rng);

  const auto M = static_cast<Eigen::Index>(cfg.num_elements);
  const auto K = static_cast<Eigen::Index>(cfg.num_sources());
  CMatrix A(M, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    A.col(k) = steering_vector(cfg.thetas_deg[static_cast<std::size_t>(k)], cfg.num_elements);
  }
  AugmentedObservation obs;
  obs.Z = A * src.rotated;

  if (cfg.snr_db != kNoiseless) {
    const double signal_power = obs.Z.squaredNorm() / static_cast<double>(obs.Z.size());
    const double noise_var = signal_power / std::pow(10.0, cfg.snr_db / 10.0);
    const double sd = std::sqrt(noise_var / 2.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index l = 0; l < obs.Z.cols(); ++l) {
      for (Eigen::Index m = 0; m < M; ++m) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        obs.Z(m, l) += cdouble(sd * re, sd * im);
      }
    }
    obs.noise_variance = noise_var;
  }
  obs.Y = augment(obs.Z);
  obs.truth = GroundTruth{src.real_symbols, cfg.thetas_deg, cfg.phis_rad};
  return obs;
}

void write_observation(const AugmentedObservation& obs, const std::filesystem::path& prefix) {
  const std::filesystem::path y_path = prefix.string() + "_Y.csv";
  std::ofstream y(y_path);
  if (!y) throw std::runtime_error("cannot write " + y_path.string());
  const std::size_t K = obs.truth ? obs.truth->thetas_deg.size() : 0;
  y << "M,L,K\n" << obs.num_elements() << ',' << obs.snapshots() << ',' << K << '\n';
  y << std::setprecision(17);
  for (Eigen::Index r = 0; r < obs.Y.rows(); ++r) {
    for (Eigen::Index l = 0; l < obs.Y.cols(); ++l) {
      if (l) y << ',';
      y << obs.Y(r, l).real() << ',' << obs.Y(r, l).imag();
    }
    y << '\n';
  }
  if (!y) throw std::runtime_error("failed writing " + y_path.string());

  if (!obs.truth) return;
  const std::filesystem::path t_path = prefix.string() + "_truth.csv";
  std::ofstream t(t_path);
  if (!t) throw std::runtime_error("cannot write " + t_path.string());
  t << "k,theta_deg,phi_rad";
  for (std::size_t l = 0; l < obs.snapshots(); ++l) t << ",s_" << (l + 1);
  t << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < K; ++k) {
    t << (k + 1) << ',' << obs.truth->thetas_deg[k] << ',' << obs.truth->phis_rad[k];
    for (Eigen::Index l = 0; l < obs.truth->real_symbols.cols(); ++l) {
      t << ',' << obs.truth->real_symbols(static_cast<Eigen::Index>(k), l);
    }
    t << '\n';
  }
}

namespace {

std::vector<double> split_numbers(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

}  // namespace

AugmentedObservation read_observation(const std::filesystem::path& y_file) {
  std::ifstream in(y_file);
  if (!in) throw std::runtime_error("cannot read " + y_file.string());
  std::string line;
  std::getline(in, line);
  if (line != "M,L,K") throw std::runtime_error("unexpected header in " + y_file.string());
  std::getline(in, line);
  const auto dims = split_numbers(line);
  if (dims.size() != 3) throw std::runtime_error("malformed dimension line");
  const auto M = static_cast<Eigen::Index>(dims[0]);
  const auto L = static_cast<Eigen::Index>(dims[1]);
  AugmentedObservation obs;
  obs.Y.resize(2 * M, L);
  for (Eigen::Index r = 0; r < 2 * M; ++r) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated observation file");
    const auto vals = split_numbers(line);
    if (vals.size() != static_cast<std::size_t>(2 * L)) throw std::runtime_error("bad row width");
    for (Eigen::Index l = 0; l < L; ++l) {
      obs.Y(r, l) = cdouble(vals[static_cast<std::size_t>(2 * l)],
                            vals[static_cast<std::size_t>(2 * l + 1)]);
    }
  }
  obs.Z = obs.Y.bottomRows(M);
  return obs;
}

}  // namespace ncbsbl
