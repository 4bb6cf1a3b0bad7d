#include "hbmc/hmcm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hbmc/errors.hpp"
#include "hbmc/kernels.hpp"

namespace hbmc {

void HmcmConfig::validate() const {
  if (K < 1) throw contract_error("K must be >= 1");
  if (!(sigma_hp > 0.0)) throw contract_error("sigma_hp must be > 0");
  if (!(lambda_like > 0.0)) throw contract_error("lambda_like must be > 0");
  if (!(eta > 0.0)) throw contract_error("eta must be > 0");
  fit.validate();
}

ParameterSpace hmcm_space(std::size_t n_solute_classes, std::size_t n_solvent_classes,
                          std::size_t n_solutes, std::size_t n_solvents, std::size_t K) {
  return ParameterSpace({{"A", n_solute_classes * K, Constraint::unconstrained},
                         {"B", n_solvent_classes * K, Constraint::unconstrained},
                         {"U", n_solutes * K, Constraint::unconstrained},
                         {"V", n_solvents * K, Constraint::unconstrained},
                         {"sigma_r", n_solute_classes, Constraint::positive},
                         {"sigma_s", n_solvent_classes, Constraint::positive}});
}

namespace {

void check_classes(const ClassAssignment& classes, std::size_t n_components, const char* axis) {
  if (classes.labels.size() != n_components) {
    throw contract_error(std::string(axis) + " class assignment covers " +
                         std::to_string(classes.labels.size()) + " components, expected " +
                         std::to_string(n_components));
  }
  if (classes.n_classes == 0) throw contract_error(std::string(axis) + " assignment has no classes");
  for (std::size_t label : classes.labels) {
    if (label >= classes.n_classes) {
      throw contract_error(std::string(axis) + " class label " + std::to_string(label) +
                           " out of range");
    }
  }
}

// Normal(0, sd) hyperprior over a block.
double hyperprior(std::span<const double> x, double sd, std::span<double> grad) {
  const double norm = -std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  const double inv_var = 1.0 / (sd * sd);
  double total = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    total += norm - 0.5 * x[d] * x[d] * inv_var;
    grad[d] = -x[d] * inv_var;
  }
  return total;
}

// Cauchy(center_{label(n)}, scale_{label(n)}) prior on each component vector.
double class_prior(std::span<const double> comp, std::span<const double> centers,
                   std::span<const double> scales, const std::vector<std::size_t>& labels,
                   std::size_t K, std::span<double> g_comp, std::span<double> g_centers,
                   std::span<double> g_scales) {
  double total = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const std::size_t c = labels[n];
    const double s = scales[c];
    const double log_norm = -std::log(std::numbers::pi * s);
    for (std::size_t k = 0; k < K; ++k) {
      const double z = (comp[n * K + k] - centers[c * K + k]) / s;
      total += log_norm - std::log1p(z * z);
      const double w = 2.0 * z / (s * (1.0 + z * z));
      g_comp[n * K + k] = -w;
      g_centers[c * K + k] += w;
      g_scales[c] += -1.0 / s + w * z;
    }
  }
  return total;
}

double exponential_prior(std::span<const double> scales, double eta, std::span<double> grad) {
  double total = 0.0;
  for (std::size_t c = 0; c < scales.size(); ++c) {
    total += exponential_lpdf(scales[c], eta);
    grad[c] += -1.0 / eta;
  }
  return total;
}

}  // namespace

double hmcm_log_density(std::span<const double> x, const PropertyMatrix& data,
                        const ClassAssignment& solute_classes,
                        const ClassAssignment& solvent_classes, const HmcmConfig& config,
                        std::span<double> grad) {
  const std::size_t K = config.K;
  const std::size_t R = solute_classes.n_classes;
  const std::size_t S = solvent_classes.n_classes;
  const std::size_t I = data.n_solutes();
  const std::size_t J = data.n_solvents();
  check_classes(solute_classes, I, "solute");
  check_classes(solvent_classes, J, "solvent");
  const std::size_t dim = (R + S + I + J) * K + R + S;
  if (x.size() != dim || grad.size() != dim) {
    throw contract_error("hMCM parameter vector has length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(dim));
  }

  std::size_t off = 0;
  auto take = [&](std::size_t len) {
    const auto range = std::pair{x.subspan(off, len), grad.subspan(off, len)};
    off += len;
    return range;
  };
  const auto [A, gA] = take(R * K);
  const auto [B, gB] = take(S * K);
  const auto [U, gU] = take(I * K);
  const auto [V, gV] = take(J * K);
  const auto [sr, gsr] = take(R);
  const auto [ss, gss] = take(S);
  std::fill(gsr.begin(), gsr.end(), 0.0);
  std::fill(gss.begin(), gss.end(), 0.0);

  double total = hyperprior(A, config.sigma_hp, gA) + hyperprior(B, config.sigma_hp, gB);
  total += class_prior(U, A, sr, solute_classes.labels, K, gU, gA, gsr);
  total += class_prior(V, B, ss, solvent_classes.labels, K, gV, gB, gss);
  total += exponential_prior(sr, config.eta, gsr) + exponential_prior(ss, config.eta, gss);
  total += cauchy_likelihood(U, V, K, data, config.lambda_like, gU, gV);
  return total;
}

double log_joint_hmcm(std::span<const double> theta, const PropertyMatrix& data,
                      const ClassAssignment& solute_classes, const ClassAssignment& solvent_classes,
                      const HmcmConfig& config, std::span<double> grad) {
  const ParameterSpace space = hmcm_space(solute_classes.n_classes, solvent_classes.n_classes,
                                          data.n_solutes(), data.n_solvents(), config.K);
  LogDensity target = [&](std::span<const double> x, std::span<double> g) {
    return hmcm_log_density(x, data, solute_classes, solvent_classes, config, g);
  };
  return unconstrained_log_joint(target, space, theta, grad);
}

LogJointValue log_joint_hmcm(std::span<const double> theta, const PropertyMatrix& data,
                             const ClassAssignment& solute_classes,
                             const ClassAssignment& solvent_classes, const HmcmConfig& config) {
  LogJointValue out;
  out.gradient.resize(theta.size());
  out.value = log_joint_hmcm(theta, data, solute_classes, solvent_classes, config, out.gradient);
  return out;
}

HmcmFit fit_hmcm(const PropertyMatrix& data, const ClassAssignment& solute_classes,
                 const ClassAssignment& solvent_classes, const HmcmConfig& config) {
  config.validate();
  check_classes(solute_classes, data.n_solutes(), "solute");
  check_classes(solvent_classes, data.n_solvents(), "solvent");
  if (data.n_entries() == 0) throw contract_error("cannot fit hMCM on an empty matrix");

  const std::size_t K = config.K;
  const std::size_t R = solute_classes.n_classes;
  const std::size_t S = solvent_classes.n_classes;
  const std::size_t I = data.n_solutes();
  const std::size_t J = data.n_solvents();
  const ParameterSpace space = hmcm_space(R, S, I, J, K);
  LogDensity target = [&](std::span<const double> x, std::span<double> g) {
    return hmcm_log_density(x, data, solute_classes, solvent_classes, config, g);
  };

  HmcmFit out;
  out.vi = fit(target, space, config.fit);
  const auto& mu = out.vi.posterior.mu;
  auto& p = out.params;
  auto block = [&](const char* name, DenseMatrix& m, std::size_t rows) {
    m = DenseMatrix(rows, K);
    std::copy_n(mu.begin() + static_cast<std::ptrdiff_t>(space.offset(name)), rows * K,
                m.data().begin());
  };
  block("A", p.A, R);
  block("B", p.B, S);
  block("U", p.U, I);
  block("V", p.V, J);
  for (std::size_t r = 0; r < R; ++r) p.sigma_r.push_back(constrain(mu[space.offset("sigma_r") + r]).value);
  for (std::size_t s = 0; s < S; ++s) p.sigma_s.push_back(constrain(mu[space.offset("sigma_s") + s]).value);
  p.solutes = data.solutes();
  p.solvents = data.solvents();
  p.solute_labels = solute_classes.labels;
  p.solvent_labels = solvent_classes.labels;
  return out;
}

double predict_hmcm(const HierarchicalParams& params, std::size_t i, std::size_t j) {
  if (i >= params.U.rows() || j >= params.V.rows()) {
    throw contract_error("prediction index (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") out of range");
  }
  return dot(params.U.row(i), params.V.row(j));
}

double predict_cold_solute(const HierarchicalParams& params, std::size_t solute_class,
                           std::span<const double> solvent_factors) {
  if (solute_class >= params.A.rows()) throw contract_error("solute class out of range");
  if (solvent_factors.size() != params.K()) throw contract_error("solvent factor length mismatch");
  return dot(params.A.row(solute_class), solvent_factors);
}

double predict_cold_solvent(const HierarchicalParams& params, std::size_t solvent_class,
                            std::span<const double> solute_factors) {
  if (solvent_class >= params.B.rows()) throw contract_error("solvent class out of range");
  if (solute_factors.size() != params.K()) throw contract_error("solute factor length mismatch");
  return dot(params.B.row(solvent_class), solute_factors);
}

namespace {

nlohmann::json matrix_rows(const DenseMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

DenseMatrix matrix_rows(const nlohmann::json& rows, std::size_t K) {
  DenseMatrix m(rows.size(), K);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (row.size() != K) throw parse_error(0, "parameter row has wrong length");
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const HierarchicalParams& p) {
  return {{"K", p.K()},
          {"A", matrix_rows(p.A)},
          {"B", matrix_rows(p.B)},
          {"sigma_r", p.sigma_r},
          {"sigma_s", p.sigma_s},
          {"U", matrix_rows(p.U)},
          {"V", matrix_rows(p.V)},
          {"solutes", p.solutes},
          {"solvents", p.solvents},
          {"solute_labels", p.solute_labels},
          {"solvent_labels", p.solvent_labels}};
}

HierarchicalParams params_from_json(const nlohmann::json& j) {
  try {
    const auto K = j.at("K").get<std::size_t>();
    HierarchicalParams p;
    p.A = matrix_rows(j.at("A"), K);
    p.B = matrix_rows(j.at("B"), K);
    p.sigma_r = j.at("sigma_r").get<std::vector<double>>();
    p.sigma_s = j.at("sigma_s").get<std::vector<double>>();
    p.U = matrix_rows(j.at("U"), K);
    p.V = matrix_rows(j.at("V"), K);
    p.solutes = j.at("solutes").get<std::vector<std::string>>();
    p.solvents = j.at("solvents").get<std::vector<std::string>>();
    p.solute_labels = j.at("solute_labels").get<std::vector<std::size_t>>();
    p.solvent_labels = j.at("solvent_labels").get<std::vector<std::size_t>>();
    if (p.sigma_r.size() != p.A.rows() || p.sigma_s.size() != p.B.rows() ||
        p.solutes.size() != p.U.rows() || p.solvents.size() != p.V.rows() ||
        p.solute_labels.size() != p.U.rows() || p.solvent_labels.size() != p.V.rows()) {
      throw parse_error(0, "inconsistent block sizes in params file");
    }
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error(0, std::string("bad params file: ") + ex.what());
  }
}

}  // namespace hbmc
