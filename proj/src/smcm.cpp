#include "hbmc/smcm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hbmc/errors.hpp"
#include "hbmc/kernels.hpp"
#include "hbmc/parallel.hpp"

namespace hbmc {

void SmcmConfig::validate() const {
  if (K < 1) throw contract_error("K must be >= 1");
  if (!(sigma_prior > 0.0)) throw contract_error("sigma_prior must be > 0");
  if (!(lambda_like > 0.0)) throw contract_error("lambda_like must be > 0");
  fit.validate();
}

ParameterSpace smcm_space(std::size_t n_solutes, std::size_t n_solvents, std::size_t K) {
  return ParameterSpace({{"U", n_solutes * K, Constraint::unconstrained},
                         {"V", n_solvents * K, Constraint::unconstrained}});
}

double cauchy_likelihood(std::span<const double> U, std::span<const double> V, std::size_t K,
                         const PropertyMatrix& data, double lambda, std::span<double> grad_U,
                         std::span<double> grad_V) {
  const double log_norm = -std::log(std::numbers::pi * lambda);
  double total = 0.0;
  for (const auto& e : data.entries()) {
    const double* u = U.data() + e.row * K;
    const double* v = V.data() + e.col * K;
    double pred = 0.0;
    for (std::size_t k = 0; k < K; ++k) pred += u[k] * v[k];
    const double z = (e.value - pred) / lambda;
    total += log_norm - std::log1p(z * z);
    // d/dpred of -log(1 + z^2)
    const double w = 2.0 * z / (lambda * (1.0 + z * z));
    double* gu = grad_U.data() + e.row * K;
    double* gv = grad_V.data() + e.col * K;
    for (std::size_t k = 0; k < K; ++k) {
      gu[k] += w * v[k];
      gv[k] += w * u[k];
    }
  }
  return total;
}

double log_joint_smcm(std::span<const double> theta, const PropertyMatrix& data,
                      const SmcmConfig& config, std::span<double> grad) {
  const std::size_t K = config.K;
  const std::size_t nu = data.n_solutes() * K;
  const std::size_t nv = data.n_solvents() * K;
  if (theta.size() != nu + nv || grad.size() != nu + nv) {
    throw contract_error("sMCM parameter vector has length " + std::to_string(theta.size()) +
                         ", expected " + std::to_string(nu + nv));
  }
  const double sigma = config.sigma_prior;
  const double inv_var = 1.0 / (sigma * sigma);
  const double prior_norm = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);

  double total = 0.0;
  for (std::size_t d = 0; d < nu + nv; ++d) {
    total += prior_norm - 0.5 * theta[d] * theta[d] * inv_var;
    grad[d] = -theta[d] * inv_var;
  }
  total += cauchy_likelihood(theta.first(nu), theta.subspan(nu), K, data, config.lambda_like,
                             grad.first(nu), grad.subspan(nu));
  return total;
}

LogJointValue log_joint_smcm(std::span<const double> theta, const PropertyMatrix& data,
                             const SmcmConfig& config) {
  LogJointValue out;
  out.gradient.resize(theta.size());
  out.value = log_joint_smcm(theta, data, config, out.gradient);
  return out;
}

LatentFactorSet factors_from_theta(std::span<const double> theta, const PropertyMatrix& data,
                                   std::size_t K) {
  const std::size_t I = data.n_solutes();
  const std::size_t J = data.n_solvents();
  if (theta.size() < (I + J) * K) throw contract_error("parameter vector too short for factors");
  LatentFactorSet f{DenseMatrix(I, K), DenseMatrix(J, K), data.solutes(), data.solvents()};
  std::copy_n(theta.begin(), I * K, f.U.data().begin());
  std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(I * K), J * K, f.V.data().begin());
  return f;
}

SmcmFit fit_smcm(const PropertyMatrix& data, const SmcmConfig& config) {
  config.validate();
  if (data.n_entries() == 0) throw contract_error("cannot fit sMCM on an empty matrix");
  const ParameterSpace space = smcm_space(data.n_solutes(), data.n_solvents(), config.K);
  LogDensity target = [&](std::span<const double> x, std::span<double> g) {
    return log_joint_smcm(x, data, config, g);
  };
  SmcmFit out;
  out.vi = fit(target, space, config.fit);
  out.factors = factors_from_theta(out.vi.posterior.mu, data, config.K);
  return out;
}

double predict(const LatentFactorSet& factors, std::size_t i, std::size_t j) {
  if (i >= factors.U.rows() || j >= factors.V.rows()) {
    throw contract_error("prediction index (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") out of range");
  }
  return dot(factors.U.row(i), factors.V.row(j));
}

DenseMatrix complete_matrix(const LatentFactorSet& factors, std::size_t workers) {
  DenseMatrix out(factors.U.rows(), factors.V.rows());
  parallel_for(out.rows(), workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = dot(factors.U.row(i), factors.V.row(j));
  });
  return out;
}

DenseMatrix complete_matrix_sampled(const VariationalPosterior& posterior, std::size_t n_solutes,
                                    std::size_t n_solvents, std::size_t K, std::size_t n_samples,
                                    std::uint64_t seed) {
  const std::size_t nu = n_solutes * K;
  const std::size_t dim = nu + n_solvents * K;
  if (posterior.mu.size() < dim || n_samples == 0) {
    throw contract_error("posterior too short or no samples requested");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> theta(dim);
  DenseMatrix acc(n_solutes, n_solvents);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t d = 0; d < dim; ++d) {
      theta[d] = posterior.mu[d] + std::exp(posterior.omega[d]) * normal(rng);
    }
    for (std::size_t i = 0; i < n_solutes; ++i) {
      for (std::size_t j = 0; j < n_solvents; ++j) {
        acc(i, j) += dot(std::span<const double>(theta).subspan(i * K, K),
                         std::span<const double>(theta).subspan(nu + j * K, K));
      }
    }
  }
  for (double& v : acc.data()) v /= static_cast<double>(n_samples);
  return acc;
}

namespace {

nlohmann::json rows_to_json(const DenseMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

DenseMatrix rows_from_json(const nlohmann::json& rows, std::size_t expected_cols) {
  DenseMatrix m(rows.size(), expected_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (row.size() != expected_cols) throw parse_error(0, "ragged matrix row " + std::to_string(r));
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const LatentFactorSet& f) {
  return {{"K", f.K()},
          {"U", rows_to_json(f.U)},
          {"V", rows_to_json(f.V)},
          {"solutes", f.solutes},
          {"solvents", f.solvents}};
}

LatentFactorSet factors_from_json(const nlohmann::json& j) {
  try {
    const auto K = j.at("K").get<std::size_t>();
    LatentFactorSet f{rows_from_json(j.at("U"), K), rows_from_json(j.at("V"), K),
                      j.at("solutes").get<std::vector<std::string>>(),
                      j.at("solvents").get<std::vector<std::string>>()};
    if (f.solutes.size() != f.U.rows() || f.solvents.size() != f.V.rows()) {
      throw parse_error(0, "factor key lists do not match factor rows");
    }
    return f;
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error(0, std::string("bad factors file: ") + ex.what());
  }
}

nlohmann::json dense_to_json(const DenseMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", rows_to_json(m)}};
}

DenseMatrix dense_from_json(const nlohmann::json& j) {
  try {
    return rows_from_json(j.at("values"), j.at("cols").get<std::size_t>());
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error(0, std::string("bad dense matrix file: ") + ex.what());
  }
}

}  // namespace hbmc
