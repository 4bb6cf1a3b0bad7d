#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbmc/dense_matrix.hpp"
#include "hbmc/ingest.hpp"
#include "hbmc/vi.hpp"

namespace hbmc {

struct SmcmConfig {
  std::size_t K = 4;
  double sigma_prior = 0.8;
  double lambda_like = 0.15;
  FitConfig fit;

  void validate() const;
};

/// Latent vectors: row i of U is u_i, row j of V is v_j.
struct LatentFactorSet {
  DenseMatrix U;
  DenseMatrix V;
  std::vector<std::string> solutes;
  std::vector<std::string> solvents;

  std::size_t K() const noexcept { return U.cols(); }
};

/// Parameter layout: all U rows, then all V rows.
ParameterSpace smcm_space(std::size_t n_solutes, std::size_t n_solvents, std::size_t K);

/// Sum of Cauchy(y | u_i . v_j, lambda) over observed cells, gradient added into `grad`.
/// Shared by both models.
double cauchy_likelihood(std::span<const double> U, std::span<const double> V, std::size_t K,
                         const PropertyMatrix& data, double lambda, std::span<double> grad_U,
                         std::span<double> grad_V);

/// Log-joint of the standard model and its gradient (written to `grad`).
double log_joint_smcm(std::span<const double> theta, const PropertyMatrix& data,
                      const SmcmConfig& config, std::span<double> grad);

struct LogJointValue {
  double value = 0.0;
  std::vector<double> gradient;
};

LogJointValue log_joint_smcm(std::span<const double> theta, const PropertyMatrix& data,
                             const SmcmConfig& config);

struct SmcmFit {
  LatentFactorSet factors;
  FitResult vi;
};

SmcmFit fit_smcm(const PropertyMatrix& data, const SmcmConfig& config);

/// Reshapes the variational mean into factors.
LatentFactorSet factors_from_theta(std::span<const double> theta, const PropertyMatrix& data,
                                   std::size_t K);

double predict(const LatentFactorSet& factors, std::size_t i, std::size_t j);

/// Every cell filled with the model prediction, observed cells included.
DenseMatrix complete_matrix(const LatentFactorSet& factors, std::size_t workers = 1);

/// Alternative estimator: average of u_i . v_j over `n_samples` posterior draws.
DenseMatrix complete_matrix_sampled(const VariationalPosterior& posterior, std::size_t n_solutes,
                                    std::size_t n_solvents, std::size_t K, std::size_t n_samples,
                                    std::uint64_t seed);

nlohmann::json to_json(const LatentFactorSet& f);
LatentFactorSet factors_from_json(const nlohmann::json& j);

nlohmann::json dense_to_json(const DenseMatrix& m);
DenseMatrix dense_from_json(const nlohmann::json& j);

}  // namespace hbmc
