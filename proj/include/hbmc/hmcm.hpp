#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbmc/clustering.hpp"
#include "hbmc/dense_matrix.hpp"
#include "hbmc/ingest.hpp"
#include "hbmc/smcm.hpp"
#include "hbmc/vi.hpp"

namespace hbmc {

struct HmcmConfig {
  std::size_t K = 4;
  double sigma_hp = 1.0;
  double lambda_like = 0.15;
  /// Scale (mean) of the exponential prior on the class deviation scales.
  double eta = 1.0;
  FitConfig fit;

  void validate() const;
};

/// Class vectors A (solute classes) and B (solvent classes), their deviation
/// scales, and the component vectors U, V.
struct HierarchicalParams {
  DenseMatrix A;
  DenseMatrix B;
  std::vector<double> sigma_r;
  std::vector<double> sigma_s;
  DenseMatrix U;
  DenseMatrix V;
  std::vector<std::string> solutes;
  std::vector<std::string> solvents;
  std::vector<std::size_t> solute_labels;
  std::vector<std::size_t> solvent_labels;

  std::size_t K() const noexcept { return U.cols(); }
};

/// Blocks A, B, U, V (unconstrained) then sigma_r, sigma_s (positive).
ParameterSpace hmcm_space(std::size_t n_solute_classes, std::size_t n_solvent_classes,
                          std::size_t n_solutes, std::size_t n_solvents, std::size_t K);

/// Log-density on the constrained space: sigma entries are the scales themselves.
double hmcm_log_density(std::span<const double> x, const PropertyMatrix& data,
                        const ClassAssignment& solute_classes,
                        const ClassAssignment& solvent_classes, const HmcmConfig& config,
                        std::span<double> grad);

/// Log-joint on the unconstrained space (log sigma), log-Jacobian included.
double log_joint_hmcm(std::span<const double> theta, const PropertyMatrix& data,
                      const ClassAssignment& solute_classes, const ClassAssignment& solvent_classes,
                      const HmcmConfig& config, std::span<double> grad);

LogJointValue log_joint_hmcm(std::span<const double> theta, const PropertyMatrix& data,
                             const ClassAssignment& solute_classes,
                             const ClassAssignment& solvent_classes, const HmcmConfig& config);

struct HmcmFit {
  HierarchicalParams params;
  FitResult vi;
};

HmcmFit fit_hmcm(const PropertyMatrix& data, const ClassAssignment& solute_classes,
                 const ClassAssignment& solvent_classes, const HmcmConfig& config);

/// u_i . v_j; class vectors play no part for known components.
double predict_hmcm(const HierarchicalParams& params, std::size_t i, std::size_t j);

/// Prediction for a solute absent from training: A_r stands in for its u.
double predict_cold_solute(const HierarchicalParams& params, std::size_t solute_class,
                           std::span<const double> solvent_factors);
/// Prediction for a solvent absent from training: B_s stands in for its v.
double predict_cold_solvent(const HierarchicalParams& params, std::size_t solvent_class,
                            std::span<const double> solute_factors);

nlohmann::json to_json(const HierarchicalParams& p);
HierarchicalParams params_from_json(const nlohmann::json& j);

}  // namespace hbmc
