#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>

#include "hbmc/hmcm.hpp"
#include "hbmc/smcm.hpp"

namespace hbmc {

struct ClusteringConfig {
  std::size_t n_solute_classes = 12;
  std::size_t n_solvent_classes = 17;
};

struct PipelineConfig {
  SmcmConfig smcm;
  ClusteringConfig clustering;
  HmcmConfig hmcm;
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
  /// 0: complete the matrix from variational means; otherwise average this
  /// many posterior draws of u_i . v_j.
  std::size_t prediction_samples = 0;
  /// Re-apply the minimum-systems filter to every leave-one-out training set.
  bool refilter_folds = true;
};

/// Parses the `key = value` config format. Missing keys keep their defaults;
/// unknown keys, type errors and range violations are all collected and
/// thrown together as a config_error.
///
/// Grammar, one entry per line:
///   line    := blank | comment | entry
///   comment := '#' anything
///   entry   := key ws* '=' ws* value ws* [comment]
///
/// Keys: seed, workers, k, sigma, lambda, sigma_hp, eta, n_solute_classes,
/// n_solvent_classes, prediction_samples, refilter_folds, max_iters,
/// mc_samples, learning_rate, lr_decay, convergence_window, convergence_tol,
/// elbo_check_every, elbo_eval_samples. `k`, `lambda` and the optimizer keys
/// apply to both models.
PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::string& path);

/// Canonical text form: every key, fixed order, round-trip precision.
std::string to_config_text(const PipelineConfig& config);

}  // namespace hbmc
