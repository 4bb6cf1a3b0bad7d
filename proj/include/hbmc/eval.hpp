#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbmc/config.hpp"
#include "hbmc/dense_matrix.hpp"
#include "hbmc/ingest.hpp"

namespace hbmc {

struct Residual {
  std::string solute;
  std::string solvent;
  double y_exp = 0.0;
  double y_pred = 0.0;
  double delta = 0.0;  // y_exp - y_pred
};

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double mae_stderr = 0.0;
  double mse_stderr = 0.0;
  std::size_t n = 0;
};

/// Mean absolute / squared error and the standard errors of those means
/// (sample standard deviation over sqrt(n); 0 when n == 1). Sums are
/// pairwise, so the result does not depend on input order beyond rounding.
Metrics metrics(std::span<const double> deltas);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> values);

struct EvalReport {
  std::vector<Residual> residuals;
  double mae = 0.0;
  double mse = 0.0;
  double mae_stderr = 0.0;
  double mse_stderr = 0.0;
  std::size_t n = 0;

  /// Metrics are NaN when there are no residuals.
  static EvalReport from_residuals(std::vector<Residual> residuals);
};

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
};

struct Histogram {
  std::vector<HistogramBin> bins;
  std::size_t outside = 0;
  double fraction_inside = 0.0;
};

/// Half-open bins [lo + m w, lo + (m + 1) w) covering [lo, hi).
Histogram histogram(std::span<const double> deltas, double bin_width, double lo, double hi);

struct SyntheticSpec {
  std::size_t I = 30;
  std::size_t J = 30;
  std::size_t K = 4;
  std::size_t n_solute_classes = 4;
  std::size_t n_solvent_classes = 4;
  double class_spread = 0.2;
  double noise_scale = 0.05;
  double occupancy = 0.3;
  std::uint64_t seed = 0;
  /// The first `n_rare_solutes` solutes keep exactly `rare_observations` cells.
  std::size_t n_rare_solutes = 0;
  std::size_t rare_observations = 2;
};

struct SyntheticCorpus {
  std::vector<ObservationRecord> records;
  DenseMatrix truth;
  std::vector<std::size_t> solute_labels;
  std::vector<std::size_t> solvent_labels;
  DenseMatrix A;
  DenseMatrix B;
  DenseMatrix U;
  DenseMatrix V;
  /// Observed-cell mask, row-major I x J.
  std::vector<char> observed;
  std::vector<std::string> solute_keys;
  std::vector<std::string> solvent_keys;
};

/// Class vectors ~ N(0, 1)^K, component vectors ~ N(class vector, spread),
/// y = u.v + Cauchy(0, noise) on a random mask. Every component ends up with
/// at least two observations, else generation_error after 100 mask draws.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

enum class FoldStatus { ok, excluded, failed };

struct FoldRecord {
  std::size_t fold = 0;
  std::string solute;
  std::string solvent;
  double y_exp = 0.0;
  FoldStatus status = FoldStatus::ok;
  std::string reason;
  double hmcm_pred = 0.0;
  double smcm_pred = 0.0;
};

struct FoldPrediction {
  double hmcm = 0.0;
  double smcm = 0.0;
};

/// Predicts cell (row, col) of a training matrix that does not contain it.
using FoldPredictor = std::function<FoldPrediction(const PropertyMatrix& train, std::size_t row,
                                                   std::size_t col, std::uint64_t seed)>;

/// The full four-stage pipeline as a fold predictor.
FoldPredictor pipeline_predictor(const PipelineConfig& config);

struct LooReport {
  std::vector<FoldRecord> folds;
  EvalReport hmcm;
  EvalReport smcm;
  std::vector<std::size_t> excluded;
  std::vector<std::size_t> failed;
};

/// Leave-one-out over `records` (already preprocessed). Fold f withholds
/// records[f]; `subset` restricts which folds run. A fold whose held-out
/// solute or solvent does not survive re-filtering of the training set is
/// excluded with a reason; a fold that throws is recorded as failed.
/// Results are identical for every worker count.
LooReport loo_run(const std::vector<ObservationRecord>& records, const PipelineConfig& config,
                  const std::optional<std::vector<std::size_t>>& subset = std::nullopt,
                  FoldPredictor predictor = {});

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const LooReport& report);
std::string histogram_csv(const Histogram& h);

}  // namespace hbmc
