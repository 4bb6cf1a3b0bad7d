#include "hbmc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hbmc/errors.hpp"
#include "hbmc/hmcm.hpp"
#include "hbmc/log.hpp"
#include "hbmc/parallel.hpp"
#include "hbmc/pipeline.hpp"
#include "hbmc/smcm.hpp"

namespace hbmc {

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Metrics metrics(std::span<const double> deltas) {
  if (deltas.empty()) throw contract_error("metrics need at least one residual");
  const std::size_t n = deltas.size();
  const double dn = static_cast<double>(n);
  std::vector<double> abs_err(n);
  std::vector<double> sq_err(n);
  for (std::size_t k = 0; k < n; ++k) {
    abs_err[k] = std::abs(deltas[k]);
    sq_err[k] = deltas[k] * deltas[k];
  }
  Metrics m;
  m.n = n;
  m.mae = pairwise_sum(abs_err) / dn;
  m.mse = pairwise_sum(sq_err) / dn;
  if (n > 1) {
    std::vector<double> dev(n);
    auto stderr_of = [&](const std::vector<double>& x, double mean) {
      for (std::size_t k = 0; k < n; ++k) dev[k] = (x[k] - mean) * (x[k] - mean);
      return std::sqrt(pairwise_sum(dev) / (dn - 1.0)) / std::sqrt(dn);
    };
    m.mae_stderr = stderr_of(abs_err, m.mae);
    m.mse_stderr = stderr_of(sq_err, m.mse);
  }
  return m;
}

EvalReport EvalReport::from_residuals(std::vector<Residual> residuals) {
  EvalReport r;
  r.residuals = std::move(residuals);
  r.n = r.residuals.size();
  if (r.n == 0) {
    r.mae = r.mse = r.mae_stderr = r.mse_stderr = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  std::vector<double> deltas;
  deltas.reserve(r.n);
  for (const auto& res : r.residuals) deltas.push_back(res.delta);
  const Metrics m = metrics(deltas);
  r.mae = m.mae;
  r.mse = m.mse;
  r.mae_stderr = m.mae_stderr;
  r.mse_stderr = m.mse_stderr;
  return r;
}

Histogram histogram(std::span<const double> deltas, double bin_width, double lo, double hi) {
  if (!(bin_width > 0.0) || !(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw contract_error("histogram needs bin_width > 0 and lo < hi");
  }
  std::size_t n_bins = 0;
  while (lo + static_cast<double>(n_bins) * bin_width < hi) ++n_bins;
  Histogram h;
  h.bins.resize(n_bins);
  for (std::size_t m = 0; m < n_bins; ++m) {
    h.bins[m].center = lo + (static_cast<double>(m) + 0.5) * bin_width;
  }
  for (double d : deltas) {
    if (!(d >= lo && d < hi)) {
      ++h.outside;
      continue;
    }
    auto m = static_cast<std::size_t>(std::floor((d - lo) / bin_width));
    // The quotient can round across an edge; the edges themselves decide.
    if (m >= n_bins) m = n_bins - 1;
    if (m > 0 && d < lo + static_cast<double>(m) * bin_width) --m;
    if (m + 1 < n_bins && d >= lo + static_cast<double>(m + 1) * bin_width) ++m;
    ++h.bins[m].count;
  }
  h.fraction_inside = deltas.empty() ? 0.0
                                     : static_cast<double>(deltas.size() - h.outside) /
                                           static_cast<double>(deltas.size());
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << std::setprecision(17) << "bin_center,count\n";
  for (const auto& b : h.bins) out << b.center << ',' << b.count << '\n';
  return out.str();
}

namespace {

std::string component_key(const char* prefix, std::size_t index, std::size_t count) {
  std::size_t width = 1;
  for (std::size_t c = count; c >= 10; c /= 10) ++width;
  std::ostringstream out;
  out << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << index;
  return out.str();
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t n_classes, std::mt19937_64& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % n_classes;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.I < 2 || spec.J < 2 || spec.K < 1) throw contract_error("synthetic corpus needs I, J >= 2, K >= 1");
  if (spec.n_solute_classes < 1 || spec.n_solute_classes > spec.I || spec.n_solvent_classes < 1 ||
      spec.n_solvent_classes > spec.J) {
    throw contract_error("class counts must lie in [1, I] and [1, J]");
  }
  if (!(spec.class_spread >= 0.0) || !(spec.noise_scale >= 0.0)) {
    throw contract_error("class_spread and noise_scale must be non-negative");
  }
  if (!(spec.occupancy > 0.0 && spec.occupancy <= 1.0)) throw contract_error("occupancy must lie in (0, 1]");
  if (spec.n_rare_solutes > spec.I || (spec.n_rare_solutes > 0 &&
                                       (spec.rare_observations < 2 || spec.rare_observations > spec.J))) {
    throw contract_error("rare solutes need 2 <= rare_observations <= J");
  }

  const std::size_t I = spec.I;
  const std::size_t J = spec.J;
  const std::size_t K = spec.K;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticCorpus c;
  c.solute_labels = balanced_labels(I, spec.n_solute_classes, rng);
  c.solvent_labels = balanced_labels(J, spec.n_solvent_classes, rng);
  c.A = DenseMatrix(spec.n_solute_classes, K);
  c.B = DenseMatrix(spec.n_solvent_classes, K);
  for (double& a : c.A.data()) a = normal(rng);
  for (double& b : c.B.data()) b = normal(rng);
  c.U = DenseMatrix(I, K);
  c.V = DenseMatrix(J, K);
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double jitter = normal(rng);
      c.U(i, k) = spec.class_spread == 0.0 ? c.A(c.solute_labels[i], k)
                                           : c.A(c.solute_labels[i], k) + spec.class_spread * jitter;
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      const double jitter = normal(rng);
      c.V(j, k) = spec.class_spread == 0.0 ? c.B(c.solvent_labels[j], k)
                                           : c.B(c.solvent_labels[j], k) + spec.class_spread * jitter;
    }
  }
  c.truth = DenseMatrix(I, J);
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < J; ++j) c.truth(i, j) = dot(c.U.row(i), c.V.row(j));
  }

  DenseMatrix noise(I, J);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& e : noise.data()) {
    const double u = unit(rng);
    if (spec.noise_scale > 0.0) e = spec.noise_scale * std::tan(std::numbers::pi * (u - 0.5));
  }

  std::bernoulli_distribution keep(spec.occupancy);
  bool valid = false;
  for (int attempt = 0; attempt < 100 && !valid; ++attempt) {
    c.observed.assign(I * J, 0);
    for (auto& cell : c.observed) cell = keep(rng) ? 1 : 0;
    for (std::size_t i = 0; i < spec.n_rare_solutes; ++i) {
      std::vector<std::size_t> cols(J);
      for (std::size_t j = 0; j < J; ++j) cols[j] = j;
      std::shuffle(cols.begin(), cols.end(), rng);
      for (std::size_t j = 0; j < J; ++j) c.observed[i * J + j] = 0;
      for (std::size_t n = 0; n < spec.rare_observations; ++n) c.observed[i * J + cols[n]] = 1;
    }
    valid = true;
    for (std::size_t i = 0; i < I && valid; ++i) {
      std::size_t count = 0;
      for (std::size_t j = 0; j < J; ++j) count += c.observed[i * J + j];
      valid = count >= 2;
    }
    for (std::size_t j = 0; j < J && valid; ++j) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < I; ++i) count += c.observed[i * J + j];
      valid = count >= 2;
    }
  }
  if (!valid) {
    throw generation_error("no mask with >= 2 observations per component after 100 attempts");
  }

  for (std::size_t i = 0; i < I; ++i) c.solute_keys.push_back(component_key("S", i, I));
  for (std::size_t j = 0; j < J; ++j) c.solvent_keys.push_back(component_key("W", j, J));
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      if (!c.observed[i * J + j]) continue;
      c.records.push_back({c.solute_keys[i], c.solvent_keys[j], c.truth(i, j) + noise(i, j), true});
    }
  }
  return c;
}

FoldPredictor pipeline_predictor(const PipelineConfig& config) {
  PipelineConfig inner = config;
  inner.workers = 1;
  return [inner](const PropertyMatrix& train, std::size_t row, std::size_t col, std::uint64_t seed) {
    const PipelineResult r = fit_pipeline(train, inner, seed);
    return FoldPrediction{predict_hmcm(r.hmcm.params, row, col), predict(r.smcm.factors, row, col)};
  };
}

LooReport loo_run(const std::vector<ObservationRecord>& records, const PipelineConfig& config,
                  const std::optional<std::vector<std::size_t>>& subset, FoldPredictor predictor) {
  std::vector<std::size_t> folds;
  if (subset) {
    folds = *subset;
    for (std::size_t f : folds) {
      if (f >= records.size()) throw contract_error("fold index " + std::to_string(f) + " out of range");
    }
  } else {
    folds.resize(records.size());
    for (std::size_t f = 0; f < records.size(); ++f) folds[f] = f;
  }
  if (!predictor) predictor = pipeline_predictor(config);

  LooReport report;
  report.folds.resize(folds.size());
  parallel_for(folds.size(), config.workers, [&](std::size_t slot) {
    const std::size_t f = folds[slot];
    FoldRecord& out = report.folds[slot];
    const ObservationRecord& held = records[f];
    out.fold = f;
    out.solute = held.solute;
    out.solvent = held.solvent;
    out.y_exp = held.ln_gamma;
    try {
      std::vector<ObservationRecord> train;
      train.reserve(records.size() - 1);
      for (std::size_t n = 0; n < records.size(); ++n) {
        if (n != f) train.push_back(records[n]);
      }
      if (config.refilter_folds) train = filter_min_systems(train).kept;
      const PropertyMatrix matrix = build_matrix(train);
      const long row = matrix.solute_index(held.solute);
      const long col = matrix.solvent_index(held.solvent);
      if (row < 0 || col < 0) {
        out.status = FoldStatus::excluded;
        out.reason = row < 0 && col < 0 ? "solute and solvent dropped from training set"
                     : row < 0          ? "solute dropped from training set"
                                        : "solvent dropped from training set";
        log_info("fold " + std::to_string(f) + " excluded: " + out.reason);
        return;
      }
      const FoldPrediction p = predictor(matrix, static_cast<std::size_t>(row),
                                         static_cast<std::size_t>(col), derive_seed(config.base_seed, f));
      out.hmcm_pred = p.hmcm;
      out.smcm_pred = p.smcm;
      out.status = FoldStatus::ok;
    } catch (const std::exception& ex) {
      out.status = FoldStatus::failed;
      out.reason = ex.what();
      log_warn("fold " + std::to_string(f) + " failed: " + out.reason);
    }
  });

  std::vector<Residual> hmcm;
  std::vector<Residual> smcm;
  for (const auto& fold : report.folds) {
    switch (fold.status) {
      case FoldStatus::ok:
        hmcm.push_back({fold.solute, fold.solvent, fold.y_exp, fold.hmcm_pred, fold.y_exp - fold.hmcm_pred});
        smcm.push_back({fold.solute, fold.solvent, fold.y_exp, fold.smcm_pred, fold.y_exp - fold.smcm_pred});
        break;
      case FoldStatus::excluded:
        report.excluded.push_back(fold.fold);
        break;
      case FoldStatus::failed:
        report.failed.push_back(fold.fold);
        break;
    }
  }
  report.hmcm = EvalReport::from_residuals(std::move(hmcm));
  report.smcm = EvalReport::from_residuals(std::move(smcm));
  return report;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

const char* status_name(FoldStatus s) {
  switch (s) {
    case FoldStatus::ok:
      return "ok";
    case FoldStatus::excluded:
      return "excluded";
    case FoldStatus::failed:
      return "failed";
  }
  return "unknown";
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json residuals = nlohmann::json::array();
  for (const auto& r : report.residuals) {
    residuals.push_back({{"solute", r.solute},
                         {"solvent", r.solvent},
                         {"y_exp", r.y_exp},
                         {"y_pred", r.y_pred},
                         {"delta", r.delta}});
  }
  return {{"n", report.n},
          {"mae", number_or_null(report.mae)},
          {"mse", number_or_null(report.mse)},
          {"mae_stderr", number_or_null(report.mae_stderr)},
          {"mse_stderr", number_or_null(report.mse_stderr)},
          {"residuals", std::move(residuals)}};
}

nlohmann::json to_json(const LooReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json j = {{"fold", f.fold},       {"solute", f.solute}, {"solvent", f.solvent},
                        {"y_exp", f.y_exp},     {"status", status_name(f.status)}};
    if (f.status == FoldStatus::ok) {
      j["hmcm_pred"] = f.hmcm_pred;
      j["smcm_pred"] = f.smcm_pred;
    } else {
      j["reason"] = f.reason;
    }
    folds.push_back(std::move(j));
  }
  return {{"hmcm", to_json(report.hmcm)},
          {"smcm", to_json(report.smcm)},
          {"excluded_folds", report.excluded},
          {"failed_folds", report.failed},
          {"folds", std::move(folds)}};
}

}  // namespace hbmc
