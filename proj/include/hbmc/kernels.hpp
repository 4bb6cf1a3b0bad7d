#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace hbmc {

// Scalar log-densities. Callers guarantee scale > 0; the checked entry points
// are log_pdf / log_pdf_grad below.

inline double normal_lpdf(double x, double loc, double scale) {
  const double z = (x - loc) / scale;
  return -std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
}

inline double cauchy_lpdf(double x, double loc, double scale) {
  const double z = (x - loc) / scale;
  return -std::log(std::numbers::pi * scale) - std::log1p(z * z);
}

/// Exponential with scale `eta` (mean eta). -inf for x < 0.
inline double exponential_lpdf(double x, double eta) {
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  return -std::log(eta) - x / eta;
}

/// Partial derivatives of a log-density with respect to the point, the
/// location and the scale. For the exponential, `dlocation` is 0 and
/// `dscale` is the derivative with respect to eta.
struct LogPdfGrad {
  double dx = 0.0;
  double dlocation = 0.0;
  double dscale = 0.0;
};

inline LogPdfGrad normal_lpdf_grad(double x, double loc, double scale) {
  const double diff = x - loc;
  const double inv_var = 1.0 / (scale * scale);
  return {-diff * inv_var, diff * inv_var, -1.0 / scale + diff * diff * inv_var / scale};
}

inline LogPdfGrad cauchy_lpdf_grad(double x, double loc, double scale) {
  const double z = (x - loc) / scale;
  const double w = 2.0 * z / (scale * (1.0 + z * z));
  return {-w, w, -1.0 / scale + w * z};
}

inline LogPdfGrad exponential_lpdf_grad(double x, double eta) {
  if (x < 0.0) return {};
  return {-1.0 / eta, 0.0, -1.0 / eta + x / (eta * eta)};
}

enum class DistributionKind { normal, cauchy, exponential };

/// A univariate density with its parameters. The exponential is
/// parameterized by its scale eta (mean = eta), not its rate.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::normal;
  double location = 0.0;
  double scale = 1.0;

  static DistributionSpec normal(double location, double scale) {
    return {DistributionKind::normal, location, scale};
  }
  static DistributionSpec cauchy(double location, double scale) {
    return {DistributionKind::cauchy, location, scale};
  }
  static DistributionSpec exponential(double eta) { return {DistributionKind::exponential, 0.0, eta}; }
};

/// Throws std::domain_error if the scale is not strictly positive.
double log_pdf(const DistributionSpec& spec, double x);
LogPdfGrad log_pdf_grad(const DistributionSpec& spec, double x);

/// log transform for positive parameters.
double unconstrain(double positive_value);

struct Constrained {
  double value;
  double log_jacobian;
};

/// exp transform; log_jacobian = log |d value / d z| = z.
inline Constrained constrain(double z) { return {std::exp(z), z}; }

}  // namespace hbmc
