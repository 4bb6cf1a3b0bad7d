#include "hbmc/kernels.hpp"

#include <stdexcept>
#include <string>

namespace hbmc {

namespace {

void check_scale(const DistributionSpec& spec) {
  if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) {
    throw std::domain_error("distribution scale must be positive and finite, got " +
                            std::to_string(spec.scale));
  }
}

}  // namespace

double log_pdf(const DistributionSpec& spec, double x) {
  check_scale(spec);
  switch (spec.kind) {
    case DistributionKind::normal:
      return normal_lpdf(x, spec.location, spec.scale);
    case DistributionKind::cauchy:
      return cauchy_lpdf(x, spec.location, spec.scale);
    case DistributionKind::exponential:
      return exponential_lpdf(x, spec.scale);
  }
  throw std::logic_error("unknown distribution kind");
}

LogPdfGrad log_pdf_grad(const DistributionSpec& spec, double x) {
  check_scale(spec);
  switch (spec.kind) {
    case DistributionKind::normal:
      return normal_lpdf_grad(x, spec.location, spec.scale);
    case DistributionKind::cauchy:
      return cauchy_lpdf_grad(x, spec.location, spec.scale);
    case DistributionKind::exponential:
      return exponential_lpdf_grad(x, spec.scale);
  }
  throw std::logic_error("unknown distribution kind");
}

double unconstrain(double positive_value) {
  if (!(positive_value > 0.0)) {
    throw std::domain_error("unconstrain needs a positive value, got " +
                            std::to_string(positive_value));
  }
  return std::log(positive_value);
}

}  // namespace hbmc
