#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hbmc {

enum class Constraint { unconstrained, positive };

struct ParameterBlock {
  std::string name;
  std::size_t size = 0;
  Constraint constraint = Constraint::unconstrained;
};

/// Ordered list of named parameter blocks laid out contiguously.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  explicit ParameterSpace(std::vector<ParameterBlock> blocks);

  const std::vector<ParameterBlock>& blocks() const noexcept { return blocks_; }
  std::size_t total_dim() const noexcept { return total_dim_; }
  std::size_t offset(std::size_t block) const { return offsets_.at(block); }
  std::size_t offset(const std::string& name) const;

  /// Name of the block containing scalar `index`.
  const std::string& block_of(std::size_t index) const;

 private:
  std::vector<ParameterBlock> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
};

/// Log-density over the constrained parameter vector. Must overwrite every
/// element of `grad` with the gradient and return the log-density.
using LogDensity = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Evaluates the target at unconstrained `z`: positive blocks are mapped
/// through exp(), the log-Jacobian is added and the gradient chain-ruled back
/// to z. `grad` must have total_dim elements.
double unconstrained_log_joint(const LogDensity& target, const ParameterSpace& space,
                               std::span<const double> z, std::span<double> grad);

/// Mean-field Gaussian on the unconstrained space: theta_d ~ N(mu_d, exp(omega_d)^2).
struct VariationalPosterior {
  std::vector<double> mu;
  std::vector<double> omega;

  bool operator==(const VariationalPosterior&) const = default;
};

struct FitConfig {
  std::uint64_t seed = 0;
  std::size_t max_iters = 20000;
  std::size_t mc_samples = 8;
  double learning_rate = 0.05;
  /// Step size is multiplied by this factor every 1000 iterations.
  double lr_decay = 1.0;
  std::size_t convergence_window = 10;
  double convergence_tol = 1e-3;
  std::size_t elbo_check_every = 100;
  std::size_t elbo_eval_samples = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws contract_error naming the first invalid field.
  void validate() const;
};

struct ElboPoint {
  std::size_t iteration = 0;
  double elbo = 0.0;
};

struct FitResult {
  VariationalPosterior posterior;
  std::vector<ElboPoint> elbo_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Gaussian entropy sum(omega) + dim/2 (1 + log 2 pi).
double gaussian_entropy(std::span<const double> omega);

/// Monte-Carlo ELBO estimate. The same seed draws the same standard-normal
/// noise as grad_estimate, so the two are consistent under finite differences.
double elbo(const LogDensity& target, const ParameterSpace& space,
            const VariationalPosterior& posterior, std::size_t n_samples, std::uint64_t seed);

/// Reparameterization gradient of elbo(). Layout: d/dmu (total_dim) then d/domega.
std::vector<double> grad_estimate(const LogDensity& target, const ParameterSpace& space,
                                  const VariationalPosterior& posterior, std::size_t n_samples,
                                  std::uint64_t seed);

/// Stochastic gradient ascent on the ELBO with Adam. Deterministic given
/// config.seed. Throws numerical_error on a non-finite log-joint or gradient.
FitResult fit(const LogDensity& target, const ParameterSpace& space, const FitConfig& config);

/// Mixes a base seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace hbmc
