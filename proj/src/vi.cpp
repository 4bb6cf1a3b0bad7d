#include "hbmc/vi.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>
#include <unordered_set>

#include "hbmc/errors.hpp"
#include "hbmc/kernels.hpp"

namespace hbmc {

ParameterSpace::ParameterSpace(std::vector<ParameterBlock> blocks) : blocks_(std::move(blocks)) {
  std::unordered_set<std::string> names;
  for (const auto& b : blocks_) {
    if (!names.insert(b.name).second) throw contract_error("duplicate parameter block '" + b.name + "'");
    offsets_.push_back(total_dim_);
    total_dim_ += b.size;
  }
}

std::size_t ParameterSpace::offset(const std::string& name) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].name == name) return offsets_[b];
  }
  throw contract_error("unknown parameter block '" + name + "'");
}

const std::string& ParameterSpace::block_of(std::size_t index) const {
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    if (index >= offsets_[b] && index < offsets_[b] + blocks_[b].size) return blocks_[b].name;
  }
  throw contract_error("parameter index out of range");
}

namespace {

bool has_positive_block(const ParameterSpace& space) {
  for (const auto& b : space.blocks()) {
    if (b.constraint == Constraint::positive) return true;
  }
  return false;
}

// `x` is scratch space of total_dim elements.
double transformed_log_joint(const LogDensity& target, const ParameterSpace& space,
                             std::span<const double> z, std::span<double> grad, std::span<double> x) {
  if (!has_positive_block(space)) return target(z, grad);
  std::copy(z.begin(), z.end(), x.begin());
  double log_jacobian = 0.0;
  for (std::size_t b = 0; b < space.blocks().size(); ++b) {
    if (space.blocks()[b].constraint != Constraint::positive) continue;
    const std::size_t off = space.offset(b);
    for (std::size_t d = off; d < off + space.blocks()[b].size; ++d) {
      const Constrained c = constrain(z[d]);
      x[d] = c.value;
      log_jacobian += c.log_jacobian;
    }
  }
  const double value = target(x, grad);
  for (std::size_t b = 0; b < space.blocks().size(); ++b) {
    if (space.blocks()[b].constraint != Constraint::positive) continue;
    const std::size_t off = space.offset(b);
    for (std::size_t d = off; d < off + space.blocks()[b].size; ++d) grad[d] = grad[d] * x[d] + 1.0;
  }
  return value + log_jacobian;
}

}  // namespace

double unconstrained_log_joint(const LogDensity& target, const ParameterSpace& space,
                               std::span<const double> z, std::span<double> grad) {
  if (z.size() != space.total_dim() || grad.size() != space.total_dim()) {
    throw contract_error("parameter vector length does not match the parameter space");
  }
  std::vector<double> x(z.size());
  return transformed_log_joint(target, space, z, grad, x);
}

void FitConfig::validate() const {
  if (max_iters == 0) throw contract_error("max_iters must be > 0");
  if (mc_samples == 0) throw contract_error("mc_samples must be >= 1");
  if (!(learning_rate > 0.0)) throw contract_error("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw contract_error("lr_decay must be in (0, 1]");
  if (convergence_window == 0) throw contract_error("convergence_window must be > 0");
  if (!(convergence_tol > 0.0)) throw contract_error("convergence_tol must be > 0");
  if (elbo_check_every == 0) throw contract_error("elbo_check_every must be > 0");
  if (elbo_eval_samples == 0) throw contract_error("elbo_eval_samples must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double gaussian_entropy(std::span<const double> omega) {
  double s = 0.0;
  for (double w : omega) s += w;
  return s + 0.5 * static_cast<double>(omega.size()) * (1.0 + std::log(2.0 * std::numbers::pi));
}

namespace {

void check_posterior(const ParameterSpace& space, const VariationalPosterior& q) {
  if (q.mu.size() != space.total_dim() || q.omega.size() != space.total_dim()) {
    throw contract_error("posterior dimension does not match the parameter space");
  }
}

std::string first_nonfinite_block(const ParameterSpace& space, std::span<const double> v,
                                  const char* fallback) {
  for (std::size_t d = 0; d < v.size(); ++d) {
    if (!std::isfinite(v[d])) return space.block_of(d);
  }
  return fallback;
}

// Draws theta = mu + exp(omega) * eps and evaluates the transformed log-joint.
class Sampler {
 public:
  Sampler(const LogDensity& target, const ParameterSpace& space)
      : target_(target),
        space_(space),
        theta_(space.total_dim()),
        grad_(space.total_dim()),
        scratch_(space.total_dim()) {}

  // `sd` holds exp(omega).
  double evaluate(std::span<const double> mu, std::span<const double> sd, std::span<const double> eps,
                  std::size_t iteration) {
    for (std::size_t d = 0; d < theta_.size(); ++d) theta_[d] = mu[d] + sd[d] * eps[d];
    const double value = transformed_log_joint(target_, space_, theta_, grad_, scratch_);
    if (!std::isfinite(value)) {
      throw numerical_error(iteration, first_nonfinite_block(space_, theta_, "log_joint"),
                            "non-finite log-joint");
    }
    for (std::size_t d = 0; d < grad_.size(); ++d) {
      if (!std::isfinite(grad_[d])) {
        throw numerical_error(iteration, space_.block_of(d), "non-finite gradient");
      }
    }
    return value;
  }

  std::span<const double> grad() const { return grad_; }

 private:
  const LogDensity& target_;
  const ParameterSpace& space_;
  std::vector<double> theta_;
  std::vector<double> grad_;
  std::vector<double> scratch_;
};

std::vector<double> exp_of(std::span<const double> omega) {
  std::vector<double> sd(omega.size());
  for (std::size_t d = 0; d < omega.size(); ++d) sd[d] = std::exp(omega[d]);
  return sd;
}

void draw_normals(std::mt19937_64& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& e : out) e = normal(rng);
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Adds the averaged reparameterization gradient of one batch of draws into
// grad_mu / grad_omega (entropy gradient excluded).
void accumulate_gradient(Sampler& sampler, const VariationalPosterior& q, std::span<const double> eps,
                         std::size_t n_samples, std::size_t iteration, std::span<double> grad_mu,
                         std::span<double> grad_omega) {
  const std::size_t dim = q.mu.size();
  const std::vector<double> sd = exp_of(q.omega);
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  std::fill(grad_mu.begin(), grad_mu.end(), 0.0);
  std::fill(grad_omega.begin(), grad_omega.end(), 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto e = eps.subspan(s * dim, dim);
    sampler.evaluate(q.mu, sd, e, iteration);
    const auto g = sampler.grad();
    for (std::size_t d = 0; d < dim; ++d) {
      grad_mu[d] += g[d];
      grad_omega[d] += g[d] * sd[d] * e[d];
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    grad_mu[d] *= inv_n;
    grad_omega[d] *= inv_n;
  }
}

}  // namespace

double elbo(const LogDensity& target, const ParameterSpace& space,
            const VariationalPosterior& posterior, std::size_t n_samples, std::uint64_t seed) {
  check_posterior(space, posterior);
  if (n_samples == 0) throw contract_error("elbo needs at least one sample");
  const std::size_t dim = space.total_dim();
  std::mt19937_64 rng(seed);
  std::vector<double> eps(n_samples * dim);
  draw_normals(rng, eps);
  Sampler sampler(target, space);
  const std::vector<double> sd = exp_of(posterior.omega);
  double sum = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    sum += sampler.evaluate(posterior.mu, sd, std::span<const double>(eps).subspan(s * dim, dim), 0);
  }
  return sum / static_cast<double>(n_samples) + gaussian_entropy(posterior.omega);
}

std::vector<double> grad_estimate(const LogDensity& target, const ParameterSpace& space,
                                  const VariationalPosterior& posterior, std::size_t n_samples,
                                  std::uint64_t seed) {
  check_posterior(space, posterior);
  if (n_samples == 0) throw contract_error("grad_estimate needs at least one sample");
  const std::size_t dim = space.total_dim();
  std::mt19937_64 rng(seed);
  std::vector<double> eps(n_samples * dim);
  draw_normals(rng, eps);
  Sampler sampler(target, space);
  std::vector<double> out(2 * dim);
  std::span<double> grad_mu(out.data(), dim);
  std::span<double> grad_omega(out.data() + dim, dim);
  accumulate_gradient(sampler, posterior, eps, n_samples, 0, grad_mu, grad_omega);
  for (double& g : grad_omega) g += 1.0;
  return out;
}

FitResult fit(const LogDensity& target, const ParameterSpace& space, const FitConfig& config) {
  config.validate();
  const std::size_t dim = space.total_dim();
  if (dim == 0) throw contract_error("cannot fit an empty parameter space");

  std::mt19937_64 rng(config.seed);
  FitResult result;
  auto& q = result.posterior;
  q.mu.resize(dim);
  {
    std::normal_distribution<double> init(0.0, 0.1);
    for (double& m : q.mu) m = init(rng);
  }
  q.omega.assign(dim, -1.0);

  std::vector<double> eps(config.mc_samples * dim);
  std::vector<double> grad(2 * dim);
  std::vector<double> m1(2 * dim, 0.0);
  std::vector<double> m2(2 * dim, 0.0);
  std::span<double> grad_mu(grad.data(), dim);
  std::span<double> grad_omega(grad.data() + dim, dim);
  Sampler sampler(target, space);
  std::vector<double> history;
  // Iterate sums per ELBO-check interval; the returned posterior is the mean
  // iterate over the last `convergence_window` intervals.
  std::deque<std::vector<double>> chunk_sums;
  std::vector<double> chunk(2 * dim, 0.0);
  std::size_t chunk_len = 0;
  auto averaged = [&] {
    std::vector<double> total(chunk);
    std::size_t count = chunk_len;
    for (const auto& c : chunk_sums) {
      for (std::size_t d = 0; d < 2 * dim; ++d) total[d] += c[d];
      count += config.elbo_check_every;
    }
    for (std::size_t d = 0; d < dim; ++d) {
      q.mu[d] = total[d] / static_cast<double>(count);
      q.omega[d] = total[dim + d] / static_cast<double>(count);
    }
  };

  double b1_pow = 1.0;
  double b2_pow = 1.0;
  double step = config.learning_rate;
  for (std::size_t t = 1; t <= config.max_iters; ++t) {
    draw_normals(rng, eps);
    accumulate_gradient(sampler, q, eps, config.mc_samples, t, grad_mu, grad_omega);
    for (double& g : grad_omega) g += 1.0;

    if (t > 1 && (t - 1) % 1000 == 0) step *= config.lr_decay;
    b1_pow *= config.beta1;
    b2_pow *= config.beta2;
    for (std::size_t d = 0; d < 2 * dim; ++d) {
      m1[d] = config.beta1 * m1[d] + (1.0 - config.beta1) * grad[d];
      m2[d] = config.beta2 * m2[d] + (1.0 - config.beta2) * grad[d] * grad[d];
      const double m_hat = m1[d] / (1.0 - b1_pow);
      const double v_hat = m2[d] / (1.0 - b2_pow);
      const double delta = step * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
      if (d < dim) {
        q.mu[d] += delta;
      } else {
        q.omega[d - dim] += delta;
      }
    }
    result.iterations = t;
    for (std::size_t d = 0; d < dim; ++d) {
      chunk[d] += q.mu[d];
      chunk[dim + d] += q.omega[d];
    }
    ++chunk_len;

    if (t % config.elbo_check_every == 0) {
      chunk_sums.push_back(chunk);
      if (chunk_sums.size() > config.convergence_window) chunk_sums.pop_front();
      std::fill(chunk.begin(), chunk.end(), 0.0);
      chunk_len = 0;
      const double value =
          elbo(target, space, q, config.elbo_eval_samples, derive_seed(config.seed, t));
      result.elbo_trace.push_back({t, value});
      history.push_back(value);
      const std::size_t w = config.convergence_window;
      if (history.size() >= 2 * w) {
        const double current = median({history.end() - static_cast<std::ptrdiff_t>(w), history.end()});
        const double previous = median({history.end() - static_cast<std::ptrdiff_t>(2 * w),
                                        history.end() - static_cast<std::ptrdiff_t>(w)});
        const double rel = std::abs(current - previous) / std::max(std::abs(current), 1e-300);
        if (rel < config.convergence_tol) {
          result.converged = true;
          break;
        }
      }
    }
  }
  averaged();
  return result;
}

}  // namespace hbmc
