#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hbmc/errors.hpp"
#include "hbmc/smcm.hpp"
#include "oracles.hpp"

using namespace hbmc;

namespace {

PropertyMatrix small_instance() {
  // 3 x 3 with six observed cells.
  return PropertyMatrix({"a", "b", "c"}, {"x", "y", "z"},
                        {{0, 0, 0.4}, {0, 2, -1.1}, {1, 1, 2.3}, {1, 2, 0.7}, {2, 0, -0.2}, {2, 1, 1.5}});
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

LatentFactorSet factors(std::size_t I, std::size_t J, std::size_t K, std::uint64_t seed) {
  LatentFactorSet f{DenseMatrix(I, K), DenseMatrix(J, K), {}, {}};
  const auto u = random_vector(I * K, seed);
  const auto v = random_vector(J * K, seed + 1);
  std::copy(u.begin(), u.end(), f.U.data().begin());
  std::copy(v.begin(), v.end(), f.V.data().begin());
  for (std::size_t i = 0; i < I; ++i) f.solutes.push_back("s" + std::to_string(i));
  for (std::size_t j = 0; j < J; ++j) f.solvents.push_back("w" + std::to_string(j));
  return f;
}

}  // namespace

TEST_SUITE("smcm") {

TEST_CASE("zero parameters, no observations: sum of prior modes") {
  const PropertyMatrix empty({"a", "b"}, {"x", "y", "z"}, {});
  SmcmConfig c;
  c.K = 3;
  const std::vector<double> theta((2 + 3) * 3, 0.0);
  CHECK(log_joint_smcm(theta, empty, c).value ==
        doctest::Approx(15 * oracle::normal_logpdf(0, 0, 0.8)).epsilon(1e-14));
}

TEST_CASE("an exactly fitted observation contributes the Cauchy mode") {
  SmcmConfig c;
  c.K = 2;
  // u = (1, 2), v = (0.5, -1) -> u.v = -1.5
  const std::vector<double> theta{1, 2, 0.5, -1};
  const PropertyMatrix one({"a"}, {"x"}, {{0, 0, -1.5}});
  double prior = 0.0;
  for (double t : theta) prior += oracle::normal_logpdf(t, 0, 0.8);
  CHECK(log_joint_smcm(theta, one, c).value ==
        doctest::Approx(prior - std::log(0.15 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("log-joint gradient matches finite differences") {
  const auto data = small_instance();
  SmcmConfig c;
  c.K = 2;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto theta = random_vector(12, seed);
    const auto g = log_joint_smcm(theta, data, c).gradient;
    const auto fd = oracle::fd_gradient([&](std::span<const double> t) { return log_joint_smcm(t, data, c).value; },
                                        theta);
    CHECK(oracle::max_rel_err(g, fd) < 1e-6);
  }
}

TEST_CASE("predict is the dot product") {
  LatentFactorSet f{DenseMatrix(1, 4), DenseMatrix(1, 4), {"a"}, {"x"}};
  const double u[] = {1, 2, 0, -1}, v[] = {0.5, 0, 1, 2};
  std::copy(u, u + 4, f.U.data().begin());
  std::copy(v, v + 4, f.V.data().begin());
  CHECK(predict(f, 0, 0) == -1.5);
  CHECK_THROWS_AS(predict(f, 1, 0), contract_error);
  std::fill(f.U.data().begin(), f.U.data().end(), 0.0);
  CHECK(predict(f, 0, 0) == 0.0);
}

TEST_CASE("complete_matrix: outer product, zeros and definition") {
  LatentFactorSet f{DenseMatrix(2, 1), DenseMatrix(2, 1), {"a", "b"}, {"x", "y"}};
  f.U(0, 0) = 1;
  f.U(1, 0) = 2;
  f.V(0, 0) = 3;
  f.V(1, 0) = 4;
  const auto m = complete_matrix(f);
  CHECK(m(0, 0) == 3);
  CHECK(m(0, 1) == 4);
  CHECK(m(1, 0) == 6);
  CHECK(m(1, 1) == 8);

  const LatentFactorSet zero{DenseMatrix(3, 2), DenseMatrix(4, 2), {"a", "b", "c"}, {"w", "x", "y", "z"}};
  const auto zeros = complete_matrix(zero);
  for (double x : zeros.data()) CHECK(x == 0.0);

  const auto r = factors(13, 9, 4, 5);
  const auto one = complete_matrix(r, 1);
  CHECK(complete_matrix(r, 4) == one);
  for (std::size_t i = 0; i < 13; ++i) {
    for (std::size_t j = 0; j < 9; ++j) CHECK(one(i, j) == predict(r, i, j));
  }
}

TEST_CASE("sampled completion with a tight posterior approaches the means") {
  const auto r = factors(4, 3, 2, 9);
  VariationalPosterior q;
  q.mu.assign(r.U.data().begin(), r.U.data().end());
  q.mu.insert(q.mu.end(), r.V.data().begin(), r.V.data().end());
  q.omega.assign(q.mu.size(), -12.0);
  const auto s = complete_matrix_sampled(q, 4, 3, 2, 20, 3);
  const auto m = complete_matrix(r);
  for (std::size_t k = 0; k < s.data().size(); ++k) CHECK(std::abs(s.data()[k] - m.data()[k]) < 1e-4);
}

TEST_CASE("rank-1 fully observed matrix is recovered") {
  const double u[] = {1.2, -0.8, 0.5}, v[] = {0.9, 1.1, -0.7};
  std::vector<MatrixEntry> es;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) es.push_back({i, j, u[i] * v[j]});
  }
  const PropertyMatrix data({"a", "b", "c"}, {"x", "y", "z"}, es);
  SmcmConfig c;
  c.K = 1;
  c.fit.seed = 4;
  const auto f = fit_smcm(data, c);
  for (const auto& e : es) CHECK(std::abs(predict(f.factors, e.row, e.col) - e.value) < c.lambda_like);
}

TEST_CASE("all-zero data gives near-zero predictions") {
  std::vector<MatrixEntry> es;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) es.push_back({i, j, 0.0});
  }
  const PropertyMatrix data({"a", "b", "c", "d"}, {"w", "x", "y", "z"}, es);
  SmcmConfig c;
  c.fit.seed = 2;
  const auto f = fit_smcm(data, c);
  const auto completed = complete_matrix(f.factors);
  for (double x : completed.data()) CHECK(std::abs(x) < 0.05);
}

TEST_CASE("fit_smcm is deterministic under a fixed seed") {
  SmcmConfig c;
  c.K = 2;
  c.fit.seed = 17;
  const auto a = fit_smcm(small_instance(), c);
  const auto b = fit_smcm(small_instance(), c);
  CHECK(a.vi.posterior == b.vi.posterior);
  CHECK(a.factors.U == b.factors.U);
  CHECK(a.factors.V == b.factors.V);
}

TEST_CASE("config validation") {
  SmcmConfig c;
  c.K = 0;
  CHECK_THROWS_AS(c.validate(), contract_error);
  c = SmcmConfig{};
  c.lambda_like = -1;
  CHECK_THROWS_AS(fit_smcm(small_instance(), c), contract_error);
}

TEST_CASE("factor and dense JSON round trip") {
  const auto f = factors(5, 4, 3, 1);
  const auto g = factors_from_json(nlohmann::json::parse(to_json(f).dump()));
  CHECK(g.U == f.U);
  CHECK(g.V == f.V);
  CHECK(g.solutes == f.solutes);
  const auto m = complete_matrix(f);
  CHECK(dense_from_json(nlohmann::json::parse(dense_to_json(m).dump())) == m);
}

}  // TEST_SUITE
