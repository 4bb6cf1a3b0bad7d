#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "hbmc/clustering.hpp"
#include "hbmc/errors.hpp"
#include "oracles.hpp"

using namespace hbmc;

namespace {

std::vector<Profile> random_profiles(std::size_t n, std::size_t dim, std::uint64_t seed, bool grid) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> cell(0, 3);
  std::vector<Profile> p(n, Profile(dim));
  for (auto& v : p) {
    for (double& x : v) x = grid ? cell(rng) : normal(rng);
  }
  return p;
}

std::set<std::set<std::size_t>> classes_as_sets(const ClassAssignment& c) {
  std::vector<std::set<std::size_t>> groups(c.n_classes);
  for (std::size_t i = 0; i < c.labels.size(); ++i) groups.at(c.labels[i]).insert(i);
  return {groups.begin(), groups.end()};
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("profiles") {
  DenseMatrix m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(1, 0) = 3;
  m(1, 1) = 4;
  CHECK(row_profiles(m) == std::vector<Profile>{{1, 2}, {3, 4}});
  CHECK(col_profiles(m) == std::vector<Profile>{{1, 3}, {2, 4}});
  DenseMatrix wide(1, 3, 7.0);
  CHECK(row_profiles(wide).size() == 1);
  CHECK(col_profiles(wide) == std::vector<Profile>{{7}, {7}, {7}});
}

TEST_CASE("three points on a line") {
  const auto t = hac_complete({{0}, {1}, {10}});
  REQUIRE(t.merges.size() == 2);
  CHECK(t.merges[0] == Merge{0, 1, 1.0, 2});
  CHECK(t.merges[1] == Merge{2, 3, 10.0, 3});
  CHECK(classes_as_sets(cut_tree(t, 2)) == std::set<std::set<std::size_t>>{{0, 1}, {2}});
  CHECK(sorted_order(t) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("identical points merge at height zero in id order") {
  const auto two = hac_complete({{2.5, 1}, {2.5, 1}});
  REQUIRE(two.merges.size() == 1);
  CHECK(two.merges[0].height == 0.0);

  const auto chain = hac_complete(std::vector<Profile>(5, Profile{1.0}));
  CHECK(chain.merges[0].left == 0);
  CHECK(chain.merges[0].right == 1);
  for (const auto& m : chain.merges) CHECK(m.height == 0.0);
  // Ties give (0,1) -> 5, (2,3) -> 6, (4,5) -> 7, (6,7) -> 8; the subtree
  // holding leaf 0 is drawn first at every merge.
  CHECK(chain.merges[1] == Merge{2, 3, 0.0, 2});
  CHECK(chain.merges[2] == Merge{4, 5, 0.0, 3});
  CHECK(sorted_order(chain) == std::vector<std::size_t>{0, 1, 4, 2, 3});
}

TEST_CASE("matches the brute-force reference") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 3 + seed % 25;
    const auto p = random_profiles(n, 1 + seed % 4, seed, seed % 3 == 0);
    const auto tree = hac_complete(p);
    validate_tree(tree);
    const auto ref = oracle::naive_complete_linkage(p);
    const auto parts = oracle::replay_partitions(n, tree.merges);
    REQUIRE(tree.merges.size() == ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t) {
      CHECK(tree.merges[t].height == doctest::Approx(ref[t].height).epsilon(1e-12));
      CHECK(parts[t] == ref[t].partition);
      if (t > 0) CHECK(tree.merges[t].height >= tree.merges[t - 1].height);
    }
  }
}

TEST_CASE("partitions do not depend on input order") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 12 + seed;
    const auto p = random_profiles(n, 3, 100 + seed, false);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(seed));
    std::vector<Profile> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = p[perm[i]];
    const auto a = hac_complete(p);
    const auto b = hac_complete(q);
    for (std::size_t k = 1; k <= n; ++k) {
      std::set<std::set<std::size_t>> mapped;
      for (const auto& cls : classes_as_sets(cut_tree(b, k))) {
        std::set<std::size_t> orig;
        for (std::size_t i : cls) orig.insert(perm[i]);
        mapped.insert(orig);
      }
      CHECK(mapped == classes_as_sets(cut_tree(a, k)));
    }
  }
}

TEST_CASE("cut partitions the leaves into exactly k classes") {
  const auto p = random_profiles(20, 2, 8, false);
  const auto t = hac_complete(p);
  for (std::size_t k = 1; k <= 20; ++k) {
    const auto c = cut_tree(t, k);
    CHECK(c.n_classes == k);
    REQUIRE(c.labels.size() == 20);
    const auto sets = classes_as_sets(c);
    CHECK(sets.size() == k);
    std::size_t covered = 0;
    for (const auto& s : sets) {
      CHECK_FALSE(s.empty());
      covered += s.size();
    }
    CHECK(covered == 20);
    // Labels are numbered by first appearance.
    std::size_t next = 0;
    for (std::size_t l : c.labels) {
      CHECK(l <= next);
      if (l == next) ++next;
    }
  }
  CHECK(cut_tree(t, 1).labels == std::vector<std::size_t>(20, 0));
  std::vector<std::size_t> own(20);
  std::iota(own.begin(), own.end(), 0);
  CHECK(cut_tree(t, 20).labels == own);
  CHECK_THROWS_AS(cut_tree(t, 0), contract_error);
  CHECK_THROWS_AS(cut_tree(t, 21), contract_error);
}

TEST_CASE("sorted order is a permutation keeping every subtree contiguous") {
  const auto p = random_profiles(25, 3, 31, false);
  const auto t = hac_complete(p);
  const auto order = sorted_order(t);
  std::vector<std::size_t> pos(25);
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  auto sorted = order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> ids(25);
  std::iota(ids.begin(), ids.end(), 0);
  CHECK(sorted == ids);
  for (const auto& part : oracle::replay_partitions(25, t.merges)) {
    for (const auto& cls : part) {
      std::size_t lo = 25, hi = 0;
      for (std::size_t leaf : cls) {
        lo = std::min(lo, pos[leaf]);
        hi = std::max(hi, pos[leaf]);
      }
      CHECK(hi - lo + 1 == cls.size());
    }
  }
}

TEST_CASE("worker count does not change the tree") {
  const auto p = random_profiles(40, 5, 3, false);
  CHECK(hac_complete(p, 1) == hac_complete(p, 4));
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(hac_complete({{1.0}}), contract_error);
  CHECK_THROWS_AS(hac_complete({{1.0}, {std::nan("")}}), contract_error);
  CHECK_THROWS_AS(hac_complete({{1.0}, {1.0, 2.0}}), contract_error);
  LinkageTree bad{3, {{0, 1, 2.0, 2}, {2, 3, 1.0, 3}}};
  CHECK_THROWS_AS(validate_tree(bad), contract_error);
}

TEST_CASE("JSON round trip") {
  const auto t = hac_complete(random_profiles(9, 2, 4, false));
  CHECK(linkage_from_json(nlohmann::json::parse(to_json(t).dump())) == t);
  const auto c = cut_tree(t, 3);
  CHECK(classes_from_json(nlohmann::json::parse(to_json(c).dump())) == c);
}

}  // TEST_SUITE
