#include "hbmc/clustering.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "hbmc/errors.hpp"
#include "hbmc/parallel.hpp"

namespace hbmc {

std::vector<Profile> row_profiles(const DenseMatrix& completed) {
  std::vector<Profile> out;
  out.reserve(completed.rows());
  for (std::size_t i = 0; i < completed.rows(); ++i) {
    out.emplace_back(completed.row(i).begin(), completed.row(i).end());
  }
  return out;
}

std::vector<Profile> col_profiles(const DenseMatrix& completed) {
  std::vector<Profile> out(completed.cols(), Profile(completed.rows()));
  for (std::size_t i = 0; i < completed.rows(); ++i) {
    for (std::size_t j = 0; j < completed.cols(); ++j) out[j][i] = completed(i, j);
  }
  return out;
}

double euclidean(const Profile& a, const Profile& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

LinkageTree hac_complete(const std::vector<Profile>& profiles, std::size_t workers) {
  const std::size_t n = profiles.size();
  if (n < 2) throw contract_error("hierarchical clustering needs at least 2 profiles");
  const std::size_t len = profiles.front().size();
  for (const auto& p : profiles) {
    if (p.size() != len) throw contract_error("profiles have different lengths");
    for (double v : p) {
      if (std::isnan(v)) throw contract_error("NaN in clustering profile");
    }
  }

  DenseMatrix dist(n, n);
  parallel_for(n, workers, [&](std::size_t a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) dist(a, b) = euclidean(profiles[std::min(a, b)], profiles[std::max(a, b)]);
    }
  });

  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> id(n);
  std::vector<std::size_t> size(n, 1);
  std::vector<char> active(n, 1);
  std::iota(id.begin(), id.end(), 0);

  // nn[s]: slot of the closest active cluster whose id exceeds id[s],
  // ordered by (distance, partner id).
  std::vector<std::size_t> nn(n, none);
  auto rescan = [&](std::size_t s) {
    nn[s] = none;
    for (std::size_t y = 0; y < n; ++y) {
      if (!active[y] || id[y] <= id[s]) continue;
      if (nn[s] == none || std::tie(dist(s, y), id[y]) < std::tie(dist(s, nn[s]), id[nn[s]])) {
        nn[s] = y;
      }
    }
  };
  for (std::size_t s = 0; s < n; ++s) rescan(s);

  LinkageTree tree;
  tree.n_leaves = n;
  tree.merges.reserve(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    std::size_t best = none;
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s] || nn[s] == none) continue;
      if (best == none || std::make_tuple(dist(s, nn[s]), id[s], id[nn[s]]) <
                              std::make_tuple(dist(best, nn[best]), id[best], id[nn[best]])) {
        best = s;
      }
    }
    const std::size_t sa = best;
    const std::size_t sb = nn[best];
    const double height = dist(sa, sb);
    tree.merges.push_back({id[sa], id[sb], height, size[sa] + size[sb]});

    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == sa || x == sb) continue;
      const double d = std::max(dist(sa, x), dist(sb, x));
      dist(sa, x) = d;
      dist(x, sa) = d;
    }
    active[sb] = 0;
    id[sa] = n + t;
    size[sa] += size[sb];
    nn[sa] = none;
    nn[sb] = none;

    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == sa) continue;
      if (nn[x] == sa || nn[x] == sb) {
        rescan(x);
      } else if (nn[x] == none || std::tie(dist(x, sa), id[sa]) < std::tie(dist(x, nn[x]), id[nn[x]])) {
        nn[x] = sa;
      }
    }
  }
  validate_tree(tree);
  return tree;
}

void validate_tree(const LinkageTree& tree) {
  const std::size_t n = tree.n_leaves;
  if (n == 0) throw contract_error("tree has no leaves");
  if (tree.merges.size() != n - 1) throw contract_error("tree must have n_leaves - 1 merges");
  std::vector<std::size_t> sizes(2 * n - 1, 0);
  std::vector<char> consumed(2 * n - 1, 0);
  std::fill(sizes.begin(), sizes.begin() + static_cast<std::ptrdiff_t>(n), 1);
  double last_height = 0.0;
  for (std::size_t t = 0; t < tree.merges.size(); ++t) {
    const Merge& m = tree.merges[t];
    if (m.left >= m.right || m.right >= n + t) throw contract_error("merge refers to an unknown cluster");
    if (consumed[m.left] || consumed[m.right]) throw contract_error("cluster merged twice");
    consumed[m.left] = consumed[m.right] = 1;
    if (!(m.height >= 0.0)) throw contract_error("negative or NaN merge height");
    if (m.height < last_height) throw contract_error("merge heights decrease");
    last_height = m.height;
    if (m.size != sizes[m.left] + sizes[m.right]) throw contract_error("merge size mismatch");
    sizes[n + t] = m.size;
  }
}

ClassAssignment cut_tree(const LinkageTree& tree, std::size_t n_classes) {
  validate_tree(tree);
  const std::size_t n = tree.n_leaves;
  if (n_classes < 1 || n_classes > n) {
    throw contract_error("n_classes " + std::to_string(n_classes) + " outside [1, " +
                         std::to_string(n) + "]");
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::size_t> rep(2 * n - 1);
  std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), 0);
  for (std::size_t t = 0; t < n - n_classes; ++t) {
    const Merge& m = tree.merges[t];
    const std::size_t a = find(rep[m.left]);
    const std::size_t b = find(rep[m.right]);
    parent[b] = a;
    rep[n + t] = a;
  }

  constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label_of_root(n, unset);
  ClassAssignment out;
  out.labels.resize(n);
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    const std::size_t root = find(leaf);
    if (label_of_root[root] == unset) label_of_root[root] = out.n_classes++;
    out.labels[leaf] = label_of_root[root];
  }
  return out;
}

std::vector<std::size_t> sorted_order(const LinkageTree& tree) {
  validate_tree(tree);
  const std::size_t n = tree.n_leaves;
  std::vector<std::size_t> min_leaf(2 * n - 1);
  std::iota(min_leaf.begin(), min_leaf.begin() + static_cast<std::ptrdiff_t>(n), 0);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    min_leaf[n + t] = std::min(min_leaf[tree.merges[t].left], min_leaf[tree.merges[t].right]);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> stack{2 * n - 2};
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    if (c < n) {
      order.push_back(c);
      continue;
    }
    const Merge& m = tree.merges[c - n];
    const bool left_first = min_leaf[m.left] < min_leaf[m.right];
    stack.push_back(left_first ? m.right : m.left);
    stack.push_back(left_first ? m.left : m.right);
  }
  return order;
}

nlohmann::json to_json(const LinkageTree& tree) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : tree.merges) merges.push_back({m.left, m.right, m.height, m.size});
  return {{"n_leaves", tree.n_leaves}, {"merges", std::move(merges)}};
}

LinkageTree linkage_from_json(const nlohmann::json& j) {
  try {
    LinkageTree tree;
    tree.n_leaves = j.at("n_leaves").get<std::size_t>();
    for (const auto& m : j.at("merges")) {
      if (!m.is_array() || m.size() != 4) throw parse_error(0, "merge must be [left, right, height, size]");
      tree.merges.push_back({m[0].get<std::size_t>(), m[1].get<std::size_t>(), m[2].get<double>(),
                             m[3].get<std::size_t>()});
    }
    validate_tree(tree);
    return tree;
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error(0, std::string("bad linkage file: ") + ex.what());
  } catch (const contract_error& ex) {
    throw parse_error(0, std::string("bad linkage file: ") + ex.what());
  }
}

nlohmann::json to_json(const ClassAssignment& classes) {
  return {{"n_classes", classes.n_classes}, {"labels", classes.labels}};
}

ClassAssignment classes_from_json(const nlohmann::json& j) {
  try {
    ClassAssignment c{j.at("labels").get<std::vector<std::size_t>>(),
                      j.at("n_classes").get<std::size_t>()};
    std::vector<char> used(c.n_classes, 0);
    for (auto l : c.labels) {
      if (l >= c.n_classes) throw parse_error(0, "class label out of range");
      used[l] = 1;
    }
    for (char u : used) {
      if (!u) throw parse_error(0, "empty class in class file");
    }
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error(0, std::string("bad class file: ") + ex.what());
  }
}

}  // namespace hbmc
