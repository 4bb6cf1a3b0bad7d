#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbmc/dense_matrix.hpp"

namespace hbmc {

using Profile = std::vector<double>;

/// One agglomeration step. Cluster ids below n_leaves are leaves; merge t
/// creates cluster n_leaves + t. `left` < `right`.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;

  bool operator==(const Merge&) const = default;
};

struct LinkageTree {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;

  bool operator==(const LinkageTree&) const = default;
};

struct ClassAssignment {
  std::vector<std::size_t> labels;
  std::size_t n_classes = 0;

  bool operator==(const ClassAssignment&) const = default;
};

std::vector<Profile> row_profiles(const DenseMatrix& completed);
std::vector<Profile> col_profiles(const DenseMatrix& completed);

double euclidean(const Profile& a, const Profile& b);

/// Complete-linkage agglomerative clustering under the Euclidean metric.
/// Equal distances are resolved by the lexicographically smallest
/// (smaller id, larger id) pair.
LinkageTree hac_complete(const std::vector<Profile>& profiles, std::size_t workers = 1);

/// Throws contract_error if the tree breaks its structural invariants.
void validate_tree(const LinkageTree& tree);

/// Flat clustering obtained by undoing the last n_classes - 1 merges.
/// Labels are numbered by first appearance in leaf order.
ClassAssignment cut_tree(const LinkageTree& tree, std::size_t n_classes);

/// Leaf order of the dendrogram drawing. At every merge the child holding
/// the smallest leaf index is drawn first.
std::vector<std::size_t> sorted_order(const LinkageTree& tree);

nlohmann::json to_json(const LinkageTree& tree);
LinkageTree linkage_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClassAssignment& classes);
ClassAssignment classes_from_json(const nlohmann::json& j);

}  // namespace hbmc
