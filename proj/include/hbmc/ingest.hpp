#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace hbmc {

/// One measured binary system: ln(gamma_inf) of `solute` infinitely diluted in `solvent`.
struct ObservationRecord {
  std::string solute;
  std::string solvent;
  double ln_gamma = 0.0;
  bool quality_ok = true;

  bool operator==(const ObservationRecord&) const = default;
};

struct MatrixEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;

  bool operator==(const MatrixEntry&) const = default;
};

/// Sparse solute x solvent matrix of observed values.
///
/// Rows and columns are numbered by first occurrence of the key in the
/// records the matrix was built from. Immutable after construction.
class PropertyMatrix {
 public:
  PropertyMatrix() = default;
  PropertyMatrix(std::vector<std::string> solutes, std::vector<std::string> solvents,
                 std::vector<MatrixEntry> entries);

  std::size_t n_solutes() const noexcept { return solutes_.size(); }
  std::size_t n_solvents() const noexcept { return solvents_.size(); }
  std::size_t n_entries() const noexcept { return entries_.size(); }
  double occupancy() const noexcept;

  const std::vector<std::string>& solutes() const noexcept { return solutes_; }
  const std::vector<std::string>& solvents() const noexcept { return solvents_; }
  const std::vector<MatrixEntry>& entries() const noexcept { return entries_; }

  /// Row of `key`, or -1 when the solute is unknown.
  long solute_index(const std::string& key) const;
  /// Column of `key`, or -1 when the solvent is unknown.
  long solvent_index(const std::string& key) const;

  bool operator==(const PropertyMatrix& other) const {
    return solutes_ == other.solutes_ && solvents_ == other.solvents_ && entries_ == other.entries_;
  }

 private:
  std::vector<std::string> solutes_;
  std::vector<std::string> solvents_;
  std::map<std::string, std::size_t> solute_rows_;
  std::map<std::string, std::size_t> solvent_cols_;
  std::vector<MatrixEntry> entries_;
};

/// Reads `solute,solvent,ln_gamma,quality` CSV. Throws parse_error with the
/// offending line number. An empty stream yields an empty list.
std::vector<ObservationRecord> parse_observations(std::istream& in);

void write_observations(std::ostream& out, const std::vector<ObservationRecord>& records);

/// Drops records flagged as poor quality.
std::vector<ObservationRecord> keep_quality_ok(const std::vector<ObservationRecord>& records);

/// Averages repeated (solute, solvent) pairs; output ordered by first occurrence.
std::vector<ObservationRecord> deduplicate(const std::vector<ObservationRecord>& records);

struct FilterResult {
  std::vector<ObservationRecord> kept;
  std::vector<std::string> removed_solutes;
  std::vector<std::string> removed_solvents;
};

/// Removes components with fewer than `min_systems` records, repeated until
/// no further removal happens. Removed keys are listed in first-occurrence order.
FilterResult filter_min_systems(const std::vector<ObservationRecord>& records,
                                std::size_t min_systems = 2);

/// Throws contract_error on a repeated (solute, solvent) pair.
PropertyMatrix build_matrix(const std::vector<ObservationRecord>& records);

/// quality filter -> deduplicate -> fixpoint filter.
FilterResult preprocess(const std::vector<ObservationRecord>& raw);

nlohmann::json to_json(const PropertyMatrix& m);
PropertyMatrix matrix_from_json(const nlohmann::json& j);

}  // namespace hbmc
