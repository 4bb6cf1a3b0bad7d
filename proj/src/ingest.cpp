#include "hbmc/ingest.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hbmc/errors.hpp"

namespace hbmc {

namespace {

constexpr const char* kHeader = "solute,solvent,ln_gamma,quality";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_real(const std::string& text, std::size_t line) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw parse_error(line, "non-numeric ln_gamma '" + text + "'");
  }
  if (!std::isfinite(value)) throw parse_error(line, "non-finite ln_gamma '" + text + "'");
  return value;
}

struct PairHash {
  std::size_t operator()(const std::pair<std::string, std::string>& p) const {
    const std::size_t h = std::hash<std::string>{}(p.first);
    return h ^ (std::hash<std::string>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

}  // namespace

PropertyMatrix::PropertyMatrix(std::vector<std::string> solutes, std::vector<std::string> solvents,
                               std::vector<MatrixEntry> entries)
    : solutes_(std::move(solutes)), solvents_(std::move(solvents)), entries_(std::move(entries)) {
  for (std::size_t i = 0; i < solutes_.size(); ++i) {
    if (!solute_rows_.emplace(solutes_[i], i).second) {
      throw contract_error("duplicate solute key '" + solutes_[i] + "'");
    }
  }
  for (std::size_t j = 0; j < solvents_.size(); ++j) {
    if (!solvent_cols_.emplace(solvents_[j], j).second) {
      throw contract_error("duplicate solvent key '" + solvents_[j] + "'");
    }
  }
  std::unordered_set<std::size_t> seen;
  for (const auto& e : entries_) {
    if (e.row >= solutes_.size() || e.col >= solvents_.size()) {
      throw contract_error("matrix entry index out of range");
    }
    if (!std::isfinite(e.value)) throw contract_error("non-finite matrix entry");
    if (!seen.insert(e.row * solvents_.size() + e.col).second) {
      throw contract_error("duplicate entry for (" + solutes_[e.row] + ", " + solvents_[e.col] +
                           ")");
    }
  }
}

double PropertyMatrix::occupancy() const noexcept {
  const double cells = static_cast<double>(solutes_.size()) * static_cast<double>(solvents_.size());
  return cells == 0.0 ? 0.0 : static_cast<double>(entries_.size()) / cells;
}

long PropertyMatrix::solute_index(const std::string& key) const {
  const auto it = solute_rows_.find(key);
  return it == solute_rows_.end() ? -1 : static_cast<long>(it->second);
}

long PropertyMatrix::solvent_index(const std::string& key) const {
  const auto it = solvent_cols_.find(key);
  return it == solvent_cols_.end() ? -1 : static_cast<long>(it->second);
}

std::vector<ObservationRecord> parse_observations(std::istream& in) {
  std::vector<ObservationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
      }
      if (line != kHeader) {
        throw parse_error(line_no, std::string("expected header '") + kHeader + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw parse_error(line_no, "expected 4 columns, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) throw parse_error(line_no, "empty component key");

    ObservationRecord rec;
    rec.solute = fields[0];
    rec.solvent = fields[1];
    rec.ln_gamma = parse_real(fields[2], line_no);
    if (fields[3] == "ok") {
      rec.quality_ok = true;
    } else if (fields[3] == "poor") {
      rec.quality_ok = false;
    } else {
      throw parse_error(line_no, "quality must be 'ok' or 'poor', got '" + fields[3] + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_observations(std::ostream& out, const std::vector<ObservationRecord>& records) {
  out << kHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), r.ln_gamma);
    out << r.solute << ',' << r.solvent << ',' << std::string_view(buf, res.ptr - buf) << ','
        << (r.quality_ok ? "ok" : "poor") << '\n';
  }
}

std::vector<ObservationRecord> keep_quality_ok(const std::vector<ObservationRecord>& records) {
  std::vector<ObservationRecord> out;
  for (const auto& r : records) {
    if (r.quality_ok) out.push_back(r);
  }
  return out;
}

std::vector<ObservationRecord> deduplicate(const std::vector<ObservationRecord>& records) {
  struct Group {
    std::size_t slot;
    double sum;
    std::size_t count;
  };
  std::unordered_map<std::pair<std::string, std::string>, Group, PairHash> groups;
  std::vector<ObservationRecord> out;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace({r.solute, r.solvent}, Group{out.size(), 0.0, 0});
    if (inserted) out.push_back(r);
    it->second.sum += r.ln_gamma;
    it->second.count += 1;
  }
  for (const auto& [key, g] : groups) {
    out[g.slot].ln_gamma = g.count == 1 ? g.sum : g.sum / static_cast<double>(g.count);
  }
  return out;
}

FilterResult filter_min_systems(const std::vector<ObservationRecord>& records,
                                std::size_t min_systems) {
  std::vector<char> alive(records.size(), 1);
  std::unordered_set<std::string> dropped_solutes;
  std::unordered_set<std::string> dropped_solvents;

  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> solute_count;
    std::unordered_map<std::string, std::size_t> solvent_count;
    for (std::size_t n = 0; n < records.size(); ++n) {
      if (!alive[n]) continue;
      ++solute_count[records[n].solute];
      ++solvent_count[records[n].solvent];
    }
    for (std::size_t n = 0; n < records.size(); ++n) {
      if (!alive[n]) continue;
      const bool solute_short = solute_count[records[n].solute] < min_systems;
      const bool solvent_short = solvent_count[records[n].solvent] < min_systems;
      if (solute_short || solvent_short) {
        alive[n] = 0;
        changed = true;
        if (solute_short) dropped_solutes.insert(records[n].solute);
        if (solvent_short) dropped_solvents.insert(records[n].solvent);
      }
    }
  }

  FilterResult result;
  std::unordered_set<std::string> kept_solutes;
  std::unordered_set<std::string> kept_solvents;
  for (std::size_t n = 0; n < records.size(); ++n) {
    if (alive[n]) {
      result.kept.push_back(records[n]);
      kept_solutes.insert(records[n].solute);
      kept_solvents.insert(records[n].solvent);
    }
  }
  // A component is "removed" if it had records and none survived, whatever the cause.
  std::unordered_set<std::string> listed_solutes;
  std::unordered_set<std::string> listed_solvents;
  for (const auto& r : records) {
    if (!kept_solutes.count(r.solute) && listed_solutes.insert(r.solute).second) {
      result.removed_solutes.push_back(r.solute);
    }
    if (!kept_solvents.count(r.solvent) && listed_solvents.insert(r.solvent).second) {
      result.removed_solvents.push_back(r.solvent);
    }
  }
  return result;
}

PropertyMatrix build_matrix(const std::vector<ObservationRecord>& records) {
  std::vector<std::string> solutes;
  std::vector<std::string> solvents;
  std::unordered_map<std::string, std::size_t> rows;
  std::unordered_map<std::string, std::size_t> cols;
  std::vector<MatrixEntry> entries;
  entries.reserve(records.size());
  for (const auto& r : records) {
    auto [ri, new_row] = rows.try_emplace(r.solute, solutes.size());
    if (new_row) solutes.push_back(r.solute);
    auto [ci, new_col] = cols.try_emplace(r.solvent, solvents.size());
    if (new_col) solvents.push_back(r.solvent);
    entries.push_back({ri->second, ci->second, r.ln_gamma});
  }
  return PropertyMatrix(std::move(solutes), std::move(solvents), std::move(entries));
}

FilterResult preprocess(const std::vector<ObservationRecord>& raw) {
  return filter_min_systems(deduplicate(keep_quality_ok(raw)));
}

nlohmann::json to_json(const PropertyMatrix& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries()) entries.push_back({e.row, e.col, e.value});
  return {{"solutes", m.solutes()}, {"solvents", m.solvents()}, {"entries", std::move(entries)}};
}

PropertyMatrix matrix_from_json(const nlohmann::json& j) {
  try {
    std::vector<MatrixEntry> entries;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3) throw parse_error(0, "matrix entry must be [row, col, value]");
      entries.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
    }
    return PropertyMatrix(j.at("solutes").get<std::vector<std::string>>(),
                          j.at("solvents").get<std::vector<std::string>>(), std::move(entries));
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error(0, std::string("bad matrix file: ") + ex.what());
  }
}

}  // namespace hbmc
