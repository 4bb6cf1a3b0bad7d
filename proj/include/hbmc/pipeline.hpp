#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbmc/clustering.hpp"
#include "hbmc/config.hpp"
#include "hbmc/hmcm.hpp"
#include "hbmc/ingest.hpp"
#include "hbmc/smcm.hpp"

namespace hbmc {

/// Everything produced by the four stages on one training matrix.
struct PipelineResult {
  SmcmFit smcm;
  DenseMatrix completed;
  LinkageTree solute_tree;
  LinkageTree solvent_tree;
  ClassAssignment solute_classes;
  ClassAssignment solvent_classes;
  HmcmFit hmcm;
};

/// Seeds used by the two model fits for a given base seed.
std::uint64_t smcm_seed(std::uint64_t base);
std::uint64_t hmcm_seed(std::uint64_t base);

/// Clusters one axis and cuts it into min(n_classes, n) classes.
ClassAssignment classify(const std::vector<Profile>& profiles, std::size_t n_classes,
                         std::size_t workers, LinkageTree* tree_out = nullptr);

/// sMCM fit -> completed matrix -> clustering of both axes -> hMCM fit.
PipelineResult fit_pipeline(const PropertyMatrix& data, const PipelineConfig& config,
                            std::uint64_t seed);

struct RunOutcome {
  bool ok = false;
  std::string failed_stage;
  std::string message;
  nlohmann::json manifest;
};

/// Runs every stage on the CSV at `input`, writing each intermediate artifact
/// and a manifest (config hash, seeds, SHA-256 of every artifact) to
/// `out_dir`. Stops at the first failing stage and records it.
RunOutcome run_pipeline(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                        const PipelineConfig& config);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Writes `j` with 2-space indent and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace hbmc
