#include "hbmc/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "hbmc/errors.hpp"
#include "hbmc/log.hpp"

namespace hbmc {

std::uint64_t smcm_seed(std::uint64_t base) { return derive_seed(base, 1); }
std::uint64_t hmcm_seed(std::uint64_t base) { return derive_seed(base, 2); }

ClassAssignment classify(const std::vector<Profile>& profiles, std::size_t n_classes,
                         std::size_t workers, LinkageTree* tree_out) {
  if (profiles.size() < 2) {
    if (tree_out) *tree_out = LinkageTree{profiles.size(), {}};
    return {std::vector<std::size_t>(profiles.size(), 0), profiles.empty() ? 0u : 1u};
  }
  LinkageTree tree = hac_complete(profiles, workers);
  ClassAssignment classes = cut_tree(tree, std::min(n_classes, tree.n_leaves));
  if (tree_out) *tree_out = std::move(tree);
  return classes;
}

PipelineResult fit_pipeline(const PropertyMatrix& data, const PipelineConfig& config,
                            std::uint64_t seed) {
  PipelineResult out;
  SmcmConfig smcm = config.smcm;
  smcm.fit.seed = smcm_seed(seed);
  out.smcm = fit_smcm(data, smcm);
  if (config.prediction_samples > 0) {
    out.completed = complete_matrix_sampled(out.smcm.vi.posterior, data.n_solutes(), data.n_solvents(),
                                            smcm.K, config.prediction_samples, derive_seed(seed, 3));
  } else {
    out.completed = complete_matrix(out.smcm.factors, config.workers);
  }
  out.solute_classes = classify(row_profiles(out.completed), config.clustering.n_solute_classes,
                                config.workers, &out.solute_tree);
  out.solvent_classes = classify(col_profiles(out.completed), config.clustering.n_solvent_classes,
                                 config.workers, &out.solvent_tree);
  HmcmConfig hmcm = config.hmcm;
  hmcm.fit.seed = hmcm_seed(seed);
  out.hmcm = fit_hmcm(data, out.solute_classes, out.solvent_classes, hmcm);
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write to '" + path.string() + "' failed");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw parse_error(0, path.string() + ": " + ex.what());
  }
}

RunOutcome run_pipeline(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                        const PipelineConfig& config) {
  RunOutcome outcome;
  auto& manifest = outcome.manifest;
  // Worker count does not influence any artifact, so it is left out of the hash.
  PipelineConfig hashed = config;
  hashed.workers = 1;
  const std::string config_text = to_config_text(hashed);
  manifest["config"] = config_text;
  manifest["config_sha256"] = sha256_hex(config_text);
  manifest["base_seed"] = config.base_seed;
  manifest["seeds"] = {{"smcm", smcm_seed(config.base_seed)}, {"hmcm", hmcm_seed(config.base_seed)}};
  manifest["stages"] = nlohmann::json::array();
  manifest["artifacts"] = nlohmann::json::object();

  std::filesystem::create_directories(out_dir);
  auto artifact = [&](const std::string& name, const nlohmann::json& j) {
    const auto path = out_dir / name;
    write_json(path, j);
    manifest["artifacts"][name] = sha256_file(path);
  };

  PropertyMatrix matrix;
  PipelineResult result;
  const std::vector<std::pair<std::string, std::function<void()>>> stages = {
      {"ingest",
       [&] {
         std::ifstream in(input, std::ios::binary);
         if (!in) throw io_error("cannot open input '" + input.string() + "'");
         const auto filtered = preprocess(parse_observations(in));
         matrix = build_matrix(filtered.kept);
         if (matrix.n_entries() == 0) throw contract_error("no observations survive preprocessing");
         log_info("ingest: " + std::to_string(matrix.n_solutes()) + " solutes x " +
                  std::to_string(matrix.n_solvents()) + " solvents, " +
                  std::to_string(matrix.n_entries()) + " entries");
         artifact("matrix.json", to_json(matrix));
       }},
      {"fit-smcm",
       [&] {
         SmcmConfig smcm = config.smcm;
         smcm.fit.seed = smcm_seed(config.base_seed);
         result.smcm = fit_smcm(matrix, smcm);
         log_info("fit-smcm: " + std::to_string(result.smcm.vi.iterations) + " iterations");
         artifact("smcm_factors.json", to_json(result.smcm.factors));
       }},
      {"complete",
       [&] {
         if (config.prediction_samples > 0) {
           result.completed = complete_matrix_sampled(
               result.smcm.vi.posterior, matrix.n_solutes(), matrix.n_solvents(), config.smcm.K,
               config.prediction_samples, derive_seed(config.base_seed, 3));
         } else {
           result.completed = complete_matrix(result.smcm.factors, config.workers);
         }
         auto j = dense_to_json(result.completed);
         j["solutes"] = matrix.solutes();
         j["solvents"] = matrix.solvents();
         artifact("completed.json", j);
       }},
      {"cluster",
       [&] {
         result.solute_classes = classify(row_profiles(result.completed),
                                          config.clustering.n_solute_classes, config.workers,
                                          &result.solute_tree);
         result.solvent_classes = classify(col_profiles(result.completed),
                                           config.clustering.n_solvent_classes, config.workers,
                                           &result.solvent_tree);
         auto rows = to_json(result.solute_tree);
         rows["keys"] = matrix.solutes();
         artifact("solute_linkage.json", rows);
         auto cols = to_json(result.solvent_tree);
         cols["keys"] = matrix.solvents();
         artifact("solvent_linkage.json", cols);
       }},
      {"cut",
       [&] {
         auto rows = to_json(result.solute_classes);
         rows["keys"] = matrix.solutes();
         artifact("solute_classes.json", rows);
         auto cols = to_json(result.solvent_classes);
         cols["keys"] = matrix.solvents();
         artifact("solvent_classes.json", cols);
       }},
      {"fit-hmcm",
       [&] {
         HmcmConfig hmcm = config.hmcm;
         hmcm.fit.seed = hmcm_seed(config.base_seed);
         result.hmcm = fit_hmcm(matrix, result.solute_classes, result.solvent_classes, hmcm);
         log_info("fit-hmcm: " + std::to_string(result.hmcm.vi.iterations) + " iterations");
         artifact("hmcm_params.json", to_json(result.hmcm.params));
       }},
  };

  for (const auto& [name, body] : stages) {
    try {
      body();
      manifest["stages"].push_back({{"name", name}, {"status", "ok"}});
    } catch (const std::exception& ex) {
      manifest["stages"].push_back({{"name", name}, {"status", "failed"}, {"error", ex.what()}});
      manifest["failed_stage"] = name;
      outcome.failed_stage = name;
      outcome.message = ex.what();
      write_json(out_dir / "manifest.json", manifest);
      throw;
    }
  }
  manifest["failed_stage"] = nullptr;
  write_json(out_dir / "manifest.json", manifest);
  outcome.ok = true;
  return outcome;
}

}  // namespace hbmc
