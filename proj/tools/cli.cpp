#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hbmc/clustering.hpp"
#include "hbmc/config.hpp"
#include "hbmc/errors.hpp"
#include "hbmc/eval.hpp"
#include "hbmc/hmcm.hpp"
#include "hbmc/ingest.hpp"
#include "hbmc/log.hpp"
#include "hbmc/pipeline.hpp"
#include "hbmc/smcm.hpp"

namespace hbmc {

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  return out;
}

std::vector<ObservationRecord> read_observations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  return parse_observations(in);
}

void write_trace(const std::string& path, const FitResult& fit) {
  auto out = open_out(path);
  out << "iteration,elbo\n";
  for (const auto& p : fit.elbo_trace) out << p.iteration << ',' << format_real(p.elbo) << '\n';
}

// Class files carry the keys they were computed for; they must line up with
// the matrix axis they are applied to.
ClassAssignment read_classes(const std::string& path, const std::vector<std::string>& keys,
                             const char* axis) {
  const auto j = read_json(path);
  ClassAssignment classes = classes_from_json(j);
  if (j.contains("keys") && j["keys"].get<std::vector<std::string>>() != keys) {
    throw contract_error(std::string(axis) + " class file '" + path + "' does not match the matrix keys");
  }
  return classes;
}

std::vector<std::size_t> parse_fold_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw contract_error("--folds expects i..j, got '" + text + "'");
  std::size_t lo = 0;
  std::size_t hi = 0;
  const auto a = std::from_chars(text.data(), text.data() + dots, lo);
  const auto b = std::from_chars(text.data() + dots + 2, text.data() + text.size(), hi);
  if (a.ec != std::errc() || a.ptr != text.data() + dots || b.ec != std::errc() ||
      b.ptr != text.data() + text.size() || hi < lo) {
    throw contract_error("--folds expects i..j with i <= j, got '" + text + "'");
  }
  std::vector<std::size_t> out;
  for (std::size_t f = lo; f <= hi; ++f) out.push_back(f);
  return out;
}

std::vector<std::size_t> read_fold_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::vector<std::size_t> out;
  std::string token;
  while (in >> token) {
    std::size_t f = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), f);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw parse_error(0, "bad fold index '" + token + "' in '" + path + "'");
    }
    out.push_back(f);
  }
  return out;
}

struct PredictRow {
  std::string solute;
  std::string solvent;
  std::optional<std::size_t> solute_class;
  std::optional<std::size_t> solvent_class;
};

std::vector<PredictRow> read_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw parse_error(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "solute" || header[1] != "solvent") {
    throw parse_error(1, "expected header 'solute,solvent[,solute_class,solvent_class]'");
  }
  const bool with_classes = header.size() == 4 && header[2] == "solute_class" && header[3] == "solvent_class";
  if (header.size() != 2 && !with_classes) {
    throw parse_error(1, "expected header 'solute,solvent[,solute_class,solvent_class]'");
  }
  auto parse_class = [&](const std::string& s) -> std::optional<std::size_t> {
    if (s.empty()) return std::nullopt;
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw parse_error(line_no, "bad class index '" + s + "'");
    }
    return v;
  };
  std::vector<PredictRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      throw parse_error(line_no, "expected " + std::to_string(header.size()) + " fields");
    }
    PredictRow row{f[0], f[1], std::nullopt, std::nullopt};
    if (with_classes) {
      row.solute_class = parse_class(f[2]);
      row.solvent_class = parse_class(f[3]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

long index_of(const std::vector<std::string>& keys, const std::string& key) {
  const auto it = std::find(keys.begin(), keys.end(), key);
  return it == keys.end() ? -1 : static_cast<long>(it - keys.begin());
}

std::string predict_line(const HierarchicalParams& p, const PredictRow& row, bool cold) {
  const long i = index_of(p.solutes, row.solute);
  const long j = index_of(p.solvents, row.solvent);
  if (i >= 0 && j >= 0) {
    return format_real(predict_hmcm(p, static_cast<std::size_t>(i), static_cast<std::size_t>(j))) + ",known";
  }
  if (!cold) {
    throw contract_error("unknown " + std::string(i < 0 ? "solute '" + row.solute : "solvent '" + row.solvent) +
                         "' (pass --cold-class and a class column to predict it)");
  }
  auto need = [&](const std::optional<std::size_t>& c, const char* what, const std::string& key) {
    if (!c) throw contract_error(std::string("no ") + what + " class given for unknown '" + key + "'");
    return *c;
  };
  double value = 0.0;
  if (i < 0 && j < 0) {
    const std::size_t r = need(row.solute_class, "solute", row.solute);
    const std::size_t s = need(row.solvent_class, "solvent", row.solvent);
    if (r >= p.A.rows() || s >= p.B.rows()) throw contract_error("class index out of range");
    value = dot(p.A.row(r), p.B.row(s));
  } else if (i < 0) {
    value = predict_cold_solute(p, need(row.solute_class, "solute", row.solute),
                                p.V.row(static_cast<std::size_t>(j)));
  } else {
    value = predict_cold_solvent(p, need(row.solvent_class, "solvent", row.solvent),
                                 p.U.row(static_cast<std::size_t>(i)));
  }
  return format_real(value) + ",cold";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Hierarchical Bayesian matrix completion for sparse mixture property matrices", "hbmc"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string config_path;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "Config file (key = value)")->check(CLI::ExistingFile);
  app.add_flag("--verbose", verbose, "Debug output on standard error");
  app.add_flag("--quiet", quiet, "No progress output");

  // Per-subcommand model overrides.
  std::optional<std::size_t> k;
  std::optional<double> sigma;
  std::optional<double> lambda;
  std::optional<double> sigma_hp;
  std::optional<double> eta;

  std::string input, output, matrix_path, factors_path, trace_path, completed_path, axis = "rows";
  std::string linkage_path, params_path, pairs_path, solute_classes_path, solvent_classes_path;
  std::string out_dir, folds_text, folds_list, histogram_path;
  std::size_t n_classes = 0;
  bool cold_class = false;
  double hist_width = 0.1, hist_lo = -2.0, hist_hi = 2.0;
  SyntheticSpec synth;
  std::string truth_path;

  auto* ingest = app.add_subcommand("ingest", "Parse, filter and index an observation CSV");
  ingest->add_option("--input", input)->required()->check(CLI::ExistingFile);
  ingest->add_option("--output", output)->required();

  auto* fit_s = app.add_subcommand("fit-smcm", "Fit the standard latent factor model");
  fit_s->add_option("--matrix", matrix_path)->required()->check(CLI::ExistingFile);
  fit_s->add_option("--out-factors", output)->required();
  fit_s->add_option("--k", k)->check(CLI::PositiveNumber);
  fit_s->add_option("--sigma", sigma)->check(CLI::PositiveNumber);
  fit_s->add_option("--lambda", lambda)->check(CLI::PositiveNumber);
  fit_s->add_option("--trace", trace_path, "ELBO trace CSV");

  auto* complete = app.add_subcommand("complete", "Fill every cell from fitted factors");
  complete->add_option("--factors", factors_path)->required()->check(CLI::ExistingFile);
  complete->add_option("--out", output)->required();

  auto* cluster = app.add_subcommand("cluster", "Complete-linkage clustering of completed-matrix profiles");
  cluster->add_option("--completed", completed_path)->required()->check(CLI::ExistingFile);
  cluster->add_option("--axis", axis)->check(CLI::IsMember({"rows", "cols"}));
  cluster->add_option("--out-linkage", output)->required();

  auto* cut = app.add_subcommand("cut", "Cut a linkage tree into k classes");
  cut->add_option("--linkage", linkage_path)->required()->check(CLI::ExistingFile);
  cut->add_option("--classes", n_classes)->required()->check(CLI::PositiveNumber);
  cut->add_option("--out", output)->required();

  auto* order = app.add_subcommand("order", "Dendrogram leaf order");
  order->add_option("--linkage", linkage_path)->required()->check(CLI::ExistingFile);
  order->add_option("--out", output)->required();

  auto* fit_h = app.add_subcommand("fit-hmcm", "Fit the hierarchical model on fixed class assignments");
  fit_h->add_option("--matrix", matrix_path)->required()->check(CLI::ExistingFile);
  fit_h->add_option("--solute-classes", solute_classes_path)->required()->check(CLI::ExistingFile);
  fit_h->add_option("--solvent-classes", solvent_classes_path)->required()->check(CLI::ExistingFile);
  fit_h->add_option("--out", output)->required();
  fit_h->add_option("--k", k)->check(CLI::PositiveNumber);
  fit_h->add_option("--sigma-hp", sigma_hp)->check(CLI::PositiveNumber);
  fit_h->add_option("--eta", eta)->check(CLI::PositiveNumber);
  fit_h->add_option("--lambda", lambda)->check(CLI::PositiveNumber);
  fit_h->add_option("--trace", trace_path, "ELBO trace CSV");

  auto* predict = app.add_subcommand("predict", "Predict ln gamma for solute,solvent pairs");
  predict->add_option("--params", params_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--pairs", pairs_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--out", output, "Output CSV (default: standard output)");
  predict->add_flag("--cold-class", cold_class, "Use class vectors for components absent from training");

  auto* loo = app.add_subcommand("loo", "Leave-one-out evaluation of both models");
  loo->add_option("--input", input)->required()->check(CLI::ExistingFile);
  auto* folds_opt = loo->add_option("--folds", folds_text, "Inclusive fold range i..j");
  loo->add_option("--folds-list", folds_list, "File of fold indices")
      ->check(CLI::ExistingFile)
      ->excludes(folds_opt);
  loo->add_option("--out", output)->required();
  loo->add_option("--histogram", histogram_path, "hMCM residual histogram CSV");
  loo->add_option("--hist-width", hist_width)->check(CLI::PositiveNumber);
  loo->add_option("--hist-lo", hist_lo);
  loo->add_option("--hist-hi", hist_hi);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic clustered corpus");
  synth_cmd->add_option("--out", output)->required();
  synth_cmd->add_option("--truth", truth_path, "Ground truth JSON");
  synth_cmd->add_option("--solutes", synth.I);
  synth_cmd->add_option("--solvents", synth.J);
  synth_cmd->add_option("--k", synth.K);
  synth_cmd->add_option("--solute-classes", synth.n_solute_classes);
  synth_cmd->add_option("--solvent-classes", synth.n_solvent_classes);
  synth_cmd->add_option("--spread", synth.class_spread);
  synth_cmd->add_option("--noise", synth.noise_scale);
  synth_cmd->add_option("--occupancy", synth.occupancy);
  synth_cmd->add_option("--rare", synth.n_rare_solutes, "Solutes kept at exactly --rare-obs cells");
  synth_cmd->add_option("--rare-obs", synth.rare_observations);

  auto* run = app.add_subcommand("run", "Run every stage and write all artifacts");
  run->add_option("--input", input)->required()->check(CLI::ExistingFile);
  run->add_option("--out-dir", out_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  set_log_level(quiet ? LogLevel::quiet : verbose ? LogLevel::debug : LogLevel::info);

  try {
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (seed) config.base_seed = *seed;
    if (workers) config.workers = *workers;
    if (k) config.smcm.K = config.hmcm.K = *k;
    if (sigma) config.smcm.sigma_prior = *sigma;
    if (lambda) config.smcm.lambda_like = config.hmcm.lambda_like = *lambda;
    if (sigma_hp) config.hmcm.sigma_hp = *sigma_hp;
    if (eta) config.hmcm.eta = *eta;

    if (*ingest) {
      const auto filtered = preprocess(read_observations(input));
      const auto m = build_matrix(filtered.kept);
      log_info("ingest: I=" + std::to_string(m.n_solutes()) + " J=" + std::to_string(m.n_solvents()) +
               " entries=" + std::to_string(m.n_entries()) + " occupancy=" +
               format_real(100.0 * m.occupancy()) + "%");
      if (!filtered.removed_solutes.empty() || !filtered.removed_solvents.empty()) {
        log_info("ingest: removed " + std::to_string(filtered.removed_solutes.size()) + " solutes and " +
                 std::to_string(filtered.removed_solvents.size()) + " solvents with < 2 systems");
      }
      write_json(output, to_json(m));
    } else if (*fit_s) {
      const auto m = matrix_from_json(read_json(matrix_path));
      SmcmConfig c = config.smcm;
      c.fit.seed = smcm_seed(config.base_seed);
      const auto fit = fit_smcm(m, c);
      log_info("fit-smcm: " + std::to_string(fit.vi.iterations) + " iterations" +
               (fit.vi.converged ? "" : " (iteration cap reached)"));
      write_json(output, to_json(fit.factors));
      if (!trace_path.empty()) write_trace(trace_path, fit.vi);
    } else if (*complete) {
      const auto f = factors_from_json(read_json(factors_path));
      auto j = dense_to_json(complete_matrix(f, config.workers));
      j["solutes"] = f.solutes;
      j["solvents"] = f.solvents;
      write_json(output, j);
    } else if (*cluster) {
      const auto j = read_json(completed_path);
      const auto completed = dense_from_json(j);
      const bool rows = axis == "rows";
      auto out = to_json(hac_complete(rows ? row_profiles(completed) : col_profiles(completed), config.workers));
      const char* key_field = rows ? "solutes" : "solvents";
      if (j.contains(key_field)) out["keys"] = j[key_field];
      write_json(output, out);
    } else if (*cut) {
      const auto j = read_json(linkage_path);
      auto out = to_json(cut_tree(linkage_from_json(j), n_classes));
      if (j.contains("keys")) out["keys"] = j["keys"];
      write_json(output, out);
    } else if (*order) {
      const auto j = read_json(linkage_path);
      const auto perm = sorted_order(linkage_from_json(j));
      nlohmann::json out = {{"order", perm}};
      if (j.contains("keys")) {
        std::vector<std::string> keys;
        for (std::size_t leaf : perm) keys.push_back(j["keys"].at(leaf).get<std::string>());
        out["keys"] = keys;
      }
      write_json(output, out);
    } else if (*fit_h) {
      const auto m = matrix_from_json(read_json(matrix_path));
      const auto rows = read_classes(solute_classes_path, m.solutes(), "solute");
      const auto cols = read_classes(solvent_classes_path, m.solvents(), "solvent");
      HmcmConfig c = config.hmcm;
      c.fit.seed = hmcm_seed(config.base_seed);
      const auto fit = fit_hmcm(m, rows, cols, c);
      log_info("fit-hmcm: " + std::to_string(fit.vi.iterations) + " iterations" +
               (fit.vi.converged ? "" : " (iteration cap reached)"));
      write_json(output, to_json(fit.params));
      if (!trace_path.empty()) write_trace(trace_path, fit.vi);
    } else if (*predict) {
      const auto params = params_from_json(read_json(params_path));
      std::ostringstream text;
      text << "solute,solvent,ln_gamma_pred,source\n";
      for (const auto& row : read_pairs(pairs_path)) {
        text << row.solute << ',' << row.solvent << ',' << predict_line(params, row, cold_class) << '\n';
      }
      if (output.empty()) {
        std::cout << text.str();
      } else {
        open_out(output) << text.str();
      }
    } else if (*loo) {
      const auto records = preprocess(read_observations(input)).kept;
      std::optional<std::vector<std::size_t>> subset;
      if (!folds_text.empty()) subset = parse_fold_range(folds_text);
      if (!folds_list.empty()) subset = read_fold_list(folds_list);
      const auto report = loo_run(records, config, subset);
      log_info("loo: " + std::to_string(report.hmcm.n) + " folds scored, " +
               std::to_string(report.excluded.size()) + " excluded, " + std::to_string(report.failed.size()) +
               " failed; MAE hMCM " + format_real(report.hmcm.mae) + " sMCM " + format_real(report.smcm.mae));
      write_json(output, to_json(report));
      if (!histogram_path.empty()) {
        std::vector<double> deltas;
        for (const auto& r : report.hmcm.residuals) deltas.push_back(r.delta);
        open_out(histogram_path) << histogram_csv(histogram(deltas, hist_width, hist_lo, hist_hi));
      }
    } else if (*synth_cmd) {
      synth.seed = config.base_seed;
      const auto corpus = generate_synthetic(synth);
      auto out = open_out(output);
      write_observations(out, corpus.records);
      if (!truth_path.empty()) {
        write_json(truth_path, {{"truth", dense_to_json(corpus.truth)},
                                {"solutes", corpus.solute_keys},
                                {"solvents", corpus.solvent_keys},
                                {"solute_labels", corpus.solute_labels},
                                {"solvent_labels", corpus.solvent_labels}});
      }
    } else if (*run) {
      run_pipeline(input, out_dir, config);
      log_info("run: artifacts written to " + out_dir);
    }
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const contract_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const numerical_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const generation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}

}  // namespace hbmc
