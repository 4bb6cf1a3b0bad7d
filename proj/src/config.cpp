#include "hbmc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "hbmc/errors.hpp"

namespace hbmc {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

using Setter = std::function<std::string(PipelineConfig&, const std::string&)>;

// Returns an empty string on success, otherwise a description of the problem.
Setter unsigned_key(std::function<std::uint64_t&(PipelineConfig&)> field, std::uint64_t min_value) {
  return [field, min_value](PipelineConfig& c, const std::string& text) -> std::string {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      return "expected a non-negative integer, got '" + text + "'";
    }
    if (v < min_value) return "must be >= " + std::to_string(min_value) + ", got " + text;
    field(c) = v;
    return {};
  };
}

Setter size_key(std::function<std::size_t&(PipelineConfig&)> field, std::size_t min_value) {
  return [field, min_value](PipelineConfig& c, const std::string& text) -> std::string {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      return "expected a non-negative integer, got '" + text + "'";
    }
    if (v < min_value) return "must be >= " + std::to_string(min_value) + ", got " + text;
    field(c) = v;
    return {};
  };
}

Setter real_key(std::function<void(PipelineConfig&, double)> assign,
                std::function<bool(double)> in_range, std::string range_text) {
  return [=](PipelineConfig& c, const std::string& text) -> std::string {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
      return "expected a finite real number, got '" + text + "'";
    }
    if (!in_range(v)) return "must be " + range_text + ", got " + text;
    assign(c, v);
    return {};
  };
}

Setter bool_key(std::function<bool&(PipelineConfig&)> field) {
  return [field](PipelineConfig& c, const std::string& text) -> std::string {
    if (text == "true" || text == "1") {
      field(c) = true;
    } else if (text == "false" || text == "0") {
      field(c) = false;
    } else {
      return "expected true or false, got '" + text + "'";
    }
    return {};
  };
}

// Fields shared by both models are written to both sub-configs.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    auto positive = [](double v) { return v > 0.0; };
    std::map<std::string, Setter> t;
    t["seed"] = unsigned_key([](PipelineConfig& c) -> std::uint64_t& { return c.base_seed; }, 0);
    t["workers"] = size_key([](PipelineConfig& c) -> std::size_t& { return c.workers; }, 1);
    t["k"] = [](PipelineConfig& c, const std::string& text) {
      auto inner = size_key([](PipelineConfig& cc) -> std::size_t& { return cc.smcm.K; }, 1);
      auto msg = inner(c, text);
      if (msg.empty()) c.hmcm.K = c.smcm.K;
      return msg;
    };
    t["sigma"] = real_key([](PipelineConfig& c, double v) { c.smcm.sigma_prior = v; }, positive, "> 0");
    t["lambda"] = real_key(
        [](PipelineConfig& c, double v) { c.smcm.lambda_like = c.hmcm.lambda_like = v; }, positive, "> 0");
    t["sigma_hp"] = real_key([](PipelineConfig& c, double v) { c.hmcm.sigma_hp = v; }, positive, "> 0");
    t["eta"] = real_key([](PipelineConfig& c, double v) { c.hmcm.eta = v; }, positive, "> 0");
    t["n_solute_classes"] =
        size_key([](PipelineConfig& c) -> std::size_t& { return c.clustering.n_solute_classes; }, 1);
    t["n_solvent_classes"] =
        size_key([](PipelineConfig& c) -> std::size_t& { return c.clustering.n_solvent_classes; }, 1);
    t["prediction_samples"] =
        size_key([](PipelineConfig& c) -> std::size_t& { return c.prediction_samples; }, 0);
    t["refilter_folds"] = bool_key([](PipelineConfig& c) -> bool& { return c.refilter_folds; });

    auto fit_size = [](std::size_t FitConfig::*member, std::size_t min_value) -> Setter {
      return [member, min_value](PipelineConfig& c, const std::string& text) {
        auto inner = size_key([member](PipelineConfig& cc) -> std::size_t& { return cc.smcm.fit.*member; },
                              min_value);
        auto msg = inner(c, text);
        if (msg.empty()) c.hmcm.fit.*member = c.smcm.fit.*member;
        return msg;
      };
    };
    auto fit_real = [](double FitConfig::*member, std::function<bool(double)> ok, std::string range) {
      return real_key([member](PipelineConfig& c, double v) { c.smcm.fit.*member = c.hmcm.fit.*member = v; },
                      std::move(ok), std::move(range));
    };
    t["max_iters"] = fit_size(&FitConfig::max_iters, 1);
    t["mc_samples"] = fit_size(&FitConfig::mc_samples, 1);
    t["convergence_window"] = fit_size(&FitConfig::convergence_window, 1);
    t["elbo_check_every"] = fit_size(&FitConfig::elbo_check_every, 1);
    t["elbo_eval_samples"] = fit_size(&FitConfig::elbo_eval_samples, 1);
    t["learning_rate"] = fit_real(&FitConfig::learning_rate, positive, "> 0");
    t["lr_decay"] = fit_real(&FitConfig::lr_decay, [](double v) { return v > 0.0 && v <= 1.0; }, "in (0, 1]");
    t["convergence_tol"] = fit_real(&FitConfig::convergence_tol, positive, "> 0");
    return t;
  }();
  return table;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

PipelineConfig parse_config(std::istream& in) {
  PipelineConfig config;
  std::vector<std::string> issues;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      issues.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      continue;
    }
    if (!seen.insert(key).second) {
      issues.push_back("line " + std::to_string(line_no) + ": key '" + key + "' given twice");
      continue;
    }
    const std::string problem = it->second(config, value);
    if (!problem.empty()) {
      issues.push_back("line " + std::to_string(line_no) + ": key '" + key + "' " + problem);
    }
  }
  if (!issues.empty()) throw config_error(std::move(issues));
  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string to_config_text(const PipelineConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.base_seed << '\n'
      << "workers = " << c.workers << '\n'
      << "k = " << c.smcm.K << '\n'
      << "sigma = " << format_real(c.smcm.sigma_prior) << '\n'
      << "lambda = " << format_real(c.smcm.lambda_like) << '\n'
      << "sigma_hp = " << format_real(c.hmcm.sigma_hp) << '\n'
      << "eta = " << format_real(c.hmcm.eta) << '\n'
      << "n_solute_classes = " << c.clustering.n_solute_classes << '\n'
      << "n_solvent_classes = " << c.clustering.n_solvent_classes << '\n'
      << "prediction_samples = " << c.prediction_samples << '\n'
      << "refilter_folds = " << (c.refilter_folds ? "true" : "false") << '\n'
      << "max_iters = " << c.smcm.fit.max_iters << '\n'
      << "mc_samples = " << c.smcm.fit.mc_samples << '\n'
      << "learning_rate = " << format_real(c.smcm.fit.learning_rate) << '\n'
      << "lr_decay = " << format_real(c.smcm.fit.lr_decay) << '\n'
      << "convergence_window = " << c.smcm.fit.convergence_window << '\n'
      << "convergence_tol = " << format_real(c.smcm.fit.convergence_tol) << '\n'
      << "elbo_check_every = " << c.smcm.fit.elbo_check_every << '\n'
      << "elbo_eval_samples = " << c.smcm.fit.elbo_eval_samples << '\n';
  return out.str();
}

}  // namespace hbmc
