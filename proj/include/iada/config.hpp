// Experiment configuration: a sectioned key = value text format with
// sections [domains], [train], [loss], [theory]. Parsing is two-phase:
// the document is read fully (tracking line numbers), unknown sections or
// keys are rejected, and only then are values materialized and validated,
// so every complaint carries the key name and line. The same format is
// written back as the resolved manifest, which can be re-fed as a config.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "iada/csv.hpp"
#include "iada/domains.hpp"
#include "iada/errors.hpp"
#include "iada/trainer.hpp"

namespace iada {

struct ConfigEntry {
  std::string value;
  long line = 0;
  std::string source;  // file path or "preset:<name>"
};

struct ConfigDocument {
  // section -> key -> entry
  std::map<std::string, std::map<std::string, ConfigEntry>> sections;

  void merge_from(const ConfigDocument& other) {
    for (const auto& [sec, kv] : other.sections)
      for (const auto& [key, entry] : kv) sections[sec][key] = entry;
  }
};

inline ConfigDocument parse_config_text(const std::string& text,
                                        const std::string& source) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(source + ":" + std::to_string(lineno) +
                          ": malformed section header '" + t + "'");
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": key '" +
                        key + "' outside any section");
    if (key.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    doc.sections[section][key] = ConfigEntry{value, lineno, source};
  }
  return doc;
}

inline ConfigDocument parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Resolved configuration.
// ---------------------------------------------------------------------------

struct DomainsConfig {
  std::size_t d = 6;
  std::size_t classes = 2;
  double class_sep = 2.0;
  std::vector<double> class_scales = {1.0, 1.0};
  std::vector<std::vector<double>> class_means;  // optional; derived if empty

  long source_n = 1698;
  std::vector<double> source_pi = {0.289, 0.711};
  std::uint64_t source_seed = 11;
  double source_noise_scale = 0.0;

  long target_n = 258;
  std::vector<double> target_pi = {0.453, 0.547};
  std::uint64_t target_seed = 22;
  std::vector<double> target_mean_shift;  // length d (or empty = zero)
  double target_noise_scale = 0.0;
  double target_concept_rotation = 0.0;

  std::vector<std::vector<double>> resolved_means() const {
    if (!class_means.empty()) return class_means;
    std::vector<std::vector<double>> means(classes, std::vector<double>(d, 0.0));
    if (d == 1) {
      for (std::size_t c = 0; c < classes; ++c)
        means[c][0] = classes == 1 ? 0.0
                                   : class_sep * (2.0 * static_cast<double>(c) /
                                                      (static_cast<double>(classes) - 1.0) -
                                                  1.0);
    } else {
      for (std::size_t c = 0; c < classes; ++c) {
        const double angle = 2.0 * 3.14159265358979323846 *
                             static_cast<double>(c) /
                             static_cast<double>(classes);
        means[c][0] = class_sep * std::cos(angle);
        means[c][1] = class_sep * std::sin(angle);
      }
    }
    return means;
  }

  DomainSpec source_spec() const {
    DomainSpec s;
    s.n = source_n;
    s.d = d;
    s.C = classes;
    s.pi = source_pi;
    s.class_means = resolved_means();
    s.class_scales = class_scales;
    s.mean_shift.assign(d, 0.0);
    s.noise_scale = source_noise_scale;
    s.concept_rotation = 0.0;
    s.seed = source_seed;
    return s;
  }

  DomainSpec target_spec() const {
    DomainSpec s;
    s.n = target_n;
    s.d = d;
    s.C = classes;
    s.pi = target_pi;
    s.class_means = resolved_means();
    s.class_scales = class_scales;
    s.mean_shift = target_mean_shift.empty() ? std::vector<double>(d, 0.0)
                                             : target_mean_shift;
    s.noise_scale = target_noise_scale;
    s.concept_rotation = target_concept_rotation;
    s.seed = target_seed;
    return s;
  }
};

struct TheoryConfig {
  int convergence_seeds = 20;
  long convergence_iters = 10000;
  std::vector<std::size_t> convergence_dims = {1, 5};
  int gradnorm_w_samples = 50;
  int gradnorm_mc_draws = 20000;
  std::vector<std::pair<long, std::size_t>> timing_sizes = {
      {1000, 128}, {2000, 256}, {4000, 512}, {8000, 1024}};
  long probe_iterations = 400;
  double probe_learning_rate = 0.5;
  long bound_train_iterations = 4000;
  long batch_budget_B = 100;  // for the allocation check
};

struct ExperimentConfig {
  DomainsConfig domains;
  TrainConfig train;
  TheoryConfig theory;
};

// ---------------------------------------------------------------------------
// Materialization with validation.
// ---------------------------------------------------------------------------

namespace detail_cfg {

inline std::string where(const ConfigEntry& e) {
  return e.source + ":" + std::to_string(e.line);
}

inline double as_double(const std::string& key, const ConfigEntry& e) {
  try {
    return parse_double(e.value);
  } catch (const ValueError&) {
    throw ConfigError(where(e) + ": key '" + key + "' expects a number, got '" +
                      e.value + "'");
  }
}

inline long as_long(const std::string& key, const ConfigEntry& e) {
  try {
    return parse_long(e.value);
  } catch (const ValueError&) {
    throw ConfigError(where(e) + ": key '" + key + "' expects an integer, got '" +
                      e.value + "'");
  }
}

inline bool as_bool(const std::string& key, const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError(where(e) + ": key '" + key + "' expects true/false, got '" +
                    e.value + "'");
}

inline std::vector<double> as_double_list(const std::string& key,
                                          const ConfigEntry& e) {
  std::vector<double> out;
  std::istringstream is(e.value);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      out.push_back(parse_double(tok));
    } catch (const ValueError&) {
      throw ConfigError(where(e) + ": key '" + key +
                        "' expects comma-separated numbers, got '" + e.value + "'");
    }
  }
  if (out.empty())
    throw ConfigError(where(e) + ": key '" + key + "' expects a nonempty list");
  return out;
}

inline std::vector<std::uint64_t> as_seed_list(const std::string& key,
                                               const ConfigEntry& e) {
  std::vector<std::uint64_t> out;
  std::istringstream is(e.value);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      out.push_back(static_cast<std::uint64_t>(parse_long(tok)));
    } catch (const ValueError&) {
      throw ConfigError(where(e) + ": key '" + key +
                        "' expects comma-separated integers, got '" + e.value + "'");
    }
  }
  if (out.empty())
    throw ConfigError(where(e) + ": key '" + key + "' expects a nonempty list");
  return out;
}

}  // namespace detail_cfg

inline ExperimentConfig materialize_config(const ConfigDocument& doc) {
  using namespace detail_cfg;
  static const std::map<std::string, std::set<std::string>> known = {
      {"domains",
       {"d", "classes", "class_sep", "class_scales", "class_means", "source_n",
        "source_pi", "source_seed", "source_noise_scale", "target_n",
        "target_pi", "target_seed", "target_mean_shift", "target_noise_scale",
        "target_concept_rotation"}},
      {"train",
       {"learning_rate", "batch_budget", "weight_decay", "iterations", "seeds",
        "threshold_mode", "eval_every", "hidden_dim", "augment_std",
        "use_attention", "use_class_weights", "beta_init", "gamma_init",
        "alloc_hint"}},
      {"loss",
       {"focal_gamma", "lambda0", "warmup_tau", "lambda1", "lambda2", "lambda3",
        "lambda_reg"}},
      {"theory",
       {"convergence_seeds", "convergence_iters", "convergence_dims",
        "gradnorm_w_samples", "gradnorm_mc_draws", "timing_sizes",
        "probe_iterations", "probe_learning_rate", "bound_train_iterations",
        "batch_budget_B"}}};

  for (const auto& [sec, kv] : doc.sections) {
    const auto sec_it = known.find(sec);
    if (sec_it == known.end()) {
      const auto& any = kv.begin()->second;
      throw ConfigError(detail_cfg::where(any) + ": unknown section [" + sec + "]");
    }
    for (const auto& [key, entry] : kv)
      if (!sec_it->second.count(key))
        throw ConfigError(detail_cfg::where(entry) + ": unknown key '" + key +
                          "' in section [" + sec + "]");
  }

  ExperimentConfig cfg;
  auto get = [&](const std::string& sec, const std::string& key) -> const ConfigEntry* {
    const auto si = doc.sections.find(sec);
    if (si == doc.sections.end()) return nullptr;
    const auto ki = si->second.find(key);
    return ki == si->second.end() ? nullptr : &ki->second;
  };

  // [domains]
  if (const auto* e = get("domains", "d"))
    cfg.domains.d = static_cast<std::size_t>(as_long("d", *e));
  if (const auto* e = get("domains", "classes"))
    cfg.domains.classes = static_cast<std::size_t>(as_long("classes", *e));
  if (const auto* e = get("domains", "class_sep"))
    cfg.domains.class_sep = as_double("class_sep", *e);
  if (const auto* e = get("domains", "class_scales"))
    cfg.domains.class_scales = as_double_list("class_scales", *e);
  if (const auto* e = get("domains", "class_means")) {
    const auto flat = as_double_list("class_means", *e);
    if (flat.size() != cfg.domains.classes * cfg.domains.d)
      throw ConfigError(where(*e) + ": class_means expects classes*d = " +
                        std::to_string(cfg.domains.classes * cfg.domains.d) +
                        " values, got " + std::to_string(flat.size()));
    cfg.domains.class_means.assign(cfg.domains.classes,
                                   std::vector<double>(cfg.domains.d, 0.0));
    for (std::size_t c = 0; c < cfg.domains.classes; ++c)
      for (std::size_t j = 0; j < cfg.domains.d; ++j)
        cfg.domains.class_means[c][j] = flat[c * cfg.domains.d + j];
  }
  if (const auto* e = get("domains", "source_n"))
    cfg.domains.source_n = as_long("source_n", *e);
  if (const auto* e = get("domains", "source_pi"))
    cfg.domains.source_pi = as_double_list("source_pi", *e);
  if (const auto* e = get("domains", "source_seed"))
    cfg.domains.source_seed = static_cast<std::uint64_t>(as_long("source_seed", *e));
  if (const auto* e = get("domains", "source_noise_scale"))
    cfg.domains.source_noise_scale = as_double("source_noise_scale", *e);
  if (const auto* e = get("domains", "target_n"))
    cfg.domains.target_n = as_long("target_n", *e);
  if (const auto* e = get("domains", "target_pi"))
    cfg.domains.target_pi = as_double_list("target_pi", *e);
  if (const auto* e = get("domains", "target_seed"))
    cfg.domains.target_seed = static_cast<std::uint64_t>(as_long("target_seed", *e));
  if (const auto* e = get("domains", "target_mean_shift")) {
    auto v = as_double_list("target_mean_shift", *e);
    if (v.size() == 1) v.assign(cfg.domains.d, v[0]);
    if (v.size() != cfg.domains.d)
      throw ConfigError(where(*e) + ": target_mean_shift expects 1 or d = " +
                        std::to_string(cfg.domains.d) + " values");
    cfg.domains.target_mean_shift = std::move(v);
  }
  if (const auto* e = get("domains", "target_noise_scale"))
    cfg.domains.target_noise_scale = as_double("target_noise_scale", *e);
  if (const auto* e = get("domains", "target_concept_rotation"))
    cfg.domains.target_concept_rotation = as_double("target_concept_rotation", *e);

  if (cfg.domains.class_scales.size() == 1 && cfg.domains.classes > 1)
    cfg.domains.class_scales.assign(cfg.domains.classes,
                                    cfg.domains.class_scales[0]);

  // [train]
  if (const auto* e = get("train", "learning_rate"))
    cfg.train.learning_rate = as_double("learning_rate", *e);
  if (const auto* e = get("train", "batch_budget"))
    cfg.train.batch_budget = as_long("batch_budget", *e);
  if (const auto* e = get("train", "iterations"))
    cfg.train.iterations = as_long("iterations", *e);
  if (const auto* e = get("train", "seeds"))
    cfg.train.seeds = as_seed_list("seeds", *e);
  if (const auto* e = get("train", "threshold_mode")) {
    if (e->value == "margin") cfg.train.threshold_mode = ThresholdMode::margin;
    else if (e->value == "frozen") cfg.train.threshold_mode = ThresholdMode::frozen;
    else
      throw ConfigError(where(*e) + ": threshold_mode expects margin|frozen, got '" +
                        e->value + "'");
  }
  if (const auto* e = get("train", "eval_every"))
    cfg.train.eval_every = as_long("eval_every", *e);
  if (const auto* e = get("train", "hidden_dim"))
    cfg.train.hidden_dim = static_cast<std::size_t>(as_long("hidden_dim", *e));
  if (const auto* e = get("train", "augment_std"))
    cfg.train.augment_std = as_double("augment_std", *e);
  if (const auto* e = get("train", "use_attention"))
    cfg.train.use_attention = as_bool("use_attention", *e);
  if (const auto* e = get("train", "use_class_weights"))
    cfg.train.use_class_weights = as_bool("use_class_weights", *e);
  if (const auto* e = get("train", "beta_init"))
    cfg.train.beta_init = as_double("beta_init", *e);
  if (const auto* e = get("train", "gamma_init"))
    cfg.train.gamma_init = as_double("gamma_init", *e);
  if (const auto* e = get("train", "alloc_hint")) {
    if (e->value == "source") cfg.train.alloc_hint = AllocHint::source;
    else if (e->value == "uniform") cfg.train.alloc_hint = AllocHint::uniform;
    else
      throw ConfigError(where(*e) + ": alloc_hint expects source|uniform, got '" +
                        e->value + "'");
  }

  // weight_decay and lambda1 are the same knob; setting both is ambiguous.
  const auto* wd = get("train", "weight_decay");
  const auto* l1 = get("loss", "lambda1");
  if (wd && l1)
    throw ConfigError(where(*l1) +
                      ": lambda1 duplicates [train] weight_decay set at " +
                      where(*wd));
  if (wd) cfg.train.weight_decay = as_double("weight_decay", *wd);
  if (l1) cfg.train.weight_decay = as_double("lambda1", *l1);
  cfg.train.loss.lambda1 = cfg.train.weight_decay;

  // [loss]
  if (const auto* e = get("loss", "focal_gamma"))
    cfg.train.loss.focal_gamma = as_double("focal_gamma", *e);
  if (const auto* e = get("loss", "lambda0"))
    cfg.train.loss.lambda0 = as_double("lambda0", *e);
  if (const auto* e = get("loss", "warmup_tau"))
    cfg.train.loss.warmup_tau = as_long("warmup_tau", *e);
  if (const auto* e = get("loss", "lambda2"))
    cfg.train.loss.lambda2 = as_double("lambda2", *e);
  if (const auto* e = get("loss", "lambda3"))
    cfg.train.loss.lambda3 = as_double("lambda3", *e);
  if (const auto* e = get("loss", "lambda_reg"))
    cfg.train.loss.lambda_reg = as_double("lambda_reg", *e);

  // [theory]
  if (const auto* e = get("theory", "convergence_seeds"))
    cfg.theory.convergence_seeds = static_cast<int>(as_long("convergence_seeds", *e));
  if (const auto* e = get("theory", "convergence_iters"))
    cfg.theory.convergence_iters = as_long("convergence_iters", *e);
  if (const auto* e = get("theory", "convergence_dims")) {
    cfg.theory.convergence_dims.clear();
    for (double v : as_double_list("convergence_dims", *e))
      cfg.theory.convergence_dims.push_back(static_cast<std::size_t>(v));
  }
  if (const auto* e = get("theory", "gradnorm_w_samples"))
    cfg.theory.gradnorm_w_samples = static_cast<int>(as_long("gradnorm_w_samples", *e));
  if (const auto* e = get("theory", "gradnorm_mc_draws"))
    cfg.theory.gradnorm_mc_draws = static_cast<int>(as_long("gradnorm_mc_draws", *e));
  if (const auto* e = get("theory", "timing_sizes")) {
    cfg.theory.timing_sizes.clear();
    std::istringstream is(e->value);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      const auto x = tok.find('x');
      if (x == std::string::npos)
        throw ConfigError(where(*e) + ": timing_sizes expects NxD entries, got '" +
                          tok + "'");
      try {
        cfg.theory.timing_sizes.emplace_back(
            parse_long(tok.substr(0, x)),
            static_cast<std::size_t>(parse_long(tok.substr(x + 1))));
      } catch (const ValueError&) {
        throw ConfigError(where(*e) + ": timing_sizes expects NxD entries, got '" +
                          tok + "'");
      }
    }
    if (cfg.theory.timing_sizes.empty())
      throw ConfigError(where(*e) + ": timing_sizes expects a nonempty list");
  }
  if (const auto* e = get("theory", "probe_iterations"))
    cfg.theory.probe_iterations = as_long("probe_iterations", *e);
  if (const auto* e = get("theory", "probe_learning_rate"))
    cfg.theory.probe_learning_rate = as_double("probe_learning_rate", *e);
  if (const auto* e = get("theory", "bound_train_iterations"))
    cfg.theory.bound_train_iterations = as_long("bound_train_iterations", *e);
  if (const auto* e = get("theory", "batch_budget_B"))
    cfg.theory.batch_budget_B = as_long("batch_budget_B", *e);

  // Cross-field validation (throws ValueError; CLI maps both to exit 2).
  cfg.train.validate();
  cfg.domains.source_spec().validate();
  cfg.domains.target_spec().validate();
  return cfg;
}

// Canonical serialization: re-parseable, stable ordering, 17-digit numbers.
inline std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto num = [](double v) { return fmt17(v); };
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
    return s;
  };
  os << "[domains]\n";
  os << "d = " << cfg.domains.d << "\n";
  os << "classes = " << cfg.domains.classes << "\n";
  os << "class_sep = " << num(cfg.domains.class_sep) << "\n";
  os << "class_scales = " << list(cfg.domains.class_scales) << "\n";
  {
    const auto means = cfg.domains.resolved_means();
    std::string s;
    for (std::size_t c = 0; c < means.size(); ++c)
      for (std::size_t j = 0; j < means[c].size(); ++j)
        s += (s.empty() ? "" : ",") + num(means[c][j]);
    os << "class_means = " << s << "\n";
  }
  os << "source_n = " << cfg.domains.source_n << "\n";
  os << "source_pi = " << list(cfg.domains.source_pi) << "\n";
  os << "source_seed = " << cfg.domains.source_seed << "\n";
  os << "source_noise_scale = " << num(cfg.domains.source_noise_scale) << "\n";
  os << "target_n = " << cfg.domains.target_n << "\n";
  os << "target_pi = " << list(cfg.domains.target_pi) << "\n";
  os << "target_seed = " << cfg.domains.target_seed << "\n";
  os << "target_mean_shift = "
     << list(cfg.domains.target_mean_shift.empty()
                 ? std::vector<double>(cfg.domains.d, 0.0)
                 : cfg.domains.target_mean_shift)
     << "\n";
  os << "target_noise_scale = " << num(cfg.domains.target_noise_scale) << "\n";
  os << "target_concept_rotation = " << num(cfg.domains.target_concept_rotation)
     << "\n";
  os << "\n[train]\n";
  os << "learning_rate = " << num(cfg.train.learning_rate) << "\n";
  os << "batch_budget = " << cfg.train.batch_budget << "\n";
  os << "weight_decay = " << num(cfg.train.weight_decay) << "\n";
  os << "iterations = " << cfg.train.iterations << "\n";
  {
    std::string s;
    for (std::size_t i = 0; i < cfg.train.seeds.size(); ++i)
      s += (i ? "," : "") + std::to_string(cfg.train.seeds[i]);
    os << "seeds = " << s << "\n";
  }
  os << "threshold_mode = "
     << (cfg.train.threshold_mode == ThresholdMode::margin ? "margin" : "frozen")
     << "\n";
  os << "eval_every = " << cfg.train.eval_every << "\n";
  os << "hidden_dim = " << cfg.train.hidden_dim << "\n";
  os << "augment_std = " << num(cfg.train.augment_std) << "\n";
  os << "use_attention = " << (cfg.train.use_attention ? "true" : "false") << "\n";
  os << "use_class_weights = " << (cfg.train.use_class_weights ? "true" : "false")
     << "\n";
  os << "beta_init = " << num(cfg.train.beta_init) << "\n";
  os << "gamma_init = " << num(cfg.train.gamma_init) << "\n";
  os << "alloc_hint = "
     << (cfg.train.alloc_hint == AllocHint::source ? "source" : "uniform") << "\n";
  os << "\n[loss]\n";
  os << "focal_gamma = " << num(cfg.train.loss.focal_gamma) << "\n";
  os << "lambda0 = " << num(cfg.train.loss.lambda0) << "\n";
  os << "warmup_tau = " << cfg.train.loss.warmup_tau << "\n";
  os << "lambda2 = " << num(cfg.train.loss.lambda2) << "\n";
  os << "lambda3 = " << num(cfg.train.loss.lambda3) << "\n";
  os << "lambda_reg = " << num(cfg.train.loss.lambda_reg) << "\n";
  os << "\n[theory]\n";
  os << "convergence_seeds = " << cfg.theory.convergence_seeds << "\n";
  os << "convergence_iters = " << cfg.theory.convergence_iters << "\n";
  {
    std::string s;
    for (std::size_t i = 0; i < cfg.theory.convergence_dims.size(); ++i)
      s += (i ? "," : "") + std::to_string(cfg.theory.convergence_dims[i]);
    os << "convergence_dims = " << s << "\n";
  }
  os << "gradnorm_w_samples = " << cfg.theory.gradnorm_w_samples << "\n";
  os << "gradnorm_mc_draws = " << cfg.theory.gradnorm_mc_draws << "\n";
  {
    std::string s;
    for (std::size_t i = 0; i < cfg.theory.timing_sizes.size(); ++i)
      s += (i ? "," : "") + std::to_string(cfg.theory.timing_sizes[i].first) +
           "x" + std::to_string(cfg.theory.timing_sizes[i].second);
    os << "timing_sizes = " << s << "\n";
  }
  os << "probe_iterations = " << cfg.theory.probe_iterations << "\n";
  os << "probe_learning_rate = " << num(cfg.theory.probe_learning_rate) << "\n";
  os << "bound_train_iterations = " << cfg.theory.bound_train_iterations << "\n";
  os << "batch_budget_B = " << cfg.theory.batch_budget_B << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Presets: the four source->target settings at desk scale. Proportions
// follow the study protocol (source 28.9% / 71.1%; targets 45.3%, 81.2%,
// 66.6% positive class); noise_scale encodes the quality degradation
// ordering of the target acquisition systems.
// ---------------------------------------------------------------------------

inline std::vector<std::string> preset_names() {
  return {"ed4-ed4", "ed4-ed3", "ed4-ed2", "ed4-ed1"};
}

inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.domains.d = 6;
  cfg.domains.classes = 2;
  // Shared class geometry across the four settings: the classes separate
  // redundantly along dims 0 and 1 with strongly different spreads, so the
  // decision boundary is curved and overlap mass is substantial. Target
  // shifts ride mostly along dim 0 (recoverable by alignment) with a smaller
  // dim-1 component that survives alignment as a decision offset. Dims 2..5
  // are noise.
  cfg.domains.class_means = {{-1.1, -1.1, 0.0, 0.0, 0.0, 0.0},
                             {1.1, 1.1, 0.0, 0.0, 0.0, 0.0}};
  cfg.domains.class_scales = {0.5, 1.6};
  cfg.domains.source_n = 1698;
  cfg.domains.source_pi = {0.289, 0.711};
  cfg.domains.source_seed = 11;
  cfg.domains.target_seed = 22;
  // Desk-scale protocol: a deliberately small network (capacity is under
  // pressure, mechanisms are under test) and a step/iteration trade against
  // the full-scale protocol values, which remain reachable via the config.
  cfg.train.hidden_dim = 3;
  cfg.train.learning_rate = 0.01;
  cfg.train.iterations = 6000;
  cfg.train.eval_every = 500;
  cfg.train.loss.warmup_tau = 1000;
  cfg.train.loss.lambda0 = 0.1;
  // Thresholds kept frozen at beta=0.7: at desk scale the margin-trained
  // variant lets the classifier absorb the offsets, neutralizing the
  // decision-time correction the mechanism exists for.
  cfg.train.threshold_mode = ThresholdMode::frozen;
  cfg.train.beta_init = 0.7;

  if (name == "ed4-ed4") {
    cfg.domains.target_n = 1698;
    cfg.domains.target_pi = {0.289, 0.711};
    cfg.domains.target_noise_scale = 0.0;
  } else if (name == "ed4-ed3") {
    cfg.domains.target_n = 258;
    cfg.domains.target_pi = {0.453, 0.547};
    cfg.domains.target_mean_shift = {2.2, 0.5, 0.0, 0.0, 0.0, 0.0};
    cfg.domains.target_noise_scale = 0.1;
  } else if (name == "ed4-ed2") {
    cfg.domains.target_n = 69;
    cfg.domains.target_pi = {0.812, 0.188};
    cfg.domains.target_mean_shift = {2.4, 0.6, 0.0, 0.0, 0.0, 0.0};
    cfg.domains.target_noise_scale = 0.3;
  } else if (name == "ed4-ed1") {
    // Hardest setting: the shift rides both class-separating directions, so
    // the minority target cluster lands on the majority source cluster.
    // Forcing the marginals together under the large label shift then mixes
    // the classes, and the adversarial weight turns destructive as it grows.
    // Per-setting protocol (line-searched separately): a wider network whose
    // h/2 discriminator can express the class-dependent domain signal, and a
    // longer run so the strong-lambda regime fully develops.
    cfg.domains.target_n = 296;
    cfg.domains.target_pi = {0.666, 0.334};
    cfg.domains.target_mean_shift = {2.4, 2.4, 0.0, 0.0, 0.0, 0.0};
    cfg.domains.target_noise_scale = 0.5;
    cfg.train.hidden_dim = 8;
    cfg.train.iterations = 14000;
  } else {
    throw ConfigError("unknown preset '" + name + "'; valid: ed4-ed4, ed4-ed3, ed4-ed2, ed4-ed1");
  }
  return cfg;
}

inline ExperimentConfig resolve_config(const std::string& preset,
                                       const std::string& config_path,
                                       long seed_override = -1) {
  ConfigDocument doc;
  if (!preset.empty())
    doc = parse_config_text(config_to_text(preset_config(preset)),
                            "preset:" + preset);
  if (!config_path.empty()) {
    ConfigDocument file_doc = parse_config_file(config_path);
    doc.merge_from(file_doc);
  }
  if (doc.sections.empty())
    throw ConfigError("no configuration given: pass --config and/or --preset");
  ExperimentConfig cfg = materialize_config(doc);
  if (seed_override >= 0) {
    cfg.train.seeds = {static_cast<std::uint64_t>(seed_override)};
    cfg.train.validate();
  }
  return cfg;
}

}  // namespace iada
