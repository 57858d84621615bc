#pragma once

// Run configuration: a flat JSON object plus an optional "sweep" object.
// Unknown keys and out-of-range values raise ConfigError naming the key.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "logitreg/datagen.hpp"
#include "logitreg/errors.hpp"
#include "logitreg/losses.hpp"
#include "logitreg/trainer.hpp"

namespace logitreg {

struct SweepGrid {
  std::vector<double> alphas = {0.0, 0.05, 0.1, 0.2, 0.4, 0.8};
  std::vector<double> lambdas = {0.25, 0.5, 0.6, 0.7, 0.8, 0.95, 1.2};
  std::vector<double> sigma_ns = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> sigma_fs = {0.5, 0.8};
  double alpha_plus = 0.4;
};

struct RunConfig {
  // data
  double lambda = 0.7;
  int n_train = 400;
  int n_test = 2000;
  double mu_f = 1.0;
  double sigma_f = 0.0;
  double sigma_n = 1.0;
  int num_classes = 2;
  std::string noise = "gaussian";
  double nu = 0.0;
  bool exact_balance = false;
  std::optional<std::string> train_file;
  std::optional<std::string> test_file;

  // loss
  double alpha = 0.2;
  RegularizerKind loss_kind = RegularizerKind::quadratic;
  double weight_decay = 0.0;

  // optimization
  Optimizer optimizer = Optimizer::gd;
  double learning_rate = 0.1;
  std::int64_t epochs = 20000;
  std::int64_t log_every = 100;
  bool use_bias = false;
  StepPolicy step_policy = StepPolicy::fixed;
  InitSpec::Kind init = InitSpec::Kind::zeros;
  double init_scale = 0.0;
  double early_stop_grad_norm = 0.0;

  // embedding tools
  double rescale_gamma = 1.0;

  std::uint64_t seed = 0;
  std::string output_dir = "out";
  SweepGrid sweep;

  int d() const { return dimension_for(lambda, n_train); }

  BinaryDataSpec binary_spec() const {
    BinaryDataSpec s;
    s.d = d();
    s.n_train = n_train;
    s.n_test = n_test;
    s.mu_f = mu_f;
    s.sigma_f = sigma_f;
    s.sigma_n = sigma_n;
    const NoiseDist dist = noise == "student_t" ? NoiseDist::student_t(nu) : NoiseDist::gaussian();
    s.dist_f = dist;
    s.dist_n = dist;
    s.seed = seed;
    s.exact_balance = exact_balance;
    return s;
  }

  MulticlassDataSpec multiclass_spec() const {
    MulticlassDataSpec s;
    static_cast<BinaryDataSpec&>(s) = binary_spec();
    s.num_classes = num_classes;
    return s;
  }

  TrainConfig train_config() const {
    TrainConfig c;
    c.optimizer = optimizer;
    c.learning_rate = learning_rate;
    c.epochs = epochs;
    c.log_every = log_every;
    c.loss.alpha = alpha;
    c.loss.kind = loss_kind;
    c.loss.num_classes = num_classes;
    c.loss.weight_decay_gamma = weight_decay;
    c.use_bias = use_bias;
    c.step_policy = step_policy;
    c.init.kind = init;
    c.init.scale = init_scale;
    c.init.seed = seed;
    c.early_stop_grad_norm = early_stop_grad_norm;
    return c;
  }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {}

  template <class F>
  void with(const char* key, F&& f) {
    seen_.insert(key);
    if (auto it = obj_.find(key); it != obj_.end()) f(*it, prefix_ + key);
  }

  void real(const char* key, double& dst) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if (!v.is_number()) throw ConfigError(k, "expected a number");
      dst = v.get<double>();
    });
  }
  template <class I>
  void integer(const char* key, I& dst) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if constexpr (std::is_unsigned_v<I>)
        if (v.is_number() && v.get<double>() < 0.0) throw ConfigError(k, "must be >= 0");
      if (v.is_number_integer() || v.is_number_unsigned()) {
        dst = v.get<I>();
      } else if (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<I>(v.get<double>()))) {
        dst = static_cast<I>(v.get<double>());
      } else {
        throw ConfigError(k, "expected an integer");
      }
    });
  }
  void boolean(const char* key, bool& dst) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if (!v.is_boolean()) throw ConfigError(k, "expected true or false");
      dst = v.get<bool>();
    });
  }
  void string(const char* key, std::string& dst) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if (!v.is_string()) throw ConfigError(k, "expected a string");
      dst = v.get<std::string>();
    });
  }
  void opt_string(const char* key, std::optional<std::string>& dst) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if (v.is_null()) return;
      if (!v.is_string()) throw ConfigError(k, "expected a string");
      dst = v.get<std::string>();
    });
  }
  void reals(const char* key, std::vector<double>& dst) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if (!v.is_array()) throw ConfigError(k, "expected an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(k, "expected an array of numbers");
        out.push_back(e.get<double>());
      }
      dst = std::move(out);
    });
  }
  template <class E, class Parse>
  void enumeration(const char* key, E& dst, Parse parse) {
    with(key, [&](const nlohmann::json& v, const std::string& k) {
      if (!v.is_string()) throw ConfigError(k, "expected a string");
      try {
        dst = parse(v.get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(k, e.what());
      }
    });
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(prefix_ + it.key(), "unknown key");
  }

 private:
  const nlohmann::json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "gd") return Optimizer::gd;
  if (s == "adam") return Optimizer::adam;
  throw std::invalid_argument("expected 'gd' or 'adam'");
}
inline StepPolicy step_policy_from_string(const std::string& s) {
  if (s == "fixed") return StepPolicy::fixed;
  if (s == "capped") return StepPolicy::capped;
  throw std::invalid_argument("expected 'fixed' or 'capped'");
}
inline InitSpec::Kind init_from_string(const std::string& s) {
  if (s == "zeros") return InitSpec::Kind::zeros;
  if (s == "gaussian") return InitSpec::Kind::gaussian;
  throw std::invalid_argument("expected 'zeros' or 'gaussian'");
}

inline void validate(const RunConfig& c) {
  require(c.lambda > 0.0, "lambda", "must be > 0");
  require(c.n_train >= 1, "n_train", "must be >= 1");
  require(c.n_test >= 0, "n_test", "must be >= 0");
  require(c.d() >= 2, "lambda", "lambda * n_train must round to at least 2");
  require(c.mu_f >= 0.0, "mu_f", "must be >= 0");
  require(c.sigma_f >= 0.0, "sigma_f", "must be >= 0");
  require(c.sigma_n >= 0.0, "sigma_n", "must be >= 0");
  require(c.num_classes >= 2, "num_classes", "must be >= 2");
  require(c.num_classes - 1 <= c.d(), "num_classes", "num_classes - 1 must not exceed d");
  require(c.noise == "gaussian" || c.noise == "student_t", "noise", "expected 'gaussian' or 'student_t'");
  require(c.noise != "student_t" || c.nu > 2.0, "nu", "student_t requires nu > 2");
  require(c.alpha >= 0.0 && c.alpha < 1.0, "alpha", "must lie in [0, 1)");
  require(c.weight_decay >= 0.0, "weight_decay", "must be >= 0");
  require(c.learning_rate > 0.0, "learning_rate", "must be > 0");
  require(c.epochs >= 1, "epochs", "must be >= 1");
  require(c.log_every >= 1, "log_every", "must be >= 1");
  require(c.init_scale >= 0.0, "init_scale", "must be >= 0");
  require(c.early_stop_grad_norm >= 0.0, "early_stop_grad_norm", "must be >= 0");
  require(c.rescale_gamma >= 0.0, "rescale_gamma", "must be >= 0");
  for (double a : c.sweep.alphas) require(a >= 0.0 && a < 1.0, "sweep.alphas", "entries must lie in [0, 1)");
  for (double l : c.sweep.lambdas)
    require(l > 0.0 && dimension_for(l, c.n_train) >= 2, "sweep.lambdas", "entries must give d >= 2");
  for (double s : c.sweep.sigma_ns) require(s >= 0.0, "sweep.sigma_ns", "entries must be >= 0");
  for (double s : c.sweep.sigma_fs) require(s >= 0.0, "sweep.sigma_fs", "entries must be >= 0");
  require(c.sweep.alpha_plus > 0.0 && c.sweep.alpha_plus < 1.0, "sweep.alpha_plus", "must lie in (0, 1)");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  RunConfig c;
  detail::ConfigReader r(j, "");
  r.real("lambda", c.lambda);
  r.integer("n_train", c.n_train);
  r.integer("n_test", c.n_test);
  r.real("mu_f", c.mu_f);
  r.real("sigma_f", c.sigma_f);
  r.real("sigma_n", c.sigma_n);
  r.integer("num_classes", c.num_classes);
  r.string("noise", c.noise);
  r.real("nu", c.nu);
  r.boolean("exact_balance", c.exact_balance);
  r.opt_string("train_file", c.train_file);
  r.opt_string("test_file", c.test_file);
  r.real("alpha", c.alpha);
  r.enumeration("loss_kind", c.loss_kind, [](const std::string& s) { return regularizer_from_string(s); });
  r.real("weight_decay", c.weight_decay);
  r.enumeration("optimizer", c.optimizer, detail::optimizer_from_string);
  r.real("learning_rate", c.learning_rate);
  r.integer("epochs", c.epochs);
  r.integer("log_every", c.log_every);
  r.boolean("use_bias", c.use_bias);
  r.enumeration("step_policy", c.step_policy, detail::step_policy_from_string);
  r.enumeration("init", c.init, detail::init_from_string);
  r.real("init_scale", c.init_scale);
  r.real("early_stop_grad_norm", c.early_stop_grad_norm);
  r.real("rescale_gamma", c.rescale_gamma);
  r.integer("seed", c.seed);
  r.string("output_dir", c.output_dir);
  r.with("sweep", [&](const nlohmann::json& v, const std::string& k) {
    if (!v.is_object()) throw ConfigError(k, "expected an object");
    detail::ConfigReader s(v, "sweep.");
    s.reals("alphas", c.sweep.alphas);
    s.reals("lambdas", c.sweep.lambdas);
    s.reals("sigma_ns", c.sweep.sigma_ns);
    s.reals("sigma_fs", c.sweep.sigma_fs);
    s.real("alpha_plus", c.sweep.alpha_plus);
    s.reject_unknown();
  });
  r.reject_unknown();
  detail::validate(c);
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FileError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace logitreg
