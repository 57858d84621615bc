#pragma once

// Multi-run experiments. Every grid point is an independent task; results are
// stored by grid index, so the worker count never changes the output.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "logitreg/analytics.hpp"
#include "logitreg/datagen.hpp"
#include "logitreg/errors.hpp"
#include "logitreg/trainer.hpp"

namespace logitreg {

using Coords = std::vector<std::pair<std::string, double>>;

struct PointSummary {
  Coords coords;
  bool ok = true;
  std::string error;
  std::int64_t diverged_epoch = -1;

  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double cos_sim = std::numeric_limits<double>::quiet_NaN();
  double cos_lda = std::numeric_limits<double>::quiet_NaN();
  double weight_norm = std::numeric_limits<double>::quiet_NaN();
  double logit_mean = std::numeric_limits<double>::quiet_NaN();
  double logit_std = std::numeric_limits<double>::quiet_NaN();
  double learning_rate_used = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::int64_t> grokking_time;
  bool non_monotone_test_loss = false;

  std::uint64_t seed = 0;
  std::uint64_t data_checksum = 0;
  std::optional<TrainTrace> trace;

  std::optional<double> coord(std::string_view name) const {
    for (const auto& [k, v] : coords)
      if (k == name) return v;
    return std::nullopt;
  }
};

struct Crossing {
  double sigma_f = 0.0;
  std::optional<double> sigma_n_star;  // absent: no sign change in range
};

struct SweepResult {
  std::string kind;
  std::uint64_t master_seed = 0;
  std::vector<PointSummary> points;
  std::vector<Crossing> crossings;
  Coords derived;

  std::optional<double> derived_value(std::string_view name) const {
    for (const auto& [k, v] : derived)
      if (k == name) return v;
    return std::nullopt;
  }
  bool all_ok() const {
    return std::all_of(points.begin(), points.end(), [](const PointSummary& p) { return p.ok; });
  }
};

struct SweepOptions {
  unsigned workers = 0;  // 0: hardware concurrency, capped by LRL_WORKERS
  bool keep_traces = false;
  double grok_threshold = 0.99;
};

/// Effective worker count: the request (or hardware concurrency) capped by
/// the LRL_WORKERS environment variable when it holds a positive integer.
inline unsigned worker_count(unsigned requested) {
  unsigned n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LRL_WORKERS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

/// Runs f(0..n-1) on up to `workers` threads. The first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& f) {
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(worker_count(workers), n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Root of a(x) - b(x) between the piecewise-linear interpolants of two
/// sampled curves: first bracketing segment, then bisection.
inline std::optional<double> find_crossing(const std::vector<double>& xs, const std::vector<double>& a,
                                           const std::vector<double>& b) {
  if (xs.size() != a.size() || xs.size() != b.size()) throw ContractError("curve lengths differ");
  if (xs.size() < 2) return std::nullopt;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw ContractError("abscissae must be strictly increasing");
  auto diff = [&](std::size_t i) { return a[i] - b[i]; };
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double d0 = diff(i), d1 = diff(i + 1);
    if (d0 == 0.0 && d1 == 0.0) continue;
    if (d0 == 0.0) {
      if (i == 0) continue;
      return xs[i];
    }
    if ((d0 < 0.0) == (d1 < 0.0) && d1 != 0.0) continue;
    if (d1 == 0.0) return xs[i + 1];
    auto interp = [&](double x) {
      const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
      return (a[i] + t * (a[i + 1] - a[i])) - (b[i] + t * (b[i + 1] - b[i]));
    };
    double lo = xs[i], hi = xs[i + 1];
    const bool lo_neg = d0 < 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double v = interp(mid);
      if (v == 0.0) return mid;
      if ((v < 0.0) == lo_neg)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }
  return std::nullopt;
}

inline std::string coord_name(std::string_view base, double v) {
  std::ostringstream os;
  os << base << '=' << v;
  return os.str();
}

namespace detail {

/// Trains one point and summarizes it. Library errors are recorded, not thrown.
inline PointSummary run_point(const Dataset& train_data, const Dataset& test_data, const TrainConfig& cfg,
                              Coords coords, const SweepOptions& opts,
                              const Eigen::VectorXd* lda = nullptr) {
  PointSummary p;
  p.coords = std::move(coords);
  p.seed = train_data.spec.seed;
  p.data_checksum = checksum(train_data);
  try {
    TrainResult r = train(train_data, test_data, cfg);
    const TraceRow& f = r.trace.final_row();
    p.train_loss = f.train_loss;
    p.test_loss = f.test_loss;
    p.train_acc = f.train_acc;
    p.test_acc = f.test_acc;
    p.cos_sim = f.cos_sim;
    p.weight_norm = f.weight_norm;
    p.learning_rate_used = r.trace.learning_rate_used;
    p.grokking_time = grokking_time(r.trace, opts.grok_threshold);
    p.non_monotone_test_loss = non_monotone_test_loss(r.trace);
    if (!r.params.multiclass) {
      const MeanStd st = logit_stats(r.params, train_data);
      p.logit_mean = st.mean;
      p.logit_std = st.std;
      if (lda && r.params.S.norm() > 0.0) p.cos_lda = lda->dot(r.params.S) / r.params.S.norm();
    }
    if (opts.keep_traces) p.trace = std::move(r.trace);
  } catch (const DivergedAtEpoch& e) {
    p.ok = false;
    p.error = e.what();
    p.diverged_epoch = e.epoch();
  } catch (const Error& e) {
    p.ok = false;
    p.error = e.what();
  }
  return p;
}

inline double spread(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return *mx - *mn;
}

/// Collects a field over ok points that match a predicate.
template <class Pred, class Field>
std::vector<double> collect(const std::vector<PointSummary>& pts, Pred pred, Field field) {
  std::vector<double> out;
  for (const auto& p : pts)
    if (p.ok && pred(p)) out.push_back(field(p));
  return out;
}

inline TrainConfig with_alpha(TrainConfig cfg, double alpha) {
  cfg.loss.alpha = alpha;
  return cfg;
}

}  // namespace detail

/// One dataset, one training run per alpha.
inline SweepResult alpha_sweep(const BinaryDataSpec& base, const std::vector<double>& alphas,
                               const TrainConfig& cfg, const SweepOptions& opts = {}) {
  if (alphas.empty()) throw ContractError("empty alpha grid");
  const auto [tr, te] = sample_binary(base);
  const Eigen::VectorXd lda = lda_direction(tr);
  SweepResult res;
  res.kind = "alpha";
  res.master_seed = base.seed;
  res.points.resize(alphas.size());
  parallel_for(alphas.size(), opts.workers, [&](std::size_t i) {
    res.points[i] = detail::run_point(tr, te, detail::with_alpha(cfg, alphas[i]), {{"alpha", alphas[i]}}, opts,
                                      &lda);
  });
  auto positive = [](const PointSummary& p) { return *p.coord("alpha") > 0.0; };
  const auto cos = detail::collect(res.points, positive, [](const PointSummary& p) { return p.cos_lda; });
  const auto norms = detail::collect(res.points, positive, [](const PointSummary& p) { return p.weight_norm; });
  if (!cos.empty()) {
    res.derived.emplace_back("cos_lda_spread", detail::spread(cos));
    const auto [mn, mx] = std::minmax_element(norms.begin(), norms.end());
    res.derived.emplace_back("norm_ratio", *mn > 0.0 ? *mx / *mn : std::numeric_limits<double>::infinity());
  }
  return res;
}

/// d = round(lambda * n_train) per lambda; all alphas share each lambda's data.
inline SweepResult lambda_sweep(const BinaryDataSpec& base, const std::vector<double>& lambdas,
                                const std::vector<double>& alphas, const TrainConfig& cfg,
                                const SweepOptions& opts = {}) {
  if (lambdas.empty() || alphas.empty()) throw ContractError("empty sweep grid");
  std::vector<std::pair<Dataset, Dataset>> data;
  for (double lam : lambdas) {
    BinaryDataSpec s = base;
    s.d = dimension_for(lam, base.n_train);
    data.push_back(sample_binary(s));
  }
  SweepResult res;
  res.kind = "lambda";
  res.master_seed = base.seed;
  res.points.resize(lambdas.size() * alphas.size());
  parallel_for(res.points.size(), opts.workers, [&](std::size_t idx) {
    const std::size_t i = idx / alphas.size(), j = idx % alphas.size();
    res.points[idx] = detail::run_point(data[i].first, data[i].second, detail::with_alpha(cfg, alphas[j]),
                                        {{"lambda", lambdas[i]}, {"alpha", alphas[j]}}, opts);
  });
  for (double a : alphas) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& p : res.points)
      if (p.ok && *p.coord("alpha") == a && p.test_acc == 1.0 && !(best >= *p.coord("lambda")))
        best = *p.coord("lambda");
    res.derived.emplace_back(coord_name("lambda_threshold_alpha", a), best);
  }
  return res;
}

/// Paired datasets (same seed) across sigma_n; all alphas share each one.
inline SweepResult sigma_n_sweep(const BinaryDataSpec& base, const std::vector<double>& sigma_ns,
                                 const std::vector<double>& alphas, const TrainConfig& cfg,
                                 const SweepOptions& opts = {}) {
  if (sigma_ns.empty() || alphas.empty()) throw ContractError("empty sweep grid");
  std::vector<std::pair<Dataset, Dataset>> data;
  for (double sn : sigma_ns) {
    BinaryDataSpec s = base;
    s.sigma_n = sn;
    data.push_back(sample_binary(s));
  }
  SweepResult res;
  res.kind = "sigma_n";
  res.master_seed = base.seed;
  res.points.resize(sigma_ns.size() * alphas.size());
  parallel_for(res.points.size(), opts.workers, [&](std::size_t idx) {
    const std::size_t i = idx / alphas.size(), j = idx % alphas.size();
    res.points[idx] = detail::run_point(data[i].first, data[i].second, detail::with_alpha(cfg, alphas[j]),
                                        {{"sigma_n", sigma_ns[i]}, {"alpha", alphas[j]}}, opts);
  });
  for (double a : alphas) {
    const auto acc = detail::collect(
        res.points, [a](const PointSummary& p) { return *p.coord("alpha") == a; },
        [](const PointSummary& p) { return p.test_acc; });
    res.derived.emplace_back(coord_name("accuracy_spread_alpha", a), detail::spread(acc));
  }
  return res;
}

/// For each sigma_f, the sigma_n where regularized and unregularized test
/// accuracy curves cross.
inline SweepResult phase_boundary(const BinaryDataSpec& base, const std::vector<double>& sigma_fs,
                                  const std::vector<double>& sigma_ns, double alpha_plus,
                                  const TrainConfig& cfg, const SweepOptions& opts = {}) {
  if (sigma_fs.empty() || sigma_ns.size() < 2) throw ContractError("phase grid too small");
  if (!(alpha_plus > 0.0)) throw ContractError("alpha_plus must be > 0");
  const std::size_t nf = sigma_fs.size(), nn = sigma_ns.size();
  std::vector<std::pair<Dataset, Dataset>> data;
  for (double sf : sigma_fs)
    for (double sn : sigma_ns) {
      BinaryDataSpec s = base;
      s.sigma_f = sf;
      s.sigma_n = sn;
      data.push_back(sample_binary(s));
    }
  const std::array<double, 2> alphas{0.0, alpha_plus};
  SweepResult res;
  res.kind = "phase_boundary";
  res.master_seed = base.seed;
  res.points.resize(nf * nn * 2);
  parallel_for(res.points.size(), opts.workers, [&](std::size_t idx) {
    const std::size_t cell = idx / 2, j = idx % 2;
    const std::size_t f = cell / nn, n = cell % nn;
    res.points[idx] = detail::run_point(data[cell].first, data[cell].second, detail::with_alpha(cfg, alphas[j]),
                                        {{"sigma_f", sigma_fs[f]}, {"sigma_n", sigma_ns[n]}, {"alpha", alphas[j]}},
                                        opts);
  });
  for (std::size_t f = 0; f < nf; ++f) {
    Crossing c;
    c.sigma_f = sigma_fs[f];
    std::vector<double> plain(nn), reg(nn);
    bool complete = true;
    for (std::size_t n = 0; n < nn; ++n) {
      const auto& p0 = res.points[(f * nn + n) * 2];
      const auto& p1 = res.points[(f * nn + n) * 2 + 1];
      complete = complete && p0.ok && p1.ok;
      plain[n] = p0.test_acc;
      reg[n] = p1.test_acc;
    }
    if (complete) c.sigma_n_star = find_crossing(sigma_ns, reg, plain);
    res.crossings.push_back(c);
  }
  return res;
}

/// Grokking times at threshold opts.grok_threshold for each alpha.
inline SweepResult grokking_grid(const BinaryDataSpec& base, const std::vector<double>& alphas,
                                 const TrainConfig& cfg, const SweepOptions& opts = {}) {
  if (alphas.empty()) throw ContractError("empty alpha grid");
  const auto [tr, te] = sample_binary(base);
  SweepResult res;
  res.kind = "grokking";
  res.master_seed = base.seed;
  res.points.resize(alphas.size());
  parallel_for(alphas.size(), opts.workers, [&](std::size_t i) {
    res.points[i] = detail::run_point(tr, te, detail::with_alpha(cfg, alphas[i]), {{"alpha", alphas[i]}}, opts);
  });
  return res;
}

inline SweepResult grokking_grid(const MulticlassDataSpec& base, const std::vector<double>& alphas,
                                 const TrainConfig& cfg, const SweepOptions& opts = {}) {
  if (alphas.empty()) throw ContractError("empty alpha grid");
  const auto [tr, te] = sample_multiclass(base);
  SweepResult res;
  res.kind = "grokking_multiclass";
  res.master_seed = base.seed;
  res.points.resize(alphas.size());
  parallel_for(alphas.size(), opts.workers, [&](std::size_t i) {
    res.points[i] = detail::run_point(tr, te, detail::with_alpha(cfg, alphas[i]), {{"alpha", alphas[i]}}, opts);
  });
  return res;
}

/// alpha = 0 with weight decay gamma: a lambda sweep then a sigma_n sweep.
inline SweepResult weight_decay_baseline(const BinaryDataSpec& base, double gamma,
                                         const std::vector<double>& lambdas,
                                         const std::vector<double>& sigma_ns, const TrainConfig& cfg,
                                         const SweepOptions& opts = {}) {
  if (!(gamma >= 0.0)) throw ContractError("gamma must be >= 0");
  TrainConfig c = cfg;
  c.loss.alpha = 0.0;
  c.loss.weight_decay_gamma = gamma;
  SweepResult res;
  res.kind = "weight_decay";
  res.master_seed = base.seed;
  if (!lambdas.empty()) {
    SweepResult l = lambda_sweep(base, lambdas, {0.0}, c, opts);
    for (auto& p : l.points) {
      p.coords.emplace_back("gamma", gamma);
      res.points.push_back(std::move(p));
    }
    res.derived.emplace_back("lambda_threshold", *l.derived_value(coord_name("lambda_threshold_alpha", 0.0)));
  }
  if (!sigma_ns.empty()) {
    SweepResult s = sigma_n_sweep(base, sigma_ns, {0.0}, c, opts);
    for (auto& p : s.points) {
      p.coords.emplace_back("gamma", gamma);
      res.points.push_back(std::move(p));
    }
    res.derived.emplace_back("accuracy_spread_sigma_n", *s.derived_value(coord_name("accuracy_spread_alpha", 0.0)));
  }
  return res;
}

}  // namespace logitreg
