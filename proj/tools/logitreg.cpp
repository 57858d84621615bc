// logitreg: command-line front end.
//
//   logitreg run            single training run from a config
//   logitreg sweep          alpha / lambda / sigma_n / weight-decay sweeps
//   logitreg phase-diagram  regularized-vs-plain accuracy crossings
//   logitreg grok           grokking times over an alpha grid
//   logitreg embed-geometry effective noise amplitudes of LRLB files
//   logitreg rescale-orth   rescale the orthogonal component of LRLB files
//   logitreg plot           SVG charts from a trace CSV or sweep summary

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "logitreg/logitreg.hpp"

namespace fs = std::filesystem;
using namespace logitreg;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run configuration");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory (overrides the config)");
}

RunConfig load(const Common& c) {
  RunConfig cfg = c.config.empty() ? parse_config_text("{}") : parse_config_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  return cfg;
}

std::string point_tag(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "point_%03zu", i);
  return buf;
}

void write_traces(const SweepResult& r, const fs::path& dir) {
  for (std::size_t i = 0; i < r.points.size(); ++i)
    if (r.points[i].trace) write_trace_csv(dir / "traces" / (point_tag(i) + ".csv"), *r.points[i].trace);
}

void report_failures(const SweepResult& r) {
  for (const auto& p : r.points)
    if (!p.ok) {
      std::cerr << "point";
      for (const auto& [k, v] : p.coords) std::cerr << ' ' << k << '=' << v;
      std::cerr << " failed: " << p.error << '\n';
    }
}

/// Test accuracy against `x_key`, one curve per value of `group_key`.
svg::Chart accuracy_vs(const SweepResult& r, const std::string& x_key, const std::string& group_key,
                       const std::string& title, bool log_x) {
  std::map<double, svg::Series> curves;
  for (const auto& p : r.points) {
    const auto x = p.coord(x_key);
    if (!x || !p.ok) continue;
    const double g = p.coord(group_key).value_or(0.0);
    auto& s = curves[g];
    s.name = coord_name(group_key, g);
    s.x.push_back(*x);
    s.y.push_back(p.test_acc);
  }
  svg::Chart c(title, {x_key, log_x, {}, {}}, {"test accuracy", false, {}, {}});
  for (auto& [g, s] : curves) c.add(std::move(s));
  return c;
}

std::pair<Dataset, Dataset> file_datasets(const RunConfig& cfg) {
  const Dataset train = to_dataset(read_embeddings(*cfg.train_file), cfg.num_classes > 2);
  Dataset test;
  if (cfg.test_file) {
    test = to_dataset(read_embeddings(*cfg.test_file), cfg.num_classes > 2);
  } else {
    test = train;
    test.features.resize(0, train.dim());
    test.labels.clear();
  }
  return {train, test};
}

int cmd_run(const RunConfig& cfg) {
  const fs::path out = cfg.output_dir;
  Dataset train, test;
  std::optional<Eigen::MatrixXd> reference;
  if (cfg.train_file) {
    std::tie(train, test) = file_datasets(cfg);
    reference = feature_geometry(train).signal_basis;
  } else if (cfg.num_classes == 2) {
    std::tie(train, test) = sample_binary(cfg.binary_spec());
  } else {
    std::tie(train, test) = sample_multiclass(cfg.multiclass_spec());
  }
  const TrainResult r = logitreg::train(train, test, cfg.train_config(), reference);
  write_trace_csv(out / "trace.csv", r.trace);
  nlohmann::json summary = run_summary(r.trace);
  summary["seed"] = cfg.seed;
  summary["data_checksum"] = checksum(train);
  if (!r.params.multiclass) {
    const MeanStd st = logit_stats(r.params, train);
    summary["train_logit_mean"] = st.mean;
    summary["train_logit_std"] = st.std;
    const Eigen::VectorXd z = signed_logits(r.params.S, train);
    svg::histogram_chart(std::vector<double>(z.data(), z.data() + z.size()), 40, "signed train logits", "y z")
        .write(out / "logits.svg");
  } else if (train.num_classes >= 3) {
    const Eigen::MatrixXd pts = simplex_projection(r.params, train, {0, 1, 2});
    svg::Series s{"classes 0, 1, 2", {}, {}, svg::Series::Style::markers, {}};
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      if (train.labels[static_cast<std::size_t>(i)] < 3) {
        s.x.push_back(pts(i, 0));
        s.y.push_back(pts(i, 1));
        s.groups.push_back(train.labels[static_cast<std::size_t>(i)]);
      }
    summary["simplex_radius"] = cluster_radius(pts, train.labels, {0, 1, 2});
    svg::Chart c("simplex projection (train)", {"z0 - z1", false, {}, {}}, {"z0 - z2", false, {}, {}});
    c.add(std::move(s)).write(out / "simplex.svg");
  }
  write_summary_json(out / "summary.json", summary);
  svg::loss_chart(r.trace, "loss").write(out / "loss.svg");
  svg::accuracy_chart(r.trace, "accuracy").write(out / "accuracy.svg");
  std::cout << "final test_acc " << r.trace.final_row().test_acc << ", wrote " << out.string() << '\n';
  return 0;
}

int finish_sweep(const SweepResult& r, const fs::path& out) {
  write_traces(r, out);
  write_summary_json(out / "summary.json", to_json(r));
  report_failures(r);
  std::cout << r.kind << " sweep: " << r.points.size() << " points, wrote " << out.string() << '\n';
  return r.all_ok() ? 0 : 1;
}

int cmd_sweep(const RunConfig& cfg, const std::string& kind, unsigned workers) {
  const fs::path out = cfg.output_dir;
  SweepOptions opts;
  opts.workers = workers;
  opts.keep_traces = true;
  const BinaryDataSpec base = cfg.binary_spec();
  const TrainConfig tc = cfg.train_config();
  SweepResult r;
  if (kind == "alpha") {
    r = alpha_sweep(base, cfg.sweep.alphas, tc, opts);
    svg::Chart c("alignment vs alpha", {"alpha", false, {}, {}}, {"cosine", false, {}, {}});
    svg::Series lda{"cos to LDA", {}, {}, svg::Series::Style::line, {}};
    svg::Series e1{"cos to signal axis", {}, {}, svg::Series::Style::line, {}};
    for (const auto& p : r.points)
      if (p.ok) {
        lda.x.push_back(*p.coord("alpha"));
        lda.y.push_back(p.cos_lda);
        e1.x.push_back(*p.coord("alpha"));
        e1.y.push_back(p.cos_sim);
      }
    c.add(std::move(lda)).add(std::move(e1)).write(out / "alignment.svg");
  } else if (kind == "lambda") {
    r = lambda_sweep(base, cfg.sweep.lambdas, cfg.sweep.alphas, tc, opts);
    accuracy_vs(r, "lambda", "alpha", "test accuracy vs lambda", false).write(out / "accuracy.svg");
  } else if (kind == "sigma_n") {
    r = sigma_n_sweep(base, cfg.sweep.sigma_ns, cfg.sweep.alphas, tc, opts);
    accuracy_vs(r, "sigma_n", "alpha", "test accuracy vs sigma_n", true).write(out / "accuracy.svg");
  } else if (kind == "weight_decay") {
    r = weight_decay_baseline(base, cfg.weight_decay, cfg.sweep.lambdas, cfg.sweep.sigma_ns, tc, opts);
  } else {
    throw ConfigError("--kind", "expected alpha, lambda, sigma_n or weight_decay");
  }
  return finish_sweep(r, out);
}

int cmd_phase(const RunConfig& cfg, unsigned workers) {
  const fs::path out = cfg.output_dir;
  SweepOptions opts;
  opts.workers = workers;
  const SweepResult r = phase_boundary(cfg.binary_spec(), cfg.sweep.sigma_fs, cfg.sweep.sigma_ns,
                                       cfg.sweep.alpha_plus, cfg.train_config(), opts);
  svg::Chart c("phase boundary", {"sigma_f", false, {}, {}}, {"sigma_n*", false, {}, {}});
  svg::Series s{"crossing", {}, {}, svg::Series::Style::line, {}};
  for (const auto& x : r.crossings)
    if (x.sigma_n_star) {
      s.x.push_back(x.sigma_f);
      s.y.push_back(*x.sigma_n_star);
    }
  if (!s.x.empty()) c.add(std::move(s)).write(out / "phase.svg");
  for (const auto& x : r.crossings) {
    std::cout << "sigma_f=" << x.sigma_f << " sigma_n*=";
    if (x.sigma_n_star)
      std::cout << *x.sigma_n_star << '\n';
    else
      std::cout << "none\n";
  }
  return finish_sweep(r, out);
}

int cmd_grok(const RunConfig& cfg, unsigned workers) {
  const fs::path out = cfg.output_dir;
  SweepOptions opts;
  opts.workers = workers;
  opts.keep_traces = true;
  const SweepResult r = cfg.num_classes == 2
                            ? grokking_grid(cfg.binary_spec(), cfg.sweep.alphas, cfg.train_config(), opts)
                            : grokking_grid(cfg.multiclass_spec(), cfg.sweep.alphas, cfg.train_config(), opts);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    if (p.trace) svg::accuracy_chart(*p.trace, coord_name("alpha", *p.coord("alpha"))).write(out / (point_tag(i) + ".svg"));
    std::cout << "alpha=" << *p.coord("alpha") << " grokking_time=";
    if (p.grokking_time)
      std::cout << *p.grokking_time;
    else
      std::cout << "none";
    std::cout << " non_monotone=" << (p.non_monotone_test_loss ? "true" : "false") << '\n';
  }
  return finish_sweep(r, out);
}

int cmd_embed_geometry(const RunConfig& cfg, const std::vector<std::string>& inputs) {
  std::vector<std::string> files = inputs;
  if (files.empty() && cfg.train_file) files.push_back(*cfg.train_file);
  if (files.empty()) throw ConfigError("train_file", "no embedding file given");
  nlohmann::json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["kind"] = "embed_geometry";
  j["files"] = nlohmann::json::array();
  for (const auto& f : files) {
    const EmbeddingFile e = read_embeddings(f);
    std::vector<int> labels(e.labels.begin(), e.labels.end());
    const FeatureGeometry g = feature_geometry(e.features.cast<double>(), labels);
    nlohmann::json row = to_json(g);
    row["path"] = f;
    row["n"] = e.features.rows();
    row["d"] = e.features.cols();
    row["num_classes"] = e.num_classes;
    j["files"].push_back(row);
    std::cout << f << ": sigma_f_eff=" << g.sigma_f_eff << " sigma_n_eff=" << g.sigma_n_eff << '\n';
  }
  write_summary_json(fs::path(cfg.output_dir) / "geometry.json", j);
  return 0;
}

int cmd_rescale(const RunConfig& cfg, std::optional<double> gamma_flag) {
  if (!cfg.train_file) throw ConfigError("train_file", "rescale-orth needs a training embedding file");
  const double gamma = gamma_flag.value_or(cfg.rescale_gamma);
  if (!(gamma >= 0.0)) throw ConfigError("--gamma", "must be >= 0");
  const fs::path out = cfg.output_dir;
  const EmbeddingFile train = read_embeddings(*cfg.train_file);
  std::vector<int> labels(train.labels.begin(), train.labels.end());
  const FeatureGeometry g = feature_geometry(train.features.cast<double>(), labels);
  nlohmann::json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["kind"] = "rescale_orth";
  j["gamma"] = gamma;
  j["before"] = to_json(g);
  auto rescale_file = [&](const std::string& path, const std::string& name) {
    EmbeddingFile e = read_embeddings(path);
    e.features = rescale_orthogonal(e.features.cast<double>(), g, gamma).cast<float>();
    write_embeddings(out / name, e);
    return e;
  };
  const EmbeddingFile scaled = rescale_file(*cfg.train_file, "train_rescaled.lrlb");
  if (cfg.test_file) rescale_file(*cfg.test_file, "test_rescaled.lrlb");
  j["after"] = to_json(feature_geometry(scaled.features.cast<double>(), labels));
  write_summary_json(out / "rescale.json", j);
  std::cout << "sigma_n_raw " << g.sigma_n_raw << " -> " << j["after"]["sigma_n_raw"].get<double>() << '\n';
  return 0;
}

int cmd_plot(const RunConfig& cfg, const std::string& input) {
  if (input.empty()) throw ConfigError("--input", "plot needs an input file");
  const fs::path out = cfg.output_dir;
  const fs::path in = input;
  if (in.extension() == ".csv") {
    const TrainTrace t = read_trace_csv(in);
    svg::loss_chart(t, "loss").write(out / (in.stem().string() + "_loss.svg"));
    svg::accuracy_chart(t, "accuracy").write(out / (in.stem().string() + "_accuracy.svg"));
    return 0;
  }
  std::ifstream is(in);
  if (!is) throw FileError("cannot open '" + input + "'");
  const nlohmann::json j = nlohmann::json::parse(is);
  if (!j.contains("schema_version") || !j.contains("points")) throw FileError("not a sweep summary");
  SweepResult r;
  r.kind = j.value("kind", "");
  for (const auto& p : j["points"]) {
    PointSummary s;
    for (auto it = p["coords"].begin(); it != p["coords"].end(); ++it)
      s.coords.emplace_back(it.key(), it->is_number() ? it->get<double>() : 0.0);
    s.ok = p.value("ok", false);
    s.test_acc = p["test_acc"].is_number() ? p["test_acc"].get<double>() : std::nan("");
    r.points.push_back(std::move(s));
  }
  if (r.points.empty()) throw FileError("sweep summary has no points");
  std::string x_key = "alpha";
  for (const char* k : {"lambda", "sigma_n"})
    if (!r.points.empty() && r.points.front().coord(k)) x_key = k;
  const std::string group = x_key == "alpha" ? "gamma" : (r.points.front().coord("sigma_f") ? "sigma_f" : "alpha");
  accuracy_vs(r, x_key, group, "test accuracy vs " + x_key, x_key == "sigma_n")
      .write(out / (in.stem().string() + "_accuracy.svg"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logit-regularized linear classifiers: training, sweeps and diagnostics"};
  app.require_subcommand(1);

  Common run_c, sweep_c, phase_c, grok_c, geo_c, resc_c, plot_c;
  unsigned workers = 0;
  std::string sweep_kind = "alpha";
  std::vector<std::string> geo_inputs;
  std::optional<double> gamma;
  std::string plot_input;

  auto* run = app.add_subcommand("run", "train one model and write its trace");
  add_common(run, run_c);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep, sweep_c);
  sweep->add_option("--kind", sweep_kind, "alpha, lambda, sigma_n or weight_decay")
      ->check(CLI::IsMember({"alpha", "lambda", "sigma_n", "weight_decay"}));
  sweep->add_option("--workers", workers, "worker threads (capped by LRL_WORKERS)");
  auto* phase = app.add_subcommand("phase-diagram", "locate regularized/plain accuracy crossings");
  add_common(phase, phase_c);
  phase->add_option("--workers", workers, "worker threads (capped by LRL_WORKERS)");
  auto* grok = app.add_subcommand("grok", "grokking times over the alpha grid");
  add_common(grok, grok_c);
  grok->add_option("--workers", workers, "worker threads (capped by LRL_WORKERS)");
  auto* geo = app.add_subcommand("embed-geometry", "effective noise amplitudes of LRLB files");
  add_common(geo, geo_c);
  geo->add_option("files", geo_inputs, "LRLB files (default: train_file from the config)");
  auto* resc = app.add_subcommand("rescale-orth", "rescale the orthogonal feature component");
  add_common(resc, resc_c);
  resc->add_option("--gamma", gamma, "scale factor (default: rescale_gamma from the config)");
  auto* plot = app.add_subcommand("plot", "render SVG charts from a trace CSV or sweep summary");
  add_common(plot, plot_c);
  plot->add_option("--input", plot_input, "trace CSV or summary JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(load(run_c));
    if (*sweep) return cmd_sweep(load(sweep_c), sweep_kind, workers);
    if (*phase) return cmd_phase(load(phase_c), workers);
    if (*grok) return cmd_grok(load(grok_c), workers);
    if (*geo) return cmd_embed_geometry(load(geo_c), geo_inputs);
    if (*resc) return cmd_rescale(load(resc_c), gamma);
    if (*plot) return cmd_plot(load(plot_c), plot_input);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
