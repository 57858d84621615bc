#pragma once

// On-disk formats: LRLB embedding files, trace CSV, JSON summaries.
//
// LRLB v1, all integers little-endian:
//   "LRLB" | u32 version | u64 N | u64 d | u32 K | N x u32 label | N*d x f32 (row-major)

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "logitreg/analytics.hpp"
#include "logitreg/datagen.hpp"
#include "logitreg/errors.hpp"
#include "logitreg/sweeps.hpp"
#include "logitreg/trainer.hpp"

namespace logitreg {

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingFile {
  std::uint32_t num_classes = 0;
  std::vector<std::uint32_t> labels;
  FloatMatrix features;  // N x d
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const char* p) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, mode | std::ios::trunc);
  if (!os) throw FileError("cannot open '" + path.string() + "' for writing");
  return os;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  os << text;
  if (!os.flush()) throw FileError("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline std::string encode_embeddings(const EmbeddingFile& f) {
  const auto n = static_cast<std::uint64_t>(f.features.rows());
  const auto d = static_cast<std::uint64_t>(f.features.cols());
  if (f.labels.size() != n) throw ContractError("label count != feature rows");
  for (auto y : f.labels)
    if (y >= f.num_classes) throw LabelOutOfRange("label " + std::to_string(y) + " >= K");
  std::string out = "LRLB";
  out.reserve(28 + 4 * n + 4 * n * d);
  detail::put_le(out, kEmbeddingVersion);
  detail::put_le(out, n);
  detail::put_le(out, d);
  detail::put_le(out, f.num_classes);
  for (auto y : f.labels) detail::put_le(out, y);
  for (Eigen::Index i = 0; i < f.features.rows(); ++i)
    for (Eigen::Index j = 0; j < f.features.cols(); ++j) detail::put_le(out, f.features(i, j));
  return out;
}

inline EmbeddingFile decode_embeddings(const std::string& bytes) {
  constexpr std::size_t header = 4 + 4 + 8 + 8 + 4;
  if (bytes.size() < 4) throw TruncatedFile("file shorter than the magic");
  if (bytes.compare(0, 4, "LRLB") != 0) throw BadMagic("magic bytes are not LRLB");
  if (bytes.size() < 8) throw TruncatedFile("header truncated");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kEmbeddingVersion)
    throw VersionMismatch("unsupported LRLB version " + std::to_string(version));
  if (bytes.size() < header) throw TruncatedFile("header truncated");
  const auto n = detail::get_le<std::uint64_t>(bytes.data() + 8);
  const auto d = detail::get_le<std::uint64_t>(bytes.data() + 16);
  EmbeddingFile f;
  f.num_classes = detail::get_le<std::uint32_t>(bytes.data() + 24);
  const std::size_t avail = bytes.size() - header;
  // Check sizes before multiplying so absurd headers cannot overflow.
  if (n > avail / 4) throw TruncatedFile("label block truncated");
  if (n != 0 && d > (avail - 4 * n) / 4 / n) throw TruncatedFile("feature block truncated");
  const std::size_t expect = header + 4 * n + 4 * n * d;
  if (bytes.size() != expect) throw FileError("trailing bytes after feature block");
  const char* p = bytes.data() + header;
  f.labels.resize(n);
  for (std::uint64_t i = 0; i < n; ++i, p += 4) {
    f.labels[i] = detail::get_le<std::uint32_t>(p);
    if (f.labels[i] >= f.num_classes)
      throw LabelOutOfRange("label " + std::to_string(f.labels[i]) + " at row " + std::to_string(i) +
                            " >= K = " + std::to_string(f.num_classes));
  }
  f.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < d; ++j, p += 4)
      f.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::get_le<float>(p);
  return f;
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingFile& f) {
  detail::write_text(path, encode_embeddings(f));
}

inline EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_embeddings(ss.str());
}

/// Binary datasets store class 0 for y = -1 and class 1 for y = +1.
inline EmbeddingFile to_embeddings(const Dataset& data) {
  EmbeddingFile f;
  f.num_classes = static_cast<std::uint32_t>(data.num_classes);
  f.features = data.features.cast<float>();
  f.labels.resize(data.labels.size());
  for (std::size_t i = 0; i < f.labels.size(); ++i)
    f.labels[i] = static_cast<std::uint32_t>(data.is_binary() ? (data.labels[i] > 0 ? 1 : 0) : data.labels[i]);
  return f;
}

/// K == 2 files become signed-binary datasets unless `force_class_index`.
/// The signal basis is left empty; callers supply a reference if needed.
inline Dataset to_dataset(const EmbeddingFile& f, bool force_class_index = false) {
  Dataset data;
  data.num_classes = static_cast<int>(f.num_classes);
  if (data.num_classes < 2) throw ContractError("embedding file declares fewer than two classes");
  data.scheme = (data.num_classes == 2 && !force_class_index) ? LabelScheme::signed_binary
                                                             : LabelScheme::class_index;
  data.features = f.features.cast<double>();
  data.labels.resize(f.labels.size());
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const int y = static_cast<int>(f.labels[i]);
    data.labels[i] = data.is_binary() ? (y == 1 ? 1 : -1) : y;
  }
  data.signal_basis = Eigen::MatrixXd(data.features.cols(), 0);
  data.spec.d = static_cast<int>(data.features.cols());
  data.spec.n_train = static_cast<int>(data.features.rows());
  data.spec.num_classes = data.num_classes;
  return data;
}

// ---- trace CSV -------------------------------------------------------------

inline constexpr const char* kTraceHeader = "epoch,train_loss,test_loss,train_acc,test_acc,cos_sim,weight_norm";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string trace_csv(const TrainTrace& trace) {
  if (trace.rows.empty()) throw ContractError("empty trace");
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace.rows) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.test_loss, r.train_acc, r.test_acc, r.cos_sim, r.weight_norm}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  detail::write_text(path, trace_csv(trace));
}

/// Parses a trace CSV written by write_trace_csv.
inline TrainTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FileError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw FileError("not a trace CSV: bad header");
  TrainTrace t;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != 7) throw FileError("trace CSV line " + std::to_string(lineno) + ": expected 7 columns");
    TraceRow r;
    try {
      r.epoch = std::stoll(cells[0]);
      double* dst[] = {&r.train_loss, &r.test_loss, &r.train_acc, &r.test_acc, &r.cos_sim, &r.weight_norm};
      for (int k = 0; k < 6; ++k) *dst[k] = std::stod(cells[static_cast<std::size_t>(k + 1)]);
    } catch (const std::exception&) {
      throw FileError("trace CSV line " + std::to_string(lineno) + ": malformed number");
    }
    t.rows.push_back(r);
  }
  if (t.rows.empty()) throw FileError("trace CSV has no rows");
  t.epochs_run = t.rows.back().epoch;
  return t;
}

// ---- JSON summaries --------------------------------------------------------

namespace detail {

inline nlohmann::json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::json coords_json(const Coords& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : c) j[k] = num(v);
  return j;
}

}  // namespace detail

inline nlohmann::json to_json(const TraceRow& r) {
  return {{"epoch", r.epoch},
          {"train_loss", detail::num(r.train_loss)},
          {"test_loss", detail::num(r.test_loss)},
          {"train_acc", detail::num(r.train_acc)},
          {"test_acc", detail::num(r.test_acc)},
          {"cos_sim", detail::num(r.cos_sim)},
          {"weight_norm", detail::num(r.weight_norm)}};
}

inline nlohmann::json to_json(const PointSummary& p) {
  nlohmann::json j;
  j["coords"] = detail::coords_json(p.coords);
  j["ok"] = p.ok;
  if (!p.ok) {
    j["error"] = p.error;
    if (p.diverged_epoch >= 0) j["diverged_epoch"] = p.diverged_epoch;
  }
  j["train_loss"] = detail::num(p.train_loss);
  j["test_loss"] = detail::num(p.test_loss);
  j["train_acc"] = detail::num(p.train_acc);
  j["test_acc"] = detail::num(p.test_acc);
  j["cos_sim"] = detail::num(p.cos_sim);
  j["cos_lda"] = detail::num(p.cos_lda);
  j["weight_norm"] = detail::num(p.weight_norm);
  j["logit_mean"] = detail::num(p.logit_mean);
  j["logit_std"] = detail::num(p.logit_std);
  j["learning_rate_used"] = detail::num(p.learning_rate_used);
  j["grokking_time"] = p.grokking_time ? nlohmann::json(*p.grokking_time) : nlohmann::json(nullptr);
  j["non_monotone_test_loss"] = p.non_monotone_test_loss;
  j["seed"] = p.seed;
  j["data_checksum"] = p.data_checksum;
  return j;
}

inline nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["kind"] = r.kind;
  j["master_seed"] = r.master_seed;
  j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) j["points"].push_back(to_json(p));
  j["derived"] = detail::coords_json(r.derived);
  if (!r.crossings.empty()) {
    j["crossings"] = nlohmann::json::array();
    for (const auto& c : r.crossings)
      j["crossings"].push_back({{"sigma_f", c.sigma_f},
                                {"sigma_n_star", c.sigma_n_star ? nlohmann::json(*c.sigma_n_star)
                                                                : nlohmann::json(nullptr)}});
  }
  return j;
}

inline nlohmann::json to_json(const FeatureGeometry& g) {
  return {{"signal_dim", g.signal_basis.cols()},
          {"orth_dim", g.orth_basis.cols()},
          {"sigma_f_eff", detail::num(g.sigma_f_eff)},
          {"sigma_n_eff", detail::num(g.sigma_n_eff)},
          {"sigma_f_raw", detail::num(g.sigma_f_raw)},
          {"sigma_n_raw", detail::num(g.sigma_n_raw)},
          {"mean_pairwise_distance", detail::num(g.mean_pairwise_distance)}};
}

/// Single-run summary: final row, step size, grokking statistics.
inline nlohmann::json run_summary(const TrainTrace& trace, double grok_threshold = 0.99) {
  nlohmann::json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["kind"] = "run";
  j["final"] = to_json(trace.final_row());
  j["epochs_run"] = trace.epochs_run;
  j["early_stopped"] = trace.early_stopped;
  j["learning_rate_used"] = detail::num(trace.learning_rate_used);
  j["final_grad_norm"] = detail::num(trace.final_grad_norm);
  const auto g = grokking_time(trace, grok_threshold);
  j["grokking_time"] = g ? nlohmann::json(*g) : nlohmann::json(nullptr);
  j["non_monotone_test_loss"] = non_monotone_test_loss(trace);
  return j;
}

inline void write_summary_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (j.is_null() || j.empty()) throw ContractError("empty summary");
  if (!j.contains("schema_version")) throw ContractError("summary lacks schema_version");
  detail::write_text(path, j.dump(2) + "\n");
}

}  // namespace logitreg
