#pragma once

// Signal-plus-noise datasets.
//
// Binary:     x = y mu_f e1 + sigma_f xi_f e1 + sigma_n xi_perp
// Multiclass: x = mu_f v_c + sigma_f eta_f + sigma_n eta_n
//
// where v_c are the unit vertices of a centered regular simplex living in the
// first K-1 coordinates, eta_f is supported on those coordinates and eta_n on
// the remaining ones. Standard variates are drawn first and scaled afterwards,
// so two specs that differ only in sigma_f / sigma_n / mu_f produce paired
// realizations from the same seed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "logitreg/errors.hpp"
#include "logitreg/rng.hpp"

namespace logitreg {

struct NoiseDist {
  enum class Kind { gaussian, student_t };
  Kind kind = Kind::gaussian;
  double nu = 0.0;  // degrees of freedom, student_t only

  static NoiseDist gaussian() { return {}; }
  static NoiseDist student_t(double nu) { return {Kind::student_t, nu}; }

  template <class Engine>
  double draw(Engine& eng) const {
    if (kind == Kind::gaussian) return std::normal_distribution<double>(0.0, 1.0)(eng);
    return std::student_t_distribution<double>(nu)(eng);
  }
};

struct BinaryDataSpec {
  int d = 280;
  int n_train = 400;
  int n_test = 2000;
  double mu_f = 1.0;
  double sigma_f = 0.0;
  double sigma_n = 1.0;
  NoiseDist dist_f;
  NoiseDist dist_n;
  std::uint64_t seed = 0;
  bool exact_balance = false;

  double lambda() const { return static_cast<double>(d) / static_cast<double>(n_train); }

  void validate() const {
    if (d < 2) throw ContractError("d must be >= 2");
    if (n_train < 1 || n_test < 0) throw ContractError("sample counts must be positive");
    if (!(mu_f >= 0.0 && sigma_f >= 0.0 && sigma_n >= 0.0))
      throw ContractError("scales must be >= 0");
    for (const auto* dist : {&dist_f, &dist_n})
      if (dist->kind == NoiseDist::Kind::student_t && !(dist->nu > 2.0))
        throw ContractError("student_t requires nu > 2");
  }
};

struct MulticlassDataSpec : BinaryDataSpec {
  int num_classes = 3;

  void validate() const {
    BinaryDataSpec::validate();
    if (num_classes < 2) throw ContractError("num_classes must be >= 2");
    if (num_classes - 1 > d) throw ContractError("num_classes - 1 must not exceed d");
  }
};

/// d = round(lambda * n_train).
inline int dimension_for(double lambda, int n_train) {
  return static_cast<int>(std::lround(lambda * static_cast<double>(n_train)));
}

enum class LabelScheme {
  signed_binary,  // labels in {-1, +1}
  class_index,    // labels in [0, K)
};

struct Dataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<int> labels;
  Eigen::MatrixXd signal_basis;  // d x (K-1), orthonormal columns
  int num_classes = 2;
  LabelScheme scheme = LabelScheme::signed_binary;
  MulticlassDataSpec spec;  // generating spec; num_classes mirrors the data

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool is_binary() const { return scheme == LabelScheme::signed_binary; }

  void validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
      throw ContractError("feature rows and label count differ");
    for (int y : labels) {
      const bool ok = is_binary() ? (y == 1 || y == -1) : (y >= 0 && y < num_classes);
      if (!ok) throw ContractError("label " + std::to_string(y) + " outside the label scheme");
    }
  }
};

/// 64-bit FNV-1a over the raw feature bytes and labels.
inline std::uint64_t checksum(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (Eigen::Index i = 0; i < data.features.rows(); ++i)
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      const double v = data.features(i, j);
      mix(&v, sizeof v);
    }
  for (int y : data.labels) mix(&y, sizeof y);
  return h;
}

/// Unit-norm vertices of a centered regular simplex: K columns in R^{K-1}.
/// Built from the Helmert basis of the sum-zero subspace of R^K.
inline Eigen::MatrixXd simplex_vertices(int K) {
  if (K < 2) throw ContractError("simplex needs K >= 2");
  Eigen::MatrixXd helmert = Eigen::MatrixXd::Zero(K, K - 1);
  for (int j = 1; j < K; ++j) {
    const double s = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    for (int i = 0; i < j; ++i) helmert(i, j - 1) = s;
    helmert(j, j - 1) = -j * s;
  }
  Eigen::MatrixXd centered =
      Eigen::MatrixXd::Identity(K, K) - Eigen::MatrixXd::Constant(K, K, 1.0 / K);
  Eigen::MatrixXd v = helmert.transpose() * centered;  // (K-1) x K
  v *= std::sqrt(static_cast<double>(K) / (K - 1));
  return v;
}

namespace detail {

template <class Engine>
std::vector<int> draw_labels(Engine& eng, int n, int K, bool exact_balance) {
  std::vector<int> labels(n);
  if (exact_balance) {
    for (int i = 0; i < n; ++i) labels[i] = i % K;
    std::shuffle(labels.begin(), labels.end(), eng);
  } else {
    std::uniform_int_distribution<int> pick(0, K - 1);
    for (auto& y : labels) y = pick(eng);
  }
  return labels;
}

struct Split {
  Stream labels, signal, orth;
};

constexpr Split kTrain{Stream::train_labels, Stream::train_signal_noise, Stream::train_orth_noise};
constexpr Split kTest{Stream::test_labels, Stream::test_signal_noise, Stream::test_orth_noise};

inline Dataset sample_split(const MulticlassDataSpec& spec, int n, const Split& split,
                            bool signed_labels) {
  const int K = spec.num_classes;
  const int d = spec.d;
  const int m = K - 1;
  auto label_eng = make_engine(spec.seed, split.labels);
  auto signal_eng = make_engine(spec.seed, split.signal);
  auto orth_eng = make_engine(spec.seed, split.orth);

  Dataset out;
  out.scheme = signed_labels ? LabelScheme::signed_binary : LabelScheme::class_index;
  out.num_classes = K;
  out.spec = spec;
  out.signal_basis = Eigen::MatrixXd::Identity(d, m);
  out.features.resize(n, d);

  const std::vector<int> cls = draw_labels(label_eng, n, K, spec.exact_balance);
  const Eigen::MatrixXd vertices = simplex_vertices(K);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    auto row = out.features.row(i);
    if (signed_labels) {
      // Binary model: y mu_f e1 + sigma_f xi_f e1, class 1 -> +1, class 0 -> -1.
      const int y = cls[i] == 1 ? 1 : -1;
      out.labels[i] = y;
      row(0) = y * spec.mu_f + spec.sigma_f * spec.dist_f.draw(signal_eng);
    } else {
      out.labels[i] = cls[i];
      for (int k = 0; k < m; ++k)
        row(k) = spec.mu_f * vertices(k, cls[i]) + spec.sigma_f * spec.dist_f.draw(signal_eng);
    }
    for (int j = m; j < d; ++j) row(j) = spec.sigma_n * spec.dist_n.draw(orth_eng);
  }
  return out;
}

}  // namespace detail

/// Train and test sets for the binary model. Labels are {-1, +1}.
inline std::pair<Dataset, Dataset> sample_binary(const BinaryDataSpec& spec) {
  spec.validate();
  MulticlassDataSpec mc;
  static_cast<BinaryDataSpec&>(mc) = spec;
  mc.num_classes = 2;
  return {detail::sample_split(mc, spec.n_train, detail::kTrain, true),
          detail::sample_split(mc, spec.n_test, detail::kTest, true)};
}

/// Train and test sets for the K-class model. Labels are in [0, K).
inline std::pair<Dataset, Dataset> sample_multiclass(const MulticlassDataSpec& spec) {
  spec.validate();
  return {detail::sample_split(spec, spec.n_train, detail::kTrain, false),
          detail::sample_split(spec, spec.n_test, detail::kTest, false)};
}

/// x <- y x, labels <- +1.
inline Dataset absorb_labels(const Dataset& data) {
  if (!data.is_binary()) throw ContractError("absorb_labels needs a binary dataset");
  Dataset out = data;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out.labels[i] < 0) out.features.row(i) = -out.features.row(i);
    out.labels[i] = 1;
  }
  return out;
}

/// Rows y_i x_i; identity on an already absorbed dataset.
inline Eigen::MatrixXd signed_features(const Dataset& data) {
  if (!data.is_binary()) throw ContractError("signed features need a binary dataset");
  Eigen::MatrixXd x = data.features;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (data.labels[i] < 0) x.row(i) = -x.row(i);
  return x;
}

}  // namespace logitreg
