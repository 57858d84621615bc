#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "logitreg/trainer.hpp"

using namespace logitreg;

namespace {

std::pair<Dataset, Dataset> binary_data(int d = 20, int n = 100, double sigma_f = 0.0, std::uint64_t seed = 2) {
  BinaryDataSpec s;
  s.d = d;
  s.n_train = n;
  s.n_test = 200;
  s.sigma_f = sigma_f;
  s.seed = seed;
  return sample_binary(s);
}

std::pair<Dataset, Dataset> mc_data(int K = 4, int d = 20, int n = 120) {
  MulticlassDataSpec s;
  s.num_classes = K;
  s.d = d;
  s.n_train = n;
  s.n_test = 100;
  s.seed = 6;
  return sample_multiclass(s);
}

TrainConfig short_cfg(std::int64_t epochs = 500) {
  TrainConfig c;
  c.epochs = epochs;
  c.log_every = 100;
  return c;
}

}  // namespace

TEST(Train, TraceRowSchedule) {
  const auto [tr, te] = binary_data();
  TrainConfig c = short_cfg(250);
  const TrainResult r = train(tr, te, c);
  std::vector<std::int64_t> epochs;
  for (const auto& row : r.trace.rows) epochs.push_back(row.epoch);
  EXPECT_EQ(epochs, (std::vector<std::int64_t>{0, 100, 200, 250}));
  EXPECT_EQ(r.trace.epochs_run, 250);
}

TEST(Train, InitialRowAtZeroWeights) {
  const auto [tr, te] = binary_data();
  const TrainResult r = train(tr, te, short_cfg(1));
  const TraceRow& row0 = r.trace.rows.front();
  EXPECT_NEAR(row0.train_loss, 0.8 * std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(row0.train_acc, 0.0);  // z = 0 counts as wrong
  EXPECT_DOUBLE_EQ(row0.weight_norm, 0.0);
}

TEST(Train, OneGradientStepMatchesHandComputation) {
  const auto [tr, te] = binary_data(10, 50);
  TrainConfig c = short_cfg(1);
  c.learning_rate = 0.3;
  const TrainResult r = train(tr, te, c);
  // At S = 0 every signed logit is 0, so grad = l'(0) * mean(y x).
  const double g0 = per_sample_grad(0.0, c.loss);
  const Eigen::VectorXd mean_yx = signed_features(tr).colwise().mean().transpose();
  EXPECT_LT((r.params.S - (-0.3 * g0 * mean_yx)).norm(), 1e-14);
}

TEST(Train, BinaryConvergesToTargetCluster) {
  // d > N so every signed logit can sit exactly at the target.
  const auto [tr, te] = binary_data(100, 40);
  TrainConfig c = short_cfg(5000);
  c.learning_rate = 0.2;
  const TrainResult r = train(tr, te, c);
  const double zstar = target_logit(c.loss);
  const Eigen::VectorXd z = signed_features(tr) * r.params.S;
  EXPECT_LT((z.array() - zstar).abs().maxCoeff(), 1e-6);
  EXPECT_DOUBLE_EQ(r.trace.final_row().train_acc, 1.0);
}

TEST(Train, CappedStepPolicyBoundsStep) {
  const auto [tr, te] = binary_data(20, 100);
  TrainConfig c = short_cfg(10);
  c.learning_rate = 100.0;
  c.step_policy = StepPolicy::capped;
  const TrainResult r = train(tr, te, c);
  EXPECT_LT(r.trace.learning_rate_used, 100.0);
  // The bound uses the largest eigenvalue of X^T X / N times sup l''.
  const Eigen::MatrixXd x = signed_features(tr);
  const Eigen::MatrixXd g = x.transpose() * x / static_cast<double>(x.rows());
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().maxCoeff();
  const double expect = 1.0 / (per_sample_hess_bound(c.loss) * lmax);
  EXPECT_NEAR(r.trace.learning_rate_used, expect, 1e-6 * expect);
}

TEST(Train, HugeStepDiverges) {
  const auto [tr, te] = binary_data(20, 100);
  TrainConfig c = short_cfg(5000);
  c.learning_rate = 50.0;
  try {
    train(tr, te, c);
    FAIL() << "expected divergence";
  } catch (const DivergedAtEpoch& e) {
    EXPECT_GT(e.epoch(), 0);
    EXPECT_LE(e.epoch(), 5000);
  }
}

TEST(Train, AdamReducesLoss) {
  const auto [tr, te] = binary_data();
  TrainConfig gd = short_cfg(200000);
  gd.learning_rate = 0.2;
  gd.early_stop_grad_norm = 1e-10;
  const double best = train(tr, te, gd).trace.final_row().train_loss;
  TrainConfig c = short_cfg(3000);
  c.optimizer = Optimizer::adam;
  c.learning_rate = 0.01;
  const TrainResult r = train(tr, te, c);
  EXPECT_LT(r.trace.final_row().train_loss, r.trace.rows.front().train_loss);
  EXPECT_NEAR(r.trace.final_row().train_loss, best, 1e-3);
}

TEST(Train, EarlyStopOnGradientNorm) {
  const auto [tr, te] = binary_data();
  TrainConfig c = short_cfg(100000);
  c.learning_rate = 0.2;
  c.early_stop_grad_norm = 1e-6;
  const TrainResult r = train(tr, te, c);
  EXPECT_TRUE(r.trace.early_stopped);
  EXPECT_LT(r.trace.epochs_run, 100000);
  EXPECT_LE(r.trace.final_grad_norm, 1e-6);
  EXPECT_EQ(r.trace.final_row().epoch, r.trace.epochs_run);
}

TEST(Train, ZeroWeightDecayIsBitIdentical) {
  const auto [tr, te] = binary_data();
  TrainConfig a = short_cfg(300);
  a.loss.alpha = 0.0;
  TrainConfig b = a;
  b.loss.weight_decay_gamma = 0.0;
  const TrainResult ra = train(tr, te, a), rb = train(tr, te, b);
  EXPECT_EQ(ra.params.S, rb.params.S);
}

TEST(Train, WeightDecaySkipsBias) {
  const auto [tr, te] = mc_data();
  TrainConfig c = short_cfg(1);
  c.use_bias = true;
  c.loss.weight_decay_gamma = 0.5;
  c.init.kind = InitSpec::Kind::gaussian;
  c.init.scale = 0.1;
  c.init.seed = 4;
  // Loss reported includes gamma/2 ||W||^2 but not the bias.
  ModelParams p;
  p.multiclass = true;
  p.W = Eigen::MatrixXd::Constant(4, 20, 0.1);
  p.b = Eigen::VectorXd::Constant(4, 3.0);
  LossSpec plain = c.loss;
  plain.weight_decay_gamma = 0.0;
  EXPECT_NEAR(evaluate(p, tr, c.loss).loss - evaluate(p, tr, plain).loss, 0.25 * p.W.squaredNorm(), 1e-12);
  const ModelParams g = objective_gradient(p, tr, c.loss, true);
  const ModelParams g0 = objective_gradient(p, tr, plain, true);
  EXPECT_LT((g.b - g0.b).norm(), 1e-15);
  EXPECT_LT((g.W - g0.W - 0.5 * p.W).norm(), 1e-12);
}

TEST(Train, GaussianInitIsSeeded) {
  const auto [tr, te] = binary_data();
  TrainConfig c = short_cfg(1);
  c.init.kind = InitSpec::Kind::gaussian;
  c.init.scale = 0.5;
  c.init.seed = 12;
  const TrainResult a = train(tr, te, c), b = train(tr, te, c);
  EXPECT_EQ(a.params.S, b.params.S);
  EXPECT_GT(a.trace.rows.front().weight_norm, 0.0);
  c.init.seed = 13;
  EXPECT_NE(train(tr, te, c).params.S, a.params.S);
}

TEST(Train, SnapshotsAtRequestedEpochs) {
  const auto [tr, te] = binary_data();
  TrainConfig c = short_cfg(50);
  c.snapshot_epochs = {50, 0, 10};
  const TrainResult r = train(tr, te, c);
  ASSERT_EQ(r.trace.snapshots.size(), 3u);
  EXPECT_EQ(r.trace.snapshots[0].first, 0);
  EXPECT_EQ(r.trace.snapshots[1].first, 10);
  EXPECT_EQ(r.trace.snapshots[2].second.S, r.params.S);
}

TEST(Train, MulticlassLearnsAndUsesBias) {
  const auto [tr, te] = mc_data();
  TrainConfig c = short_cfg(2000);
  c.use_bias = true;
  c.loss.alpha = 0.1;
  const TrainResult r = train(tr, te, c);
  EXPECT_TRUE(r.params.multiclass);
  EXPECT_EQ(r.params.W.rows(), 4);
  EXPECT_GT(r.trace.final_row().test_acc, 0.9);
  TrainConfig nb = c;
  nb.use_bias = false;
  EXPECT_EQ(train(tr, te, nb).params.b, Eigen::VectorXd::Zero(4));
}

TEST(Evaluate, ArgmaxTiesGoToLowestIndex) {
  Dataset d;
  d.scheme = LabelScheme::class_index;
  d.num_classes = 3;
  d.features = Eigen::MatrixXd::Ones(2, 2);
  d.labels = {0, 1};
  ModelParams p;
  p.multiclass = true;
  p.W = Eigen::MatrixXd::Zero(3, 2);
  p.b = Eigen::VectorXd::Zero(3);
  const Evaluation ev = evaluate(p, d, LossSpec{});
  EXPECT_DOUBLE_EQ(ev.accuracy, 0.5);
}

TEST(Evaluate, ShapeMismatchesAreContractErrors) {
  const auto [tr, te] = binary_data();
  ModelParams p;
  p.S = Eigen::VectorXd::Zero(5);
  EXPECT_THROW(evaluate(p, tr, LossSpec{}), ContractError);
  const auto [mtr, mte] = mc_data();
  EXPECT_THROW(train(tr, mte, short_cfg(1)), ContractError);
}

TEST(Alignment, BinaryAndMulticlass) {
  ModelParams p;
  p.S = Eigen::VectorXd::Zero(4);
  p.S << 1.0, 1.0, 0.0, 0.0;
  const Eigen::MatrixXd e1 = Eigen::MatrixXd::Identity(4, 1);
  EXPECT_NEAR(alignment(p, e1), 1.0 / std::sqrt(2.0), 1e-15);
  p.S = -p.S;
  EXPECT_NEAR(alignment(p, e1), -1.0 / std::sqrt(2.0), 1e-15);
  ModelParams m;
  m.multiclass = true;
  m.W = Eigen::MatrixXd::Zero(3, 4);
  m.W(0, 0) = 3.0;
  m.W(1, 3) = 4.0;
  m.b = Eigen::VectorXd::Zero(3);
  EXPECT_NEAR(alignment(m, Eigen::MatrixXd::Identity(4, 2)), 0.6, 1e-15);
}

TEST(ObjectiveGradient, MatchesCentralDifferences) {
  std::mt19937_64 eng(21);
  std::normal_distribution<double> nd(0.0, 0.3);
  const auto [tr, te] = binary_data(6, 40, 0.5);
  for (auto kind : {RegularizerKind::quadratic, RegularizerKind::label_smoothing})
    for (double gamma : {0.0, 0.2}) {
      LossSpec s;
      s.kind = kind;
      s.weight_decay_gamma = gamma;
      ModelParams p;
      p.S = Eigen::VectorXd(6);
      for (int i = 0; i < 6; ++i) p.S[i] = nd(eng);
      const ModelParams g = objective_gradient(p, tr, s);
      for (int i = 0; i < 6; ++i) {
        ModelParams a = p, b = p;
        a.S[i] += 1e-6;
        b.S[i] -= 1e-6;
        const double fd = (objective_value(a, tr, s) - objective_value(b, tr, s)) / 2e-6;
        EXPECT_NEAR(g.S[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
}

TEST(Train, GradientDescentNeverIncreasesLoss) {
  for (double alpha : {0.0, 0.2}) {
    const auto [tr, te] = binary_data(40, 60, 0.3);
    TrainConfig c = short_cfg(2000);
    c.log_every = 1;
    c.loss.alpha = alpha;
    const TrainResult r = train(tr, te, c);
    for (std::size_t i = 1; i < r.trace.rows.size(); ++i)
      ASSERT_LE(r.trace.rows[i].train_loss, r.trace.rows[i - 1].train_loss + 1e-9) << "epoch " << i;
  }
}

TEST(Train, IdenticalInputsGiveIdenticalTraces) {
  const auto [tr, te] = mc_data();
  TrainConfig c = short_cfg(300);
  c.log_every = 7;
  c.use_bias = true;
  const TrainResult a = train(tr, te, c), b = train(tr, te, c);
  ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    EXPECT_EQ(a.trace.rows[i].train_loss, b.trace.rows[i].train_loss);
    EXPECT_EQ(a.trace.rows[i].test_loss, b.trace.rows[i].test_loss);
    EXPECT_EQ(a.trace.rows[i].cos_sim, b.trace.rows[i].cos_sim);
  }
  EXPECT_EQ(a.params.W, b.params.W);
}

TEST(Train, StationaryAtConvergence) {
  const auto [tr, te] = binary_data(30, 60, 0.5);
  TrainConfig c = short_cfg(20000);
  const TrainResult r = train(tr, te, c);
  EXPECT_LE(r.trace.final_grad_norm, 1e-6 * (1.0 + r.params.S.norm()));
}
