#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "logitreg/analytics.hpp"

using namespace logitreg;

namespace {

Dataset signed_dataset(const Eigen::MatrixXd& x, std::vector<int> labels) {
  Dataset d;
  d.scheme = LabelScheme::signed_binary;
  d.num_classes = 2;
  d.features = x;
  d.labels = std::move(labels);
  d.signal_basis = Eigen::MatrixXd::Zero(x.cols(), 0);
  return d;
}

std::pair<Dataset, Dataset> gen(int d, int n, double sigma_f, double sigma_n = 1.0, std::uint64_t seed = 3) {
  BinaryDataSpec s;
  s.d = d;
  s.n_train = n;
  s.n_test = 10;
  s.sigma_f = sigma_f;
  s.sigma_n = sigma_n;
  s.seed = seed;
  return sample_binary(s);
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

TrainTrace trace_of(const std::vector<std::pair<double, double>>& acc_loss) {
  TrainTrace t;
  std::int64_t e = 0;
  for (auto [acc, loss] : acc_loss) {
    TraceRow r;
    r.epoch = e;
    r.test_acc = acc;
    r.test_loss = loss;
    t.rows.push_back(r);
    e += 10;
  }
  return t;
}

}  // namespace

TEST(MeanStd, PopulationDivisor) {
  Eigen::VectorXd v(2);
  v << 1.0, 3.0;
  const MeanStd s = mean_std(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
  EXPECT_THROW(mean_std(Eigen::VectorXd()), ContractError);
}

TEST(CoefficientOfVariation, HandExampleAndSign) {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 3.0;
  const Dataset d = signed_dataset(x, {1, 1});
  Eigen::VectorXd s(1);
  s << 1.0;
  EXPECT_DOUBLE_EQ(coefficient_of_variation(s, d), 0.5);
  EXPECT_DOUBLE_EQ(coefficient_of_variation(7.0 * s, d), 0.5);
  EXPECT_THROW(coefficient_of_variation(-s, d), SignError);
}

TEST(Lda, TwoDimensionalClosedForm) {
  // Signed inputs mu +/- v1, mu +/- v2 with mu = (1, 0), v1 = (2, 0), v2 = (1, 1):
  // Sigma = [[2.5, 0.5], [0.5, 0.5]], inverse [[0.5, -0.5], [-0.5, 2.5]].
  Eigen::MatrixXd x(4, 2);
  x << 3, 0, -1, 0, 2, 1, 0, -1;
  const Eigen::VectorXd s = lda_direction(signed_dataset(x, {1, 1, 1, 1}));
  EXPECT_NEAR(s[0], 1.0 / std::sqrt(2.0), 1e-8);
  EXPECT_NEAR(s[1], -1.0 / std::sqrt(2.0), 1e-8);
}

TEST(Lda, LabelsAreAbsorbed) {
  Eigen::MatrixXd x(4, 2);
  x << 3, 0, -1, 0, 2, 1, 0, -1;
  Eigen::MatrixXd flipped = x;
  flipped.row(1) *= -1.0;
  flipped.row(2) *= -1.0;
  const Eigen::VectorXd a = lda_direction(signed_dataset(x, {1, 1, 1, 1}));
  const Eigen::VectorXd b = lda_direction(signed_dataset(flipped, {1, -1, -1, 1}));
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(Lda, MinimizesCoefficientOfVariation) {
  const auto [tr, te] = gen(20, 2000, 0.5);
  const Eigen::VectorXd s = lda_direction(tr);
  const double r = coefficient_of_variation(s, tr);

  const Eigen::MatrixXd x = signed_features(tr);
  const Eigen::VectorXd mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd xc = x.rowwise() - mu.transpose();
  const Eigen::MatrixXd sigma = xc.transpose() * xc / static_cast<double>(x.rows());
  const double q = mu.dot(sigma.fullPivLu().solve(mu));
  EXPECT_NEAR(r, 1.0 / std::sqrt(q), 1e-8 * r);

  std::mt19937_64 eng(99);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10000; ++t) {
    Eigen::VectorXd u(20);
    for (int i = 0; i < 20; ++i) u[i] = nd(eng);
    if (u.dot(mu) < 0.0) u = -u;
    const Eigen::VectorXd z = x * u;
    const MeanStd st = mean_std(z);
    if (st.mean <= 0.0) continue;
    ASSERT_GE(st.std / st.mean, r * (1.0 - 1e-9));
  }
}

TEST(Lda, Errors) {
  Eigen::MatrixXd one(1, 2);
  one << 1, 2;
  EXPECT_THROW(lda_direction(signed_dataset(one, {1})), ContractError);
  Eigen::MatrixXd same(3, 2);
  same << 1, 1, 1, 1, 1, 1;
  EXPECT_THROW(lda_direction(signed_dataset(same, {1, 1, 1})), RankDeficient);
}

TEST(ClosedFormAccuracy, KnownValues) {
  EXPECT_NEAR(closed_form_accuracy(1.0, 1.0, 1.0, 3.0), 0.841344746068543, 1e-12);
  EXPECT_DOUBLE_EQ(closed_form_accuracy(0.0, 1.0, 0.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(closed_form_accuracy(1.0, 1.0, 0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(closed_form_accuracy(-1.0, 1.0, 0.0, 1.0), 0.0);
  EXPECT_THROW(closed_form_accuracy(0.0, 1.0, 0.0, 0.0), IndeterminateAccuracy);
  EXPECT_THROW(closed_form_accuracy(1.5, 1.0, 0.0, 1.0), DomainError);
}

TEST(ClosedFormAccuracy, NoiseCancelsAtPredictedAlignment) {
  // At rho_min(C, sigma_n) the accuracy is Phi(1 / C) whatever sigma_n is.
  for (double C : {0.3, 0.7, 1.5})
    for (double sn : {0.25, 1.0, 4.0, 20.0})
      EXPECT_NEAR(closed_form_accuracy(rho_min_predicted(C, sn), 1.0, 0.0, sn), phi(1.0 / C), 1e-12);
  EXPECT_THROW(rho_min_predicted(1.0, -1.0), DomainError);
}

TEST(ClosedFormAccuracy, AgreesWithSampling) {
  const double sigma_f = 0.5, rho = 0.6;
  BinaryDataSpec s;
  s.d = 10;
  s.n_train = 10;
  s.n_test = 100000;
  s.sigma_f = sigma_f;
  s.seed = 8;
  const auto [tr, te] = sample_binary(s);
  const Eigen::VectorXd e = te.signal_basis.col(0);
  Eigen::VectorXd o = Eigen::VectorXd::Unit(10, 9);
  o -= o.dot(e) * e;
  o.normalize();
  const Eigen::VectorXd w = rho * e + std::sqrt(1.0 - rho * rho) * o;
  const Eigen::VectorXd z = signed_features(te) * w;
  const double acc = (z.array() > 0.0).cast<double>().mean();
  const double p = closed_form_accuracy(rho, 1.0, sigma_f, 1.0);
  EXPECT_NEAR(acc, p, 4.0 * std::sqrt(p * (1.0 - p) / 100000.0));
}

TEST(AlignmentFit, RecoversExactScaling) {
  const double C = 2.0;
  std::vector<std::pair<double, double>> pts;
  for (double sn : {0.5, 1.0, 2.0, 4.0}) pts.emplace_back(sn, rho_min_predicted(C, sn));
  const AlignmentFit f = fit_alignment_scaling(pts);
  EXPECT_NEAR(f.c_squared, 4.0, 1e-10);
  EXPECT_NEAR(f.intercept, 1.0, 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_NEAR(fit_alignment_scaling({pts[0], pts[3]}).c_squared, 4.0, 1e-10);
}

TEST(AlignmentFit, Errors) {
  EXPECT_THROW(fit_alignment_scaling({{1.0, 0.5}}), ContractError);
  EXPECT_THROW(fit_alignment_scaling({{1.0, 0.5}, {1.0, 0.6}}), ContractError);
  EXPECT_THROW(fit_alignment_scaling({{1.0, 0.5}, {2.0, 0.0}}), ContractError);
  EXPECT_THROW(fit_alignment_scaling({{0.0, 0.5}, {2.0, 0.6}}), ContractError);
}

TEST(Quadratic, OneDimensionalHandExample) {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 2.0;
  const QuadraticSolution q = quadratic_minimizer(signed_dataset(x, {1, 1}), 2.0);
  EXPECT_NEAR(q.S[0], 1.0, 1e-14);
  EXPECT_NEAR(q.g_star, 1.0, 1e-14);
  EXPECT_NEAR(q.L_min, 2.0, 1e-14);
  EXPECT_NEAR(q.loss_at_solution, 2.0, 1e-14);
}

TEST(Quadratic, TargetOnlyScalesSolution) {
  const auto [tr, te] = gen(10, 300, 0.5);
  const QuadraticSolution base = quadratic_minimizer(tr, 1.0);
  for (double a : {2.0, 6.0}) {
    const QuadraticSolution q = quadratic_minimizer(tr, a);
    EXPECT_LT((q.S - a * base.S).norm(), 1e-10 * a * base.S.norm());
    EXPECT_NEAR(q.L_min, a * a * base.L_min, 1e-10 * a * a);
    EXPECT_NEAR(q.L_min, q.loss_at_solution, 1e-10 * a * a);
  }
}

TEST(Quadratic, DirectionIsFisher) {
  const auto [tr, te] = gen(15, 500, 0.8);
  const QuadraticSolution q = quadratic_minimizer(tr, 1.3);
  EXPECT_LT((q.S.normalized() - lda_direction(tr)).norm(), 1e-8);
}

TEST(Quadratic, OrthogonalScalingInvertsWeights) {
  const auto [a, ta] = gen(20, 400, 0.3, 1.0, 11);
  const auto [b, tb] = gen(20, 400, 0.3, 2.5, 11);
  const Eigen::VectorXd e = a.signal_basis.col(0);
  const Eigen::VectorXd sa = quadratic_minimizer(a, 1.0).S;
  const Eigen::VectorXd sb = quadratic_minimizer(b, 1.0).S;
  EXPECT_NEAR(sb.dot(e), sa.dot(e), 1e-9);
  const Eigen::VectorXd pa = sa - sa.dot(e) * e, pb = sb - sb.dot(e) * e;
  EXPECT_LT((pb - pa / 2.5).norm(), 1e-9 * pa.norm() + 1e-12);
}

TEST(Quadratic, UnderdeterminedIsRankDeficient) {
  const auto [tr, te] = gen(30, 20, 0.0);
  EXPECT_THROW(quadratic_minimizer(tr, 1.0), RankDeficient);
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 2, 4, 3, 6;
  EXPECT_THROW(quadratic_minimizer(signed_dataset(x, {1, 1, 1}), 1.0), RankDeficient);
}

TEST(Grokking, FirstEpochAtThreshold) {
  const TrainTrace t = trace_of({{0.5, 1}, {0.98, 1}, {0.99, 1}, {0.95, 1}, {1.0, 1}});
  EXPECT_EQ(grokking_time(t, 0.99), std::optional<std::int64_t>(20));
  EXPECT_EQ(grokking_time(t, 1.0), std::optional<std::int64_t>(40));
  EXPECT_FALSE(grokking_time(trace_of({{0.6, 1}, {0.7, 1}}), 0.99).has_value());
  EXPECT_THROW(grokking_time(t, 0.5), ContractError);
  EXPECT_THROW(grokking_time(TrainTrace{}, 0.9), ContractError);
}

TEST(Grokking, NonMonotoneFlag) {
  EXPECT_TRUE(non_monotone_test_loss(trace_of({{0, 1.0}, {0, 1.2}, {0, 1.0}})));
  EXPECT_FALSE(non_monotone_test_loss(trace_of({{0, 1.0}, {0, 1.04}, {0, 0.9}})));
  EXPECT_FALSE(non_monotone_test_loss(trace_of({{0, 1.0}, {0, 0.8}, {0, 0.5}})));
  EXPECT_FALSE(non_monotone_test_loss(trace_of({{0, 1.0}, {0, 1.2}, {0, 1.5}})));
}

TEST(Geometry, RecoversGeneratorNoiseLevels) {
  const auto [tr, te] = gen(40, 4000, 0.5, 1.0, 5);
  const FeatureGeometry g = feature_geometry(tr);
  ASSERT_EQ(g.signal_basis.cols(), 1);
  // Centroid estimates carry O(sqrt(d / N)) error off the signal axis.
  EXPECT_NEAR(std::abs(g.signal_basis.col(0).dot(tr.signal_basis.col(0))), 1.0, 1e-2);
  EXPECT_NEAR(g.mean_pairwise_distance, 2.0, 0.05);
  EXPECT_NEAR(g.sigma_f_raw, 0.5, 0.03);
  EXPECT_NEAR(g.sigma_n_raw, 1.0, 0.03);
  EXPECT_NEAR(g.sigma_n_eff / g.sigma_f_eff, 2.0, 0.15);
}

TEST(Geometry, BasesAreOrthonormalAndComplete) {
  MulticlassDataSpec s;
  s.num_classes = 4;
  s.d = 12;
  s.n_train = 400;
  s.n_test = 10;
  s.seed = 2;
  const auto [tr, te] = sample_multiclass(s);
  const FeatureGeometry g = feature_geometry(tr);
  EXPECT_EQ(g.signal_basis.cols(), 3);
  EXPECT_EQ(g.orth_basis.cols(), 9);
  const Eigen::MatrixXd q1 = g.signal_basis, q2 = g.orth_basis;
  EXPECT_LT((q1.transpose() * q1 - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LT((q1.transpose() * q2).norm(), 1e-12);
  EXPECT_LT((q1 * q1.transpose() + q2 * q2.transpose() - Eigen::MatrixXd::Identity(12, 12)).norm(), 1e-12);
  // Centroid differences lie in the signal span.
  for (int c = 1; c < 4; ++c) {
    const Eigen::VectorXd diff = (g.class_means.row(c) - g.class_means.row(0)).transpose();
    EXPECT_LT((diff - q1 * (q1.transpose() * diff)).norm(), 1e-12);
  }
}

TEST(Geometry, Errors) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 0, 1, 0, 1, 1, 0;
  EXPECT_THROW(feature_geometry(x, {0, 0, 1, 1}), DegenerateSignalSubspace);
  EXPECT_THROW(feature_geometry(x, {0, 0, 0, 0}), ContractError);
  EXPECT_THROW(feature_geometry(x, {0, 1, 1, 1}), ContractError);
  EXPECT_THROW(feature_geometry(x, {0, 0, 1}), ContractError);
}

TEST(Rescale, IdentityAndSignalInvariance) {
  const auto [tr, te] = gen(20, 600, 0.5, 1.0, 9);
  const FeatureGeometry g = feature_geometry(tr);
  EXPECT_EQ(rescale_orthogonal(tr.features, g, 1.0), tr.features);
  const Eigen::MatrixXd r = rescale_orthogonal(tr.features, g, 0.2);
  EXPECT_LT((r * g.signal_basis - tr.features * g.signal_basis).norm(), 1e-10);
  EXPECT_LT((r * g.orth_basis - 0.2 * tr.features * g.orth_basis).norm(), 1e-10);
  EXPECT_THROW(rescale_orthogonal(tr.features, g, -0.1), DomainError);
}

TEST(Rescale, ScalesMeasuredOrthogonalNoise) {
  const auto [tr, te] = gen(20, 600, 0.5, 1.0, 9);
  const FeatureGeometry g = feature_geometry(tr);
  Dataset scaled = tr;
  scaled.features = rescale_orthogonal(tr.features, g, 3.0);
  const FeatureGeometry h = feature_geometry(scaled);
  EXPECT_NEAR(h.sigma_n_raw, 3.0 * g.sigma_n_raw, 1e-9);
  EXPECT_NEAR(h.sigma_f_raw, g.sigma_f_raw, 1e-9);
  EXPECT_NEAR(h.mean_pairwise_distance, g.mean_pairwise_distance, 1e-9);
}

TEST(Simplex, EqualRowsCollapseToOrigin) {
  MulticlassDataSpec s;
  s.num_classes = 3;
  s.d = 6;
  s.n_train = 30;
  s.n_test = 3;
  const auto [tr, te] = sample_multiclass(s);
  ModelParams p;
  p.multiclass = true;
  p.W = Eigen::MatrixXd::Ones(3, 6);
  p.b = Eigen::VectorXd::Constant(3, 0.5);
  const Eigen::MatrixXd pts = simplex_projection(p, tr, {0, 1, 2});
  EXPECT_EQ(pts.rows(), 30);
  EXPECT_LT(pts.norm(), 1e-12);
  EXPECT_DOUBLE_EQ(cluster_radius(pts, tr.labels, {0, 1, 2}), 0.0);
  EXPECT_THROW(simplex_projection(p, tr, {0, 1, 1}), ContractError);
  EXPECT_THROW(simplex_projection(p, tr, {0, 1, 3}), ContractError);
  ModelParams two = p;
  two.W = Eigen::MatrixXd::Ones(2, 6);
  EXPECT_THROW(simplex_projection(two, tr, {0, 1, 2}), ContractError);
}

TEST(Simplex, ProjectionIsLogitDifference) {
  Dataset d;
  d.scheme = LabelScheme::class_index;
  d.num_classes = 3;
  d.features = Eigen::MatrixXd(1, 2);
  d.features << 1.0, 2.0;
  d.labels = {0};
  ModelParams p;
  p.multiclass = true;
  p.W = Eigen::MatrixXd(3, 2);
  p.W << 1, 1, 0, 1, 2, 0;
  p.b = Eigen::Vector3d(0.5, 0.0, -1.0);
  // z = (3.5, 2, 1): z1 - z2 = 1.5, z1 - z3 = 2.5.
  const Eigen::MatrixXd pts = simplex_projection(p, d, {0, 1, 2});
  EXPECT_NEAR(pts(0, 0), 1.5, 1e-15);
  EXPECT_NEAR(pts(0, 1), 2.5, 1e-15);
}

TEST(ClusterRadius, MaxDistanceToCentroid) {
  Eigen::MatrixXd pts(4, 2);
  pts << 0, 0, 2, 0, 10, 10, 10, 13;
  EXPECT_DOUBLE_EQ(cluster_radius(pts, {0, 0, 1, 1}, {0}), 1.0);
  EXPECT_DOUBLE_EQ(cluster_radius(pts, {0, 0, 1, 1}, {0, 1}), 1.5);
  EXPECT_DOUBLE_EQ(cluster_radius(pts, {0, 0, 1, 1}, {5}), 0.0);
}

TEST(Quadrature, GaussianMoments) {
  const GaussRule r = gauss_hermite(8);
  EXPECT_NEAR(r.weights.sum(), 1.0, 1e-14);
  EXPECT_NEAR(r.expect([](double y) { return y; }), 0.0, 1e-13);
  EXPECT_NEAR(r.expect([](double y) { return y * y; }), 1.0, 1e-12);
  EXPECT_NEAR(r.expect([](double y) { return std::pow(y, 4); }), 3.0, 1e-11);
  EXPECT_NEAR(r.expect([](double y) { return std::pow(y, 6); }), 15.0, 1e-10);
  EXPECT_NEAR(gauss_hermite(40).expect([](double y) { return std::cos(y); }), std::exp(-0.5), 1e-12);
  EXPECT_THROW(gauss_hermite(0), ContractError);
}

TEST(Quadrature, GoldenSection) {
  const auto [x, fx] = golden_section_minimize([](double t) { return (t - 1.3) * (t - 1.3) + 2.0; }, 0.0, 5.0);
  EXPECT_NEAR(x, 1.3, 1e-7);
  EXPECT_NEAR(fx, 2.0, 1e-12);
}

TEST(CvRisk, ZeroSpreadIsPointLoss) {
  const GaussRule rule = gauss_hermite(60);
  for (double a : {0.1, 0.5}) {
    LossSpec s;
    s.alpha = a;
    EXPECT_NEAR(cv_risk(0.0, s, rule), per_sample_loss(target_logit(s), s), 1e-10);
  }
  EXPECT_THROW(cv_risk(-1.0, LossSpec{}, rule), DomainError);
}

TEST(CvRisk, QuadratureMatchesSampling) {
  LossSpec s;
  s.alpha = 0.3;
  const double g = 1.1, r = 0.7;
  const double q = gaussian_logit_risk(g, r, s, gauss_hermite(80));
  std::mt19937_64 eng(17);
  std::normal_distribution<double> nd;
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = per_sample_loss(g * (1.0 + r * nd(eng)), s);
    sum += v;
    sq += v * v;
  }
  const double m = sum / n, se = std::sqrt((sq / n - m * m) / n);
  EXPECT_NEAR(q, m, 4.0 * se);
}

TEST(LogitStats, LinearInWeights) {
  ModelParams p;
  const auto [tr, te] = gen(10, 200, 0.5);
  p.S = lda_direction(tr);
  const MeanStd a = logit_stats(p, tr);
  p.S *= 3.0;
  const MeanStd b = logit_stats(p, tr);
  EXPECT_NEAR(b.mean, 3.0 * a.mean, 1e-12);
  EXPECT_NEAR(b.std, 3.0 * a.std, 1e-12);
  p.multiclass = true;
  EXPECT_THROW(logit_stats(p, tr), ContractError);
}

TEST(CvRisk, IncreasingInSpread) {
  const GaussRule rule = gauss_hermite(64);
  for (auto kind : {RegularizerKind::quadratic, RegularizerKind::label_smoothing})
    for (double a : {0.1, 0.5}) {
      LossSpec s;
      s.alpha = a;
      s.kind = kind;
      double prev = -1.0;
      for (double r : {0.0, 0.2, 0.5, 1.0, 2.0}) {
        const double q = cv_risk(r, s, rule);
        EXPECT_GT(q, prev) << "r " << r << " alpha " << a;
        prev = q;
      }
    }
}

TEST(Simplex, UnregularizedCloudsKeepSpreading) {
  MulticlassDataSpec s;
  s.num_classes = 3;
  s.d = 60;
  s.n_train = 30;
  s.n_test = 3;
  s.seed = 12;
  const auto [tr, te] = sample_multiclass(s);
  TrainConfig c;
  c.loss.alpha = 0.0;
  c.epochs = 4000;
  c.learning_rate = 0.5;
  c.snapshot_epochs = {200, 1000, 4000};
  const TrainResult r = train(tr, te, c);
  std::vector<double> radii;
  for (const auto& [epoch, p] : r.trace.snapshots)
    radii.push_back(cluster_radius(simplex_projection(p, tr, {0, 1, 2}), tr.labels, {0, 1, 2}));
  ASSERT_EQ(radii.size(), 3u);
  EXPECT_LT(radii[0], radii[1]);
  EXPECT_LT(radii[1], radii[2]);
}
