#include <cmath>

#include <Eigen/Dense>

#include "catch2/catch_amalgamated.hpp"

#include "fsir/edr.hpp"
#include "fsir/metrics.hpp"
#include "fsir/rng.hpp"
#include "fsir/simulation.hpp"

using namespace fsir;

namespace {

OperatorMatrix on_unit_grid(const Eigen::MatrixXd& values) {
  OperatorMatrix op;
  op.grid = linspace(0.0, static_cast<double>(values.rows() - 1),
                     static_cast<int>(values.rows()));
  op.values = values;
  return op;
}

struct SimFit {
  EdrFit fit;
  TrueModel model;
  TrajectorySet eval;
};

SimFit pipeline_fit(int n, bool sparse, std::uint64_t seed) {
  SimConfig sc;
  sc.n = n;
  sc.seed = seed;
  const TrajectorySet paths = simulate_brownian(sc);
  const TrueModel model = default_true_model(paths.grid);
  const Eigen::VectorXd y = generate_responses(paths, model, sc);
  const LongitudinalDataset data = sparse ? sparsify(paths, y, sc) : complete_dataset(paths, y);
  const SmootherSpec spec = auto_bandwidths(data);

  SimConfig ec;
  ec.n = 500;
  ec.seed = rng::derive_key(seed, rng::Tag::eval, 0);
  return SimFit{fit(data, spec, paths.grid, 0.95, 1), model, simulate_brownian(ec)};
}

}  // namespace

TEST_CASE("an injected rank-one target recovers the first coordinate", "[edr]") {
  const int p = 3;
  const OperatorMatrix gamma = on_unit_grid(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd e11 = Eigen::MatrixXd::Zero(p, p);
  e11(0, 0) = 1.0;
  const OperatorMatrix gamma_e = on_unit_grid(e11);

  const EdrFit f = fit_from_operators(gamma, gamma_e, 0.99, 1);
  REQUIRE(f.k == 1);
  REQUIRE(f.eigenvalues[0] == Catch::Approx(1.0).margin(1e-10));
  REQUIRE(f.beta[0].values[0] == Catch::Approx(1.0).margin(1e-10));
  REQUIRE(std::abs(f.beta[0].values[1]) < 1e-10);
  REQUIRE(std::abs(f.beta[0].values[2]) < 1e-10);
  // beta and eta agree when the covariance is the identity
  REQUIRE((f.beta[0].values - f.eta[0].values).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(f.diagnostics.eta_orthonormality_error < 1e-10);
  REQUIRE(f.diagnostics.beta_gamma_error < 1e-10);

  // the target operator has rank one, so a second direction must be refused
  REQUIRE_THROWS_MATCHES(fit_from_operators(gamma, gamma_e, 0.99, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::RankTooSmall;
                         }));
}

TEST_CASE("k beyond the retained covariance rank is refused", "[edr]") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d(0, 0) = 100.0;
  d(1, 1) = 1.0;
  d(2, 2) = 0.5;
  const OperatorMatrix gamma = on_unit_grid(d);
  const OperatorMatrix gamma_e = on_unit_grid(Eigen::MatrixXd::Identity(3, 3));
  // fve 0.9 keeps only the dominant component (100/101.5 > 0.9)
  REQUIRE_THROWS_MATCHES(fit_from_operators(gamma, gamma_e, 0.9, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::RankTooSmall;
                         }));
}

TEST_CASE("operator grids must match", "[edr]") {
  const OperatorMatrix gamma = on_unit_grid(Eigen::MatrixXd::Identity(3, 3));
  OperatorMatrix other = on_unit_grid(Eigen::MatrixXd::Identity(3, 3));
  other.grid[2] += 0.5;
  REQUIRE_THROWS_MATCHES(fit_from_operators(gamma, other, 0.95, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::GridMismatch;
                         }));
}

TEST_CASE("complete-data fits recover the true direction", "[edr]") {
  const SimFit sf = pipeline_fit(200, false, 601);
  const double corr = projection_correlation(sf.fit.beta[0], sf.model.beta, sf.eval);
  REQUIRE(corr >= 0.97);
  REQUIRE(sf.fit.diagnostics.eta_orthonormality_error < 1e-6);
  REQUIRE(sf.fit.diagnostics.beta_gamma_error < 1e-4);
  REQUIRE(sf.fit.eigenvalues[0] > 0.0);
  REQUIRE(sf.fit.fve >= 0.95);
}

TEST_CASE("sparse-data fits still track the true direction", "[edr]") {
  const SimFit sf = pipeline_fit(200, true, 602);
  const double corr = projection_correlation(sf.fit.beta[0], sf.model.beta, sf.eval);
  REQUIRE(corr >= 0.85);
}

TEST_CASE("refitting the same data is bit-identical", "[edr]") {
  SimConfig sc;
  sc.n = 80;
  sc.seed = 603;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset data = sparsify(paths, y, sc);
  const SmootherSpec spec = auto_bandwidths(data);
  const EdrFit a = fit(data, spec, paths.grid, 0.95, 1);
  const EdrFit b = fit(data, spec, paths.grid, 0.95, 1);
  REQUIRE(a.eigenvalues[0] == b.eigenvalues[0]);
  REQUIRE((a.beta[0].values.array() == b.beta[0].values.array()).all());
  REQUIRE((a.eta[0].values.array() == b.eta[0].values.array()).all());
}

TEST_CASE("scaling every trajectory leaves the standardized problem unchanged", "[edr]") {
  SimConfig sc;
  sc.n = 150;
  sc.seed = 604;
  const TrajectorySet paths = simulate_brownian(sc);
  const TrueModel model = default_true_model(paths.grid);
  const Eigen::VectorXd y = generate_responses(paths, model, sc);
  const LongitudinalDataset data = complete_dataset(paths, y);

  TrajectorySet scaled = paths;
  scaled.paths *= 3.7;
  LongitudinalDataset data_scaled = complete_dataset(scaled, y);

  const SmootherSpec spec = auto_bandwidths(data);
  SmootherSpec spec_scaled = spec;  // identical windows; values scale linearly

  const EdrFit a = fit(data, spec, paths.grid, 0.95, 1);
  const EdrFit b = fit(data_scaled, spec_scaled, paths.grid, 0.95, 1);

  const FunctionOnGrid na = normalize_l2(align_sign_to(a.beta[0], model.beta));
  const FunctionOnGrid nb = normalize_l2(align_sign_to(b.beta[0], model.beta));
  REQUIRE((na.values - nb.values).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("subject order does not matter", "[edr]") {
  SimConfig sc;
  sc.n = 60;
  sc.seed = 605;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  LongitudinalDataset data = sparsify(paths, y, sc);
  const SmootherSpec spec = auto_bandwidths(data);
  const EdrFit a = fit(data, spec, paths.grid, 0.95, 1);

  LongitudinalDataset shuffled = data;
  std::reverse(shuffled.subjects.begin(), shuffled.subjects.end());
  const EdrFit b = fit(shuffled, spec, paths.grid, 0.95, 1);
  REQUIRE((a.beta[0].values - b.beta[0].values).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(a.eigenvalues[0] == Catch::Approx(b.eigenvalues[0]).margin(1e-12));
}

TEST_CASE("projection computes trapezoid indices and checks grids", "[edr]") {
  const SimFit sf = pipeline_fit(50, false, 606);
  const Eigen::VectorXd grid = sf.fit.beta[0].grid;

  // a zero trajectory projects to zero
  FunctionOnGrid zero{grid, Eigen::VectorXd::Zero(grid.size())};
  REQUIRE(project(sf.fit, zero)[0] == 0.0);

  // projecting the direction itself gives its squared norm under quadrature
  const FunctionOnGrid& b1 = sf.fit.beta[0];
  const double norm2 = inner_trapz(b1, b1);
  REQUIRE(project(sf.fit, b1)[0] == Catch::Approx(norm2).margin(1e-12));

  // independent quadrature oracle on a Brownian path from seed 7
  SimConfig one;
  one.n = 1;
  one.seed = 7;
  const TrajectorySet path = simulate_brownian(one);
  FunctionOnGrid x{path.grid, path.paths.row(0).transpose()};
  double oracle = 0.0;
  for (Eigen::Index j = 0; j + 1 < grid.size(); ++j) {
    const double f0 = b1.values[j] * x.values[j];
    const double f1 = b1.values[j + 1] * x.values[j + 1];
    oracle += 0.5 * (f0 + f1) * (grid[j + 1] - grid[j]);
  }
  REQUIRE(project(sf.fit, x)[0] == Catch::Approx(oracle).margin(1e-10));

  FunctionOnGrid wrong{linspace(0.0, 1.0, 11), Eigen::VectorXd::Zero(11)};
  REQUIRE_THROWS_MATCHES(project(sf.fit, wrong), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::GridMismatch;
                         }));
}

TEST_CASE("sign alignment flips only on negative inner products", "[edr]") {
  const SimFit sf = pipeline_fit(50, false, 607);
  const FunctionOnGrid ref = sf.model.beta;

  EdrFit flipped = sf.fit;
  flipped.beta[0].values = -flipped.beta[0].values;
  flipped.eta[0].values = -flipped.eta[0].values;
  const bool originally_positive = inner_trapz(sf.fit.beta[0], ref) > 0.0;

  const EdrFit a = sign_align(sf.fit, ref, 0);
  const EdrFit b = sign_align(flipped, ref, 0);
  REQUIRE((a.beta[0].values - b.beta[0].values).cwiseAbs().maxCoeff() < 1e-15);
  if (originally_positive)
    REQUIRE((a.beta[0].values - sf.fit.beta[0].values).cwiseAbs().maxCoeff() == 0.0);

  // an orthogonal reference leaves the fit untouched
  FunctionOnGrid zero{ref.grid, Eigen::VectorXd::Zero(ref.grid.size())};
  const EdrFit c = sign_align(sf.fit, zero, 0);
  REQUIRE((c.beta[0].values - sf.fit.beta[0].values).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE_THROWS_MATCHES(sign_align(sf.fit, ref, 5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::ConfigInvalid;
                         }));
}

TEST_CASE("a ridiculous k is refused on real data", "[edr]") {
  SimConfig sc;
  sc.n = 40;
  sc.seed = 608;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset data = complete_dataset(paths, y);
  const SmootherSpec spec = auto_bandwidths(data);
  REQUIRE_THROWS_MATCHES(fit(data, spec, paths.grid, 0.5, 10), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::RankTooSmall;
                         }));
}
