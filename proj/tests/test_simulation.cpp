#include <algorithm>
#include <cmath>
#include <vector>

#include "catch2/catch_amalgamated.hpp"

#include "fsir/simulation.hpp"

using namespace fsir;

TEST_CASE("every Brownian path starts at zero", "[simulation]") {
  SimConfig sc;
  sc.n = 200;
  sc.seed = 701;
  const TrajectorySet paths = simulate_brownian(sc);
  REQUIRE(paths.grid.size() == 31);
  REQUIRE(paths.paths.rows() == 200);
  REQUIRE(paths.paths.cols() == 31);
  for (int i = 0; i < 200; ++i) REQUIRE(paths.paths(i, 0) == 0.0);
}

TEST_CASE("Brownian marginals have the right variances", "[simulation]") {
  SimConfig sc;
  sc.n = 10000;
  sc.seed = 702;
  const TrajectorySet paths = simulate_brownian(sc);
  const auto var_at = [&](int col) {
    const double mean = paths.paths.col(col).mean();
    return paths.paths.col(col).array().square().mean() - mean * mean;
  };
  REQUIRE(var_at(30) == Catch::Approx(1.0).margin(0.05));   // Var X(1) = 1
  REQUIRE(var_at(15) == Catch::Approx(0.5).margin(0.04));   // Var X(0.5) = 0.5
  // independent increments: Cov(X(0.5), X(1) - X(0.5)) = 0
  Eigen::ArrayXd first = paths.paths.col(15).array();
  Eigen::ArrayXd inc = paths.paths.col(30).array() - first;
  const double cov = (first * inc).mean() - first.mean() * inc.mean();
  REQUIRE(cov == Catch::Approx(0.0).margin(0.04));
}

TEST_CASE("path simulation is deterministic and prefix-stable", "[simulation]") {
  SimConfig small;
  small.n = 50;
  small.seed = 703;
  SimConfig big = small;
  big.n = 100;
  const TrajectorySet a = simulate_brownian(small);
  const TrajectorySet b = simulate_brownian(big);
  const TrajectorySet c = simulate_brownian(small);
  // growing n must not disturb earlier subjects' draws
  REQUIRE((a.paths.array() == b.paths.topRows(50).array()).all());
  REQUIRE((a.paths.array() == c.paths.array()).all());
}

TEST_CASE("the true direction has exactly unit norm on the simulation grid",
          "[simulation]") {
  for (int p : {31, 101, 1001}) {
    const TrueModel model = default_true_model(linspace(0.0, 1.0, p));
    REQUIRE(l2_norm(model.beta) == Catch::Approx(1.0).margin(1e-12));
    // shape check: sqrt(2) sin(3 pi t / 2)
    const double t = model.beta.grid[p / 3];
    REQUIRE(model.beta.values[p / 3] ==
            Catch::Approx(std::sqrt(2.0) * std::sin(1.5 * M_PI * t)).margin(1e-14));
  }
}

TEST_CASE("responses follow the exponential single-index link", "[simulation]") {
  SimConfig sc;
  sc.n = 3;
  sc.seed = 704;
  sc.noise_sd = 0.0;
  TrajectorySet flat;
  flat.grid = linspace(0.0, 1.0, 31);
  flat.paths = Eigen::MatrixXd::Zero(3, 31);
  const TrueModel model = default_true_model(flat.grid);
  const Eigen::VectorXd y = generate_responses(flat, model, sc);
  for (int i = 0; i < 3; ++i) REQUIRE(y[i] == 4.0);  // 3 + exp(0), no noise

  // noise-free responses match an independent quadrature-plus-exp oracle
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y2 = generate_responses(paths, model, sc);
  for (int i = 0; i < 3; ++i) {
    double index = 0.0;
    for (int j = 0; j + 1 < 31; ++j) {
      const double f0 = model.beta.values[j] * paths.paths(i, j);
      const double f1 = model.beta.values[j + 1] * paths.paths(i, j + 1);
      index += 0.5 * (f0 + f1) * (paths.grid[j + 1] - paths.grid[j]);
    }
    REQUIRE(y2[i] == Catch::Approx(3.0 + std::exp(index)).margin(1e-12));
  }
}

TEST_CASE("the index distribution matches the second eigenvalue scale", "[simulation]") {
  SimConfig sc;
  sc.n = 10000;
  sc.seed = 705;
  sc.noise_sd = 0.0;
  const TrajectorySet paths = simulate_brownian(sc);
  const TrueModel model = default_true_model(paths.grid);
  const Eigen::VectorXd y = generate_responses(paths, model, sc);

  std::vector<double> index_exp(10000);
  double var = 0.0, mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double e = y[i] - 3.0;  // exp(index), noise-free
    index_exp[i] = e;
    const double idx = std::log(e);
    mean += idx;
    var += idx * idx;
  }
  mean /= 10000.0;
  var = var / 10000.0 - mean * mean;
  // direction is the second Brownian eigenfunction: variance 4 / (9 pi^2)
  REQUIRE(var == Catch::Approx(4.0 / (9.0 * M_PI * M_PI)).epsilon(0.1));

  // central 90% of exp(index) concentrates inside (0.4, 1.8)
  std::sort(index_exp.begin(), index_exp.end());
  REQUIRE(index_exp[500] > 0.4);
  REQUIRE(index_exp[9499] < 1.8);

  // noise adds on top with the configured spread
  SimConfig noisy = sc;
  noisy.noise_sd = 0.1;
  const Eigen::VectorXd yn = generate_responses(paths, model, noisy);
  double nvar = 0.0, nmean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double eps = yn[i] - y[i];
    nmean += eps;
    nvar += eps * eps;
  }
  nmean /= 10000.0;
  nvar = nvar / 10000.0 - nmean * nmean;
  REQUIRE(nmean == Catch::Approx(0.0).margin(0.005));
  REQUIRE(std::sqrt(nvar) == Catch::Approx(0.1).epsilon(0.05));
}

TEST_CASE("sparsification samples interior grid points per subject", "[simulation]") {
  SimConfig sc;
  sc.n = 10000;
  sc.seed = 706;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset data = sparsify(paths, y, sc);

  REQUIRE(data.n() == 10000);
  long total = 0;
  for (int i = 0; i < data.n(); ++i) {
    const auto& s = data.subjects[i];
    REQUIRE(s.id == std::to_string(i + 1));
    REQUIRE(s.times.size() >= 2);
    REQUIRE(s.times.size() <= 10);
    REQUIRE(s.response == y[i]);
    for (Eigen::Index j = 0; j < s.times.size(); ++j) {
      REQUIRE(s.times[j] > 0.0);  // index 0 is never sampled
      REQUIRE(s.times[j] <= 1.0);
      if (j > 0) REQUIRE(s.times[j] > s.times[j - 1]);
      // values come straight off the stored path
      const double t = s.times[j];
      const int col = static_cast<int>(std::lround(t * 30.0));
      REQUIRE(s.values[j] == paths.paths(i, col));
    }
    total += s.times.size();
  }
  const double mean_obs = static_cast<double>(total) / 10000.0;
  REQUIRE(mean_obs >= 5.9);  // mean of Uniform{2..10} is 6
  REQUIRE(mean_obs <= 6.1);
}

TEST_CASE("fixed observation counts and exhaustive selection", "[simulation]") {
  SimConfig sc;
  sc.n = 50;
  sc.seed = 707;
  sc.fixed_n_obs = 30;  // the whole sampling pool on a 31-grid
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset data = sparsify(paths, y, sc);
  for (const auto& s : data.subjects) {
    REQUIRE(s.times.size() == 30);
    for (int j = 0; j < 30; ++j)
      REQUIRE(s.times[j] == paths.grid[j + 1]);  // t_1 .. t_30, all of them
  }

  SimConfig six = sc;
  six.fixed_n_obs = 6;
  const LongitudinalDataset d6 = sparsify(paths, y, six);
  for (const auto& s : d6.subjects) REQUIRE(s.times.size() == 6);
}

TEST_CASE("sparsification is deterministic in the seed", "[simulation]") {
  SimConfig sc;
  sc.n = 40;
  sc.seed = 708;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset a = sparsify(paths, y, sc);
  const LongitudinalDataset b = sparsify(paths, y, sc);
  REQUIRE(a.n() == b.n());
  for (int i = 0; i < a.n(); ++i) {
    REQUIRE((a.subjects[i].times.array() == b.subjects[i].times.array()).all());
    REQUIRE((a.subjects[i].values.array() == b.subjects[i].values.array()).all());
  }
  SimConfig other = sc;
  other.seed = 709;
  const LongitudinalDataset c = sparsify(paths, y, other);
  bool differs = false;
  for (int i = 0; i < a.n() && !differs; ++i)
    differs = a.subjects[i].times.size() != c.subjects[i].times.size() ||
              (a.subjects[i].times.array() != c.subjects[i].times.array()).any();
  REQUIRE(differs);
}

TEST_CASE("complete datasets keep every interior grid point", "[simulation]") {
  SimConfig sc;
  sc.n = 10;
  sc.seed = 710;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset data = complete_dataset(paths, y);
  for (const auto& s : data.subjects) {
    REQUIRE(s.times.size() == 30);
    REQUIRE(s.times[0] == paths.grid[1]);
    REQUIRE(s.times[29] == paths.grid[30]);
  }
}

TEST_CASE("invalid simulation configs name the offending field", "[simulation]") {
  SimConfig bad;
  bad.n = 0;
  REQUIRE_THROWS_MATCHES(validate_sim_config(bad), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::ConfigInvalid && e.field() == "n";
                         }));
  SimConfig range;
  range.n_obs_max = 31;  // only 30 interior points exist
  REQUIRE_THROWS_MATCHES(validate_sim_config(range), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::ConfigInvalid;
                         }));
  SimConfig noise;
  noise.noise_sd = -0.1;
  REQUIRE_THROWS_MATCHES(validate_sim_config(noise), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::ConfigInvalid &&
                                  e.field() == "noise_sd";
                         }));
}
