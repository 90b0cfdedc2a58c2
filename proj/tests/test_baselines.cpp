// Baseline classifiers: stratified guessing and the bagged-tree forest.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include <diagraph/diagraph.hpp>

using namespace diagraph;
using Catch::Approx;

namespace {

// Three well-separated clusters in 5 dimensions: class c lives near 10c.
void clustered_data(Rng& rng, std::size_t per_class, Mat& x, std::vector<int>& y) {
  const std::size_t n = 3 * per_class;
  x = Mat(n, 5);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i / per_class);
    y[i] = c;
    for (std::size_t j = 0; j < 5; ++j) {
      x.at(i, j) = 10.0 * c + rng.uniform(-1.0, 1.0);
    }
  }
}

}  // namespace

TEST_CASE("graph mean vector averages node rows") {
  const Mat m = Mat::from_rows({{1.0, 2.0}, {3.0, 6.0}, {5.0, 10.0}});
  const std::vector<double> mean = graph_mean_vector(m);
  REQUIRE(mean.size() == 2);
  REQUIRE(mean[0] == Approx(3.0));
  REQUIRE(mean[1] == Approx(6.0));
  REQUIRE_THROWS_AS(graph_mean_vector(Mat(0, 3)), ShapeError);
}

TEST_CASE("stratified guessing follows the training label distribution") {
  const std::vector<int> train{0, 0, 0, 1};  // 75% / 25%
  const std::size_t n = 40000;
  const std::vector<int> pred = dummy_predict(train, 3, n, 99);
  REQUIRE(pred.size() == n);

  std::vector<double> freq(3, 0.0);
  for (int p : pred) {
    REQUIRE(p >= 0);
    REQUIRE(p < 3);
    freq[static_cast<std::size_t>(p)] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(n);
  REQUIRE(freq[0] == Approx(0.75).margin(0.02));
  REQUIRE(freq[1] == Approx(0.25).margin(0.02));
  REQUIRE(freq[2] <= 1e-3);  // class absent from training is (near) never drawn
}

TEST_CASE("stratified guessing is deterministic per seed") {
  const std::vector<int> train{0, 1, 1, 2, 2, 2};
  REQUIRE(dummy_predict(train, 3, 50, 7) == dummy_predict(train, 3, 50, 7));
  REQUIRE(dummy_predict(train, 3, 500, 7) != dummy_predict(train, 3, 500, 8));
}

TEST_CASE("stratified guessing validates its labels") {
  REQUIRE_THROWS_AS(dummy_predict({}, 3, 5, 1), LabelError);
  REQUIRE_THROWS_AS(dummy_predict({0, 3}, 3, 5, 1), LabelError);
  REQUIRE_THROWS_AS(dummy_predict({-1}, 3, 5, 1), LabelError);
}

TEST_CASE("forest fits separable training data and generalizes") {
  Rng rng(20260816);
  Mat train_x, test_x;
  std::vector<int> train_y, test_y;
  clustered_data(rng, 20, train_x, train_y);
  clustered_data(rng, 10, test_x, test_y);

  const RandomForest forest = forest_fit(train_x, train_y, 3, ForestConfig{}, 505);
  REQUIRE(forest.size() == 100);
  REQUIRE(forest.n_classes() == 3);
  REQUIRE(forest.predict(train_x) == train_y);
  REQUIRE(forest.predict(test_x) == test_y);
}

TEST_CASE("forest solves a depth-two interaction") {
  // XOR over two binary features, replicated: no single split separates it.
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int rep = 0; rep < 6; ++rep) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        rows.push_back({static_cast<double>(a), static_cast<double>(b)});
        y.push_back(a ^ b);
      }
    }
  }
  const Mat x = Mat::from_rows(rows);
  const RandomForest forest = forest_fit(x, y, 2, ForestConfig{}, 31);
  REQUIRE(forest.predict(x) == y);
}

TEST_CASE("forest predictions do not depend on tree order") {
  Rng rng(606);
  Mat x;
  std::vector<int> y;
  clustered_data(rng, 15, x, y);
  RandomForest forest = forest_fit(x, y, 3, ForestConfig{}, 77);
  const std::vector<int> before = forest.predict(x);
  Rng shuffler(1234);
  forest.shuffle_trees(shuffler);
  REQUIRE(forest.predict(x) == before);
}

TEST_CASE("forest training is deterministic per seed") {
  Rng rng(707);
  Mat x;
  std::vector<int> y;
  clustered_data(rng, 12, x, y);
  Mat probe(4, 5);
  for (std::size_t i = 0; i < probe.rows; ++i) {
    for (std::size_t j = 0; j < probe.cols; ++j) probe.at(i, j) = rng.uniform(-2.0, 22.0);
  }
  const RandomForest a = forest_fit(x, y, 3, ForestConfig{}, 11);
  const RandomForest b = forest_fit(x, y, 3, ForestConfig{}, 11);
  REQUIRE(a.predict(probe) == b.predict(probe));
}

TEST_CASE("forest recovers a clean minority class under class weighting") {
  // 30 majority points near 0, 3 minority points near 10, clean gap.
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  Rng rng(808);
  for (int i = 0; i < 30; ++i) {
    rows.push_back({rng.uniform(-1.0, 1.0)});
    y.push_back(0);
  }
  for (int i = 0; i < 3; ++i) {
    rows.push_back({10.0 + rng.uniform(-1.0, 1.0)});
    y.push_back(1);
  }
  const RandomForest forest = forest_fit(Mat::from_rows(rows), y, 2, ForestConfig{}, 99);
  const Mat probe = Mat::from_rows({{0.0}, {10.0}});
  REQUIRE(forest.predict(probe) == std::vector<int>{0, 1});
}

TEST_CASE("forest rejects malformed input") {
  const Mat x = Mat::from_rows({{1.0}, {2.0}});
  REQUIRE_THROWS_AS(forest_fit(x, {0}, 2, ForestConfig{}, 1), ShapeError);
  REQUIRE_THROWS_AS(forest_fit(Mat(0, 2), {}, 2, ForestConfig{}, 1), ShapeError);
  ForestConfig none;
  none.n_trees = 0;
  REQUIRE_THROWS_AS(forest_fit(x, {0, 1}, 2, none, 1), SpecError);

  RandomForest empty;
  REQUIRE_THROWS_AS(empty.predict(x), UsageError);

  const RandomForest fitted = forest_fit(x, {0, 1}, 2, ForestConfig{}, 1);
  REQUIRE_THROWS_AS(fitted.predict(Mat(1, 3)), ShapeError);
}

TEST_CASE("depth-limited stumps stay deterministic and in range") {
  Rng rng(909);
  Mat x;
  std::vector<int> y;
  clustered_data(rng, 10, x, y);
  ForestConfig stumps;
  stumps.max_depth = 1;
  const RandomForest forest = forest_fit(x, y, 3, stumps, 5);
  const std::vector<int> pred = forest.predict(x);
  for (int p : pred) {
    REQUIRE(p >= 0);
    REQUIRE(p < 3);
  }
  const RandomForest again = forest_fit(x, y, 3, stumps, 5);
  REQUIRE(again.predict(x) == pred);
}
