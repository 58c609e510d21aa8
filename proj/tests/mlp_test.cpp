#include <gtest/gtest.h>

#include "support.hpp"

using namespace fdia;

namespace {

MlpModel small_net(std::uint64_t seed, int in = 5) {
  const std::vector<LayerSpec> specs{{in, 7, Activation::relu, 0.0}, {7, 4, Activation::relu, 0.0}, {4, 2, Activation::identity, 0.0}};
  auto model = init_model(specs, 1.0, seed);
  Rng rng(seed + 1);
  for (auto& l : model.layers) l.bias = test::random_vector(l.bias.size(), rng, 0.1);
  return model;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::max(std::abs(a), std::abs(b))); }

TEST(InitModel, DeterministicAndCounted) {
  const auto specs = detector_layers(186);
  const auto a = init_model(specs, 1.0, 5);
  const auto b = init_model(specs, 1.0, 5);
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].weights, b.layers[l].weights);
  EXPECT_EQ(a.parameter_count(), 186u * 128 + 128 + 128 * 64 + 64 + 64 * 16 + 16 + 16 * 2 + 2);
  EXPECT_EQ(a.parameter_count(), 33266u);
  for (const auto& l : a.layers) {
    const double s = std::sqrt(6.0 / (l.spec.input_dim + l.spec.output_dim));
    EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), s);
    EXPECT_EQ(l.bias, Vector::Zero(l.spec.output_dim));
  }
}

TEST(InitModel, RejectsBadSpecs) {
  EXPECT_THROW(init_model(std::vector<LayerSpec>{}, 1.0, 1), UsageError);
  EXPECT_THROW(init_model(std::vector<LayerSpec>{{3, 4}, {5, 2}}, 1.0, 1), DimensionError);
  EXPECT_THROW(init_model(detector_layers(3), 0.0, 1), UsageError);
}

TEST(Forward, ZeroWeightsGiveEvenOdds) {
  auto model = init_model(detector_layers(6), 1.0, 2);
  for (auto& l : model.layers) l.weights.setZero();
  const auto r = forward(model, Vector::Ones(6), Mode::infer);
  EXPECT_DOUBLE_EQ(r.probabilities[0], 0.5);
  EXPECT_DOUBLE_EQ(r.probabilities[1], 0.5);
  EXPECT_EQ(input_gradient(model, Vector::Ones(6), kFalse), Vector::Zero(6));
}

TEST(Forward, HighTemperatureFlattensOutput) {
  auto model = small_net(3);
  model.temperature = 1e6;
  Rng rng(4);
  const auto r = forward(model, test::random_vector(5, rng, 10.0), Mode::infer);
  EXPECT_NEAR(r.probabilities[0], 0.5, 1e-4);
}

TEST(Forward, ProbabilitiesAreValidAndInferenceIsDeterministic) {
  const auto model = small_net(5);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const Vector x = test::random_vector(5, rng, 100.0);
    const auto a = forward(model, x, Mode::infer);
    const auto b = forward(model, x, Mode::infer);
    EXPECT_EQ(a.probabilities, b.probabilities);
    EXPECT_NEAR(a.probabilities.sum(), 1.0, 1e-9);
    EXPECT_GE(a.probabilities.minCoeff(), 0.0);
    EXPECT_LE(a.probabilities.maxCoeff(), 1.0);
  }
  EXPECT_THROW(forward(model, Vector::Zero(4), Mode::infer), DimensionError);
  Vector bad = Vector::Zero(5);
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(model, bad, Mode::infer), DataError);
}

TEST(Forward, TemperatureNeverChangesTheArgmax) {
  const auto model = small_net(7);
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Vector x = test::random_vector(5, rng);
    Eigen::Index base = 0;
    forward_batch(model, x, Mode::infer).probabilities.col(0).maxCoeff(&base);
    for (double t : {0.1, 2.0, 50.0}) {
      Eigen::Index other = 0;
      forward_batch(model, x, Mode::infer, nullptr, t).probabilities.col(0).maxCoeff(&other);
      EXPECT_EQ(base, other);
    }
  }
}

TEST(Forward, InvertedDropoutMatchesExpectation) {
  // One identity layer 4 -> 2 with dropout on its output; infer mode equals the
  // mean of train-mode logits.
  const std::vector<LayerSpec> specs{{4, 2, Activation::identity, 0.25}};
  const auto model = init_model(specs, 1.0, 9);
  const Vector x = Vector::LinSpaced(4, 0.5, 2.0);
  const Vector expected = forward_batch(model, x, Mode::infer).logits.col(0);
  Rng rng(10);
  const int draws = 10000;
  Vector sum = Vector::Zero(2), sq = Vector::Zero(2);
  for (int i = 0; i < draws; ++i) {
    const Vector l = forward_batch(model, x, Mode::train, &rng).logits.col(0);
    sum += l;
    sq += l.cwiseProduct(l);
  }
  const Vector mean = sum / draws;
  for (Eigen::Index i = 0; i < 2; ++i) {
    const double se = std::sqrt((sq[i] / draws - mean[i] * mean[i]) / draws);
    EXPECT_LE(std::abs(mean[i] - expected[i]), 3.0 * se);
  }
}

TEST(Gradients, InputGradientMatchesFiniteDifferences) {
  Rng rng(11);
  for (int net = 0; net < 20; ++net) {
    const auto model = small_net(100 + static_cast<std::uint64_t>(net));
    for (int s = 0; s < 5; ++s) {
      const Vector x = test::random_vector(5, rng);
      const int label = s % 2;
      const Vector g = input_gradient(model, x, label);
      for (Eigen::Index i = 0; i < 5; ++i) {
        Vector hi = x, lo = x;
        hi[i] += 1e-4;
        lo[i] -= 1e-4;
        const double fd = (loss(model, hi, label) - loss(model, lo, label)) / 2e-4;
        EXPECT_LE(rel_error(g[i], fd), 1e-4) << "net " << net << " input " << i;
      }
    }
  }
}

TEST(Gradients, WeightGradientsMatchFiniteDifferences) {
  auto model = small_net(12);
  Rng rng(13);
  const Matrix x = Matrix::Random(5, 3);
  const std::vector<int> labels{0, 1, 1};
  const Matrix t = one_hot(labels, 2);
  const auto g = backward(model, forward_batch(model, x, Mode::infer), t);
  auto batch_loss = [&](const MlpModel& m) { return cross_entropy(forward_batch(m, x, Mode::infer), t); };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (Eigen::Index r = 0; r < model.layers[l].weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < model.layers[l].weights.cols(); ++c) {
        auto hi = model, lo = model;
        hi.layers[l].weights(r, c) += 1e-5;
        lo.layers[l].weights(r, c) -= 1e-5;
        const double fd = (batch_loss(hi) - batch_loss(lo)) / 2e-5;
        if (std::abs(fd) > 1e-7) { EXPECT_LE(rel_error(g.weights[l](r, c), fd), 1e-4); }
      }
      auto hi = model, lo = model;
      hi.layers[l].bias[r] += 1e-5;
      lo.layers[l].bias[r] -= 1e-5;
      const double fd = (batch_loss(hi) - batch_loss(lo)) / 2e-5;
      if (std::abs(fd) > 1e-7) { EXPECT_LE(rel_error(g.biases[l][r], fd), 1e-4); }
    }
  }
}

TEST(Gradients, BinaryLabelsAreOpposite) {
  const auto model = small_net(14);
  Rng rng(15);
  for (int i = 0; i < 20; ++i) {
    const Vector x = test::random_vector(5, rng);
    const Vector p = forward(model, x, Mode::infer).probabilities;
    // p0 * grad(loss | 0) + p1 * grad(loss | 1) = 0 for two classes
    EXPECT_LE((p[0] * input_gradient(model, x, 0) + p[1] * input_gradient(model, x, 1)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gradients, DirectionProbeIsPositivelyParallel) {
  const auto model = small_net(16);
  Rng rng(17);
  const Matrix x = Matrix::Random(5, 10) * 3.0;
  const auto exact = probe_batch(model, x, kFalse);
  const auto dir = probe_batch(model, x, kFalse, 1.0, true);
  EXPECT_EQ(exact.predicted, dir.predicted);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Vector a = exact.gradients.col(c), b = dir.gradients.col(c);
    if (a.norm() < 1e-12) continue;
    EXPECT_NEAR(a.dot(b) / (a.norm() * b.norm()), 1.0, 1e-9);
  }
}

TEST(Gradients, ScalerIsPartOfTheChainRule) {
  auto model = small_net(18);
  model.scaler.shift = Vector::LinSpaced(5, -1.0, 1.0);
  model.scaler.scale = Vector::LinSpaced(5, 0.5, 3.0);
  const Vector x = Vector::LinSpaced(5, 0.2, 0.9);
  const Vector g = input_gradient(model, x, kFalse);
  for (Eigen::Index i = 0; i < 5; ++i) {
    Vector hi = x, lo = x;
    hi[i] += 1e-4;
    lo[i] -= 1e-4;
    EXPECT_LE(rel_error(g[i], (loss(model, hi, kFalse) - loss(model, lo, kFalse)) / 2e-4), 1e-4);
  }
}

TEST(Train, SeparablePoints) {
  auto [x, y] = test::blobs(200, 2, 2.0, 19);
  const std::vector<LayerSpec> specs{{2, 8, Activation::relu, 0.0}, {8, 2, Activation::identity, 0.0}};
  auto model = init_model(specs, 1.0, 20);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 16;
  cfg.epochs = 200;
  cfg.rng_seed = 21;
  const auto log = train(model, x, y, cfg);
  EXPECT_EQ(log.epochs.size(), 200u);
  EXPECT_GE(evaluate(model, x, y).accuracy, 0.99);
}

TEST(Train, ZeroLearningRateLeavesWeights) {
  auto [x, y] = test::blobs(40, 3, 1.0, 22);
  auto model = init_model(detector_layers(3), 1.0, 23);
  const auto before = model;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  train(model, x, y, cfg);
  for (std::size_t l = 0; l < model.layers.size(); ++l) EXPECT_EQ(model.layers[l].weights, before.layers[l].weights);
}

TEST(Train, Deterministic) {
  auto [x, y] = test::blobs(100, 3, 1.0, 24);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.rng_seed = 25;
  auto a = init_model(detector_layers(3), 1.0, 26);
  auto b = a;
  train(a, x, y, cfg);
  train(b, x, y, cfg);
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].weights, b.layers[l].weights);
}

TEST(Train, RejectsBadData) {
  auto model = init_model(detector_layers(3), 1.0, 27);
  TrainConfig cfg;
  EXPECT_THROW(train(model, Matrix(3, 0), std::vector<int>{}, cfg), UsageError);
  EXPECT_THROW(train(model, Matrix::Zero(3, 2), std::vector<int>{0, 2}, cfg), DataError);
}

TEST(Train, AugmenterCanAppendSamples) {
  auto [x, y] = test::blobs(20, 2, 1.0, 28);
  auto model = init_model(std::vector<LayerSpec>{{2, 2, Activation::identity, 0.0}}, 1.0, 29);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 10;
  const auto log = train(model, x, y, cfg, [](Batch& b, const MlpModel&, Rng&) {
    b.inputs.conservativeResize(Eigen::NoChange, b.inputs.cols() + 1);
    b.inputs.col(b.inputs.cols() - 1).setZero();
    b.targets.conservativeResize(Eigen::NoChange, b.targets.cols() + 1);
    b.targets.col(b.targets.cols() - 1) = Vector::Unit(2, kFalse);
  });
  EXPECT_EQ(log.epochs.front().samples, 22u);
}

TEST(Evaluate, Metrics) {
  const std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto perfect = evaluate_predictions(labels, labels);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  const std::vector<int> normal(10, kNormal);
  const auto constant = evaluate_predictions(normal, labels);
  EXPECT_EQ(constant.accuracy, 0.5);
  EXPECT_EQ(constant.recall, 0.0);
  std::size_t sum = 0;
  for (const auto& row : constant.confusion)
    for (auto v : row) sum += v;
  EXPECT_EQ(sum, 10u);
  EXPECT_THROW(evaluate_predictions(std::vector<int>{}, std::vector<int>{}), UsageError);
}

TEST(Serialization, RoundTripIsExact) {
  auto model = small_net(30);
  model.temperature = 7.5;
  model.scaler.shift = Vector::LinSpaced(5, -0.3, 0.3);
  model.scaler.scale = Vector::Constant(5, 1.0 / 3.0);
  const auto back = load_model(save_model(model));
  EXPECT_EQ(back.temperature, 7.5);
  EXPECT_EQ(back.scaler.shift, model.scaler.shift);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    EXPECT_EQ(back.layers[l].weights, model.layers[l].weights);
    EXPECT_EQ(back.layers[l].bias, model.layers[l].bias);
    EXPECT_EQ(back.layers[l].spec, model.layers[l].spec);
  }
  const Vector x = Vector::LinSpaced(5, 0.0, 1.0);
  EXPECT_EQ(forward(back, x, Mode::infer).probabilities, forward(model, x, Mode::infer).probabilities);
}

TEST(Serialization, CorruptAndNewerPayloads) {
  const auto text = save_model(small_net(31));
  EXPECT_THROW(load_model(text.substr(0, text.size() / 2)), DataError);
  auto doc = nlohmann::json::parse(text);
  doc["version"] = kModelFormatVersion + 1;
  EXPECT_THROW(model_from_json(doc), VersionError);
  doc = nlohmann::json::parse(text);
  doc["layers"][0]["weights"].erase(0);
  EXPECT_THROW(model_from_json(doc), DataError);
}

}  // namespace
