#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "deschash/covstats.hpp"
#include "deschash/error.hpp"
#include "deschash/eval.hpp"
#include "deschash/linear_hashers.hpp"
#include "deschash/synthgen.hpp"
#include "test_util.hpp"

namespace deschash {
namespace {

int sign_bit(double v) { return v >= 0.0 ? 1 : -1; }

struct Counts {
  std::int64_t fn = 0;
  std::int64_t fp = 0;
};

// Pair-by-pair classification at one offset.
Counts classify(std::span<const ProjectedPair> pos, std::span<const ProjectedPair> neg, double offset) {
  Counts c;
  for (const auto& p : pos) c.fn += sign_bit(p.a + offset) != sign_bit(p.b + offset);
  for (const auto& p : neg) c.fp += sign_bit(p.a + offset) == sign_bit(p.b + offset);
  return c;
}

// Every midpoint between sorted distinct values plus one sentinel past each end.
std::vector<double> midpoint_taus(std::span<const ProjectedPair> pos, std::span<const ProjectedPair> neg) {
  std::set<double> distinct;
  for (const auto& p : pos) distinct.insert({p.a, p.b});
  for (const auto& p : neg) distinct.insert({p.a, p.b});
  std::vector<double> v(distinct.begin(), distinct.end());
  std::vector<double> taus{v.front() - 1.0, v.back() + 1.0};
  for (std::size_t k = 1; k < v.size(); ++k) taus.push_back(0.5 * (v[k - 1] + v[k]));
  return taus;
}

std::int64_t score(const Counts& c, std::size_t n_pos, std::size_t n_neg) {
  return c.fn * static_cast<std::int64_t>(n_neg) + c.fp * static_cast<std::int64_t>(n_pos);
}

std::vector<ProjectedPair> random_projected(std::size_t n, std::mt19937_64& rng, int grid) {
  // values on a coarse grid so ties and repeated values occur
  std::uniform_int_distribution<int> pick(-grid, grid);
  std::vector<ProjectedPair> out(n);
  for (auto& p : out) p = {0.25 * pick(rng), 0.25 * pick(rng)};
  return out;
}

TEST(Encode, SignOfAffineMapWithZeroAsPlus) {
  HashModel model;
  model.projection = Matrix::Identity(2, 2);
  model.offset = Vector::Zero(2);
  EXPECT_EQ(encode(model, Vector{{0.5, -0.5}}), (SignVector{1, -1}));
  EXPECT_EQ(encode(model, Vector{{0.0, -0.0}}), (SignVector{1, 1}));

  HashModel single;
  single.projection = Matrix{{1.0, 1.0}};
  single.offset = Vector{{-1.0}};
  EXPECT_EQ(encode(single, Vector{{0.4, 0.4}}), (SignVector{-1}));
  EXPECT_THROW(encode(single, Vector{{0.4, 0.4, 0.1}}), Error);
}

TEST(Encode, InvariantToPositiveRowScaling) {
  std::mt19937_64 rng(3);
  HashModel model;
  model.projection = testing::gaussian(6, 4, rng);
  model.offset = testing::gaussian(6, 1, rng);
  HashModel scaled = model;
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (Index r = 0; r < 6; ++r) {
    const double s = c(rng);
    scaled.projection.row(r) *= s;
    scaled.offset(r) *= s;
  }
  for (int k = 0; k < 200; ++k) {
    const Vector x = testing::gaussian(4, 1, rng);
    EXPECT_EQ(encode(model, x), encode(scaled, x));
  }
}

TEST(SelectThreshold, SeparatedToyPicksSmallestMagnitude) {
  const std::vector<ProjectedPair> pos{{-2, -2}, {2, 2}};
  const std::vector<ProjectedPair> neg{{-2, 2}};
  const auto choice = select_threshold(pos, neg);
  EXPECT_EQ(choice.error, 0.0);
  EXPECT_EQ(choice.offset, 0.0);
}

TEST(SelectThreshold, IdenticalValuesGiveUnitError) {
  const std::vector<ProjectedPair> pos{{1, 1}, {1, 1}};
  const std::vector<ProjectedPair> neg{{1, 1}, {1, 1}, {1, 1}};
  EXPECT_EQ(select_threshold(pos, neg).error, 1.0);
  EXPECT_THROW(select_threshold(pos, {}), Error);
}

TEST(SelectThreshold, MatchesExhaustiveMidpointScan) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> size(1, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pos = random_projected(size(rng), rng, 8);
    const auto neg = random_projected(size(rng), rng, 8);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (double tau : midpoint_taus(pos, neg)) best = std::min(best, score(classify(pos, neg, -tau), pos.size(), neg.size()));

    const auto choice = select_threshold(pos, neg);
    const Counts at = classify(pos, neg, choice.offset);
    EXPECT_EQ(score(at, pos.size(), neg.size()), best) << "trial " << trial;
    EXPECT_EQ(choice.error, static_cast<double>(at.fn) / static_cast<double>(pos.size()) +
                                static_cast<double>(at.fp) / static_cast<double>(neg.size()));
    // no equally good candidate closer to zero
    for (double tau : midpoint_taus(pos, neg)) {
      if (score(classify(pos, neg, -tau), pos.size(), neg.size()) == best) {
        EXPECT_LE(std::abs(choice.offset), std::abs(tau));
      }
    }
  }
}

TEST(SelectThreshold, FixedOffsetsCountSplitPairsAsDisagreeing) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pos = random_projected(12, rng, 6);
    const auto neg = random_projected(20, rng, 6);
    const std::vector<double> fixed{0.125 * static_cast<double>(trial % 5) - 0.25};
    // two-bit rule: the pair agrees only if both thresholds put it on one side
    auto two_bit = [&](double offset) {
      Counts c;
      auto agree = [&](const ProjectedPair& p) {
        return sign_bit(p.a + offset) == sign_bit(p.b + offset) &&
               sign_bit(p.a + fixed[0]) == sign_bit(p.b + fixed[0]);
      };
      for (const auto& p : pos) c.fn += !agree(p);
      for (const auto& p : neg) c.fp += agree(p);
      return c;
    };
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (double tau : midpoint_taus(pos, neg)) best = std::min(best, score(two_bit(-tau), pos.size(), neg.size()));
    const auto choice = select_threshold(pos, neg, fixed);
    EXPECT_EQ(score(two_bit(choice.offset), pos.size(), neg.size()), best);
  }
}

DescriptorSet toy_set() {
  Matrix m(4, 2);
  m << 0, 0, 2, 0, 0, std::sqrt(2.0), 0, 0;
  return DescriptorSet(m);
}

PairSet toy_pairs() {
  PairSet pairs;
  pairs.positives = {{0, 3, 1}};
  pairs.negatives = {{0, 1}, {0, 2}};
  return pairs;
}

TEST(DiffHash, ToyPicksLargestNegativeVarianceDirection) {
  const auto set = toy_set();
  const auto pairs = toy_pairs();
  const auto cov = DiffCovariance::compute(set, pairs);
  EXPECT_LE((cov.c_minus - Matrix(Vector{{2.0, 1.0}}.asDiagonal())).norm(), 1e-15);
  EXPECT_TRUE(cov.c_plus.isZero(0.0));

  TrainConfig cfg;
  cfg.code_length = 1;
  const auto model = train_diffhash(set, pairs, cfg);
  EXPECT_EQ(model.method, Method::diffhash);
  EXPECT_NEAR(std::abs(model.projection(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(model.projection(0, 1), 0.0, 1e-12);

  cfg.alpha = 1e6;
  const auto heavy = train_diffhash(set, pairs, cfg);
  const Matrix a = cfg.alpha * cov.c_plus - cov.c_minus;
  const Vector v = heavy.projection.row(0).transpose();
  const double lambda = v.dot(a * v);
  EXPECT_LE((a * v - lambda * v).norm(), 1e-8 * a.norm());
}

TEST(LdaHash, ToyPicksSmallestRatioDirection) {
  // C+ = diag(0.1, 1), C- = I
  Matrix m(6, 2);
  const double s = std::sqrt(0.2);
  const double r = std::sqrt(2.0);
  m << 0, 0, s, 0, 0, 0, 0, r, 0, 0, 0, 0;
  const DescriptorSet set(m);
  PairSet pairs;
  pairs.positives = {{0, 1, 1}, {2, 3, 1}};
  // negatives with differences (sqrt2, 0) and (0, sqrt2)
  Matrix n(4, 2);
  n << 0, 0, r, 0, 0, 0, 0, r;
  Matrix all(10, 2);
  all << m, n;
  pairs.negatives = {{6, 7}, {8, 9}};
  const DescriptorSet full(all);
  const auto cov = DiffCovariance::compute(full, pairs);
  EXPECT_LE((cov.c_plus - Matrix(Vector{{0.1, 1.0}}.asDiagonal())).norm(), 1e-15);
  EXPECT_LE((cov.c_minus - Matrix::Identity(2, 2)).norm(), 1e-15);

  TrainConfig cfg;
  cfg.code_length = 1;
  const auto model = train_ldahash(full, pairs, cfg);
  EXPECT_EQ(model.method, Method::ldahash);
  EXPECT_NEAR(model.projection(0, 1), 0.0, 1e-9);
  EXPECT_GT(std::abs(model.projection(0, 0)), 0.9);
}

TEST(LinearHashers, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.alpha = 1.0;
  cfg.code_length = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.code_length = 2;
  cfg.candidates_per_round = 0;
  EXPECT_THROW(cfg.validate(), Error);
  PairSet no_neg = toy_pairs();
  no_neg.negatives.clear();
  cfg.candidates_per_round = 5;
  EXPECT_THROW(train_diffhash(toy_set(), no_neg, cfg), Error);
}

struct Prepared {
  DescriptorSet set;
  PairSet train;
  PairSet test;
};

Prepared separable(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.dim = 8;
  cfg.n_tracks = 60;
  cfg.frames_per_track = 12;
  cfg.drift_rate = 0.01;
  cfg.noise_sigma = 0.05;
  cfg.seed = seed;
  const auto data = generate(cfg);
  Prepared p;
  p.set = apply_normalization(data.descriptors, fit_normalization(data.descriptors));
  std::vector<std::size_t> first(30), second(30);
  std::iota(first.begin(), first.end(), std::size_t{0});
  std::iota(second.begin(), second.end(), std::size_t{30});
  const auto train_tracks = data.tracks.subset(first);
  const auto test_tracks = data.tracks.subset(second);
  p.train.positives = build_positive_pairs(train_tracks, 1, 11, 300, seed + 1);
  p.train.negatives = sample_negative_pairs(train_tracks, 1000, seed + 2);
  p.test.positives = build_positive_pairs(test_tracks, 1, 11, 300, seed + 3);
  p.test.negatives = sample_negative_pairs(test_tracks, 1000, seed + 4);
  return p;
}

TEST(LinearHashers, SeparableSetReachesLowEer) {
  const auto data = separable(5);
  TrainConfig cfg;
  cfg.code_length = 8;
  cfg.seed = 9;
  EXPECT_LT(evaluate_model(train_diffhash(data.set, data.train, cfg), data.set, data.test).eer, 0.05);
  EXPECT_LT(evaluate_model(train_ldahash(data.set, data.train, cfg), data.set, data.test).eer, 0.05);
}

TEST(LinearHashers, CodesLongerThanDimensionCycleDirections) {
  const auto data = separable(6);
  TrainConfig cfg;
  cfg.code_length = 20;
  for (const auto& model : {train_diffhash(data.set, data.train, cfg), train_ldahash(data.set, data.train, cfg)}) {
    ASSERT_EQ(model.code_length(), 20);
    for (Index r = 8; r < 20; ++r) {
      EXPECT_EQ(model.projection.row(r), model.projection.row(r % 8));
    }
    model.validate();
  }
}

TEST(LinearHashers, TrainingIsDeterministic) {
  const auto data = separable(7);
  TrainConfig cfg;
  cfg.code_length = 6;
  cfg.seed = 4;
  cfg.candidates_per_round = 20;
  EXPECT_EQ(model_to_json(train_diffhash(data.set, data.train, cfg)),
            model_to_json(train_diffhash(data.set, data.train, cfg)));
  EXPECT_EQ(model_to_json(train_ldahash(data.set, data.train, cfg)),
            model_to_json(train_ldahash(data.set, data.train, cfg)));
  EXPECT_EQ(model_to_json(train_ssh(data.set, data.train, cfg).model),
            model_to_json(train_ssh(data.set, data.train, cfg).model));
}

// Weighted error with the same weight layout: positives first, then negatives.
double naive_weighted_error(const DescriptorSet& set, const PairSet& pairs, std::span<const double> w,
                            const Vector& dir, double offset) {
  auto bit = [&](std::size_t i) { return sign_bit(set.row(static_cast<Index>(i)).dot(dir) + offset); };
  double err = 0.0;
  std::size_t k = 0;
  for (const auto& p : pairs.positives) err += bit(p.i) != bit(p.j) ? w[k++] : (k++, 0.0);
  for (const auto& p : pairs.negatives) err += bit(p.i) == bit(p.j) ? w[k++] : (k++, 0.0);
  return err;
}

TEST(Ssh, InitialWeightsAreClassBalanced) {
  PairSet pairs;
  pairs.positives = {{0, 1, 1}, {2, 3, 1}};
  pairs.negatives = {{0, 2}, {1, 3}, {0, 3}, {1, 2}};
  const auto w = initial_pair_weights(pairs);
  ASSERT_EQ(w.size(), 6u);
  EXPECT_DOUBLE_EQ(w[0], 0.25);
  EXPECT_DOUBLE_EQ(w[5], 0.125);
  EXPECT_DOUBLE_EQ(std::accumulate(w.begin(), w.end(), 0.0), 1.0);
}

TEST(Ssh, SelectionMatchesBruteForceOverCandidates) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const DescriptorSet set(testing::gaussian(20, 2, rng));
    PairSet pairs;
    std::uniform_int_distribution<std::size_t> pick(0, 19);
    while (pairs.positives.size() < 10) {
      const auto i = pick(rng), j = pick(rng);
      if (i != j) pairs.positives.push_back({i, j, 1});
    }
    while (pairs.negatives.size() < 10) {
      const auto i = pick(rng), j = pick(rng);
      if (i != j) pairs.negatives.push_back({i, j});
    }
    std::vector<double> w(20);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (auto& x : w) x = u(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    Matrix candidates = testing::gaussian(2, 7, rng);
    candidates.colwise().normalize();

    double best = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < candidates.cols(); ++c) {
      const Vector dir = candidates.col(c);
      std::set<double> distinct;
      for (Index i = 0; i < set.count(); ++i) distinct.insert(set.row(i).dot(dir));
      std::vector<double> v(distinct.begin(), distinct.end());
      std::vector<double> taus{v.front() - 1.0, v.back() + 1.0};
      for (std::size_t k = 1; k < v.size(); ++k) taus.push_back(0.5 * (v[k - 1] + v[k]));
      for (double tau : taus) best = std::min(best, naive_weighted_error(set, pairs, w, dir, -tau));
    }
    const auto weak = select_weak_classifier(set, pairs, w, candidates);
    EXPECT_NEAR(weak.weighted_error, best, 1e-12);
    EXPECT_NEAR(naive_weighted_error(set, pairs, w, weak.direction, weak.offset), best, 1e-12);
    EXPECT_NEAR(weighted_pair_error(set, pairs, w, weak.direction, weak.offset), best, 1e-12);
  }
}

TEST(Ssh, SeparableInstanceNeedsOneRound) {
  // positives are identical points, negatives are mirrored through the origin
  Matrix m(8, 2);
  m << 1, 0.5, 1, 0.5, -2, 1, -2, 1, 1.5, 2, -1.5, -2, 3, -1, -3, 1;
  const DescriptorSet set(m);
  PairSet pairs;
  pairs.positives = {{0, 1, 1}, {2, 3, 1}};
  pairs.negatives = {{4, 5}, {6, 7}};
  TrainConfig cfg;
  cfg.code_length = 1;
  cfg.candidates_per_round = 5;
  cfg.seed = 2;
  const auto result = train_ssh(set, pairs, cfg);
  ASSERT_EQ(result.round_errors.size(), 1u);
  EXPECT_EQ(result.round_errors[0], 0.0);
  EXPECT_FALSE(result.truncated);
  EXPECT_EQ(true_cost(result.model, pairs, set, 1.0, CostVariant::distance), -4.0);
}

TEST(Ssh, AcceptedRoundsStayBelowHalfAndWeightsStayNormalized) {
  const auto data = separable(8);
  TrainConfig cfg;
  cfg.code_length = 16;
  cfg.candidates_per_round = 30;
  cfg.seed = 3;
  const auto result = train_ssh(data.set, data.train, cfg);
  ASSERT_FALSE(result.round_errors.empty());
  EXPECT_EQ(static_cast<Index>(result.round_errors.size()), result.model.code_length());
  for (double e : result.round_errors) EXPECT_LT(e, 0.5);

  auto w = initial_pair_weights(data.train);
  Matrix candidates = testing::gaussian(8, 10, *std::make_unique<std::mt19937_64>(1));
  candidates.colwise().normalize();
  const auto weak = select_weak_classifier(data.set, data.train, w, candidates);
  reweight_pairs(data.set, data.train, w, weak);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
}

TEST(Ssh, HopelessFirstRoundIsAnError) {
  // every pair joins the same two points, labelled both ways
  Matrix m(2, 2);
  m << 0, 0, 1, 1;
  const DescriptorSet set(m);
  PairSet pairs;
  pairs.positives = {{0, 1, 1}};
  pairs.negatives = {{0, 1}};
  TrainConfig cfg;
  cfg.code_length = 3;
  cfg.candidates_per_round = 4;
  // no accepted round leaves no code at all
  EXPECT_THROW(train_ssh(set, pairs, cfg), Error);
}

TEST(TrueCost, ConstantCodeAndPerfectCode) {
  const auto set = toy_set();
  const auto pairs = toy_pairs();
  HashModel constant;
  constant.projection = Matrix::Zero(5, 2);
  constant.offset = Vector::Ones(5);
  EXPECT_DOUBLE_EQ(true_cost(constant, pairs, set, 2.0, CostVariant::correlation), 5.0 - 2.0 * 5.0);
  EXPECT_DOUBLE_EQ(true_cost(constant, pairs, set, 2.0, CostVariant::distance), 0.0);

  // positives share a code, negatives antipodal: descriptors 0 and 3 coincide
  Matrix m(4, 1);
  m << 1, -1, -1, 1;
  const DescriptorSet line(m);
  HashModel perfect;
  perfect.projection = Matrix::Ones(4, 1);
  perfect.offset = Vector::Zero(4);
  EXPECT_DOUBLE_EQ(true_cost(perfect, pairs, line, 1.0, CostVariant::distance), -4.0 * 4);
  EXPECT_THROW(true_cost(perfect, PairSet{}, line, 1.0, CostVariant::distance), Error);
}

TEST(TrueCost, MatchesNaiveLoopAndIgnoresRowOrder) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const DescriptorSet set(testing::gaussian(30, 5, rng));
    PairSet pairs;
    std::uniform_int_distribution<std::size_t> pick(0, 29);
    for (int k = 0; k < 15; ++k) pairs.positives.push_back({pick(rng), pick(rng), 1});
    for (int k = 0; k < 25; ++k) pairs.negatives.push_back({pick(rng), pick(rng)});
    HashModel model;
    model.projection = testing::gaussian(7, 5, rng);
    model.offset = testing::gaussian(7, 1, rng);
    const double alpha = 0.7;

    auto code = [&](std::size_t i) {
      const SignVector s = encode(model, set.row(static_cast<Index>(i)).transpose());
      Vector y(7);
      for (Index b = 0; b < 7; ++b) y(b) = s[static_cast<std::size_t>(b)];
      return y;
    };
    double pc = 0, nc = 0, pd = 0, nd = 0;
    for (const auto& p : pairs.positives) {
      pc += code(p.i).dot(code(p.j));
      pd += (code(p.i) - code(p.j)).squaredNorm();
    }
    for (const auto& p : pairs.negatives) {
      nc += code(p.i).dot(code(p.j));
      nd += (code(p.i) - code(p.j)).squaredNorm();
    }
    const double lc = nc / 25 - alpha * pc / 15;
    const double ld = alpha * pd / 15 - nd / 25;
    EXPECT_NEAR(true_cost(model, pairs, set, alpha, CostVariant::correlation), lc, 1e-12);
    EXPECT_NEAR(true_cost(model, pairs, set, alpha, CostVariant::distance), ld, 1e-12);

    HashModel permuted = model;
    std::vector<Index> order(7);
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Index r = 0; r < 7; ++r) {
      permuted.projection.row(r) = model.projection.row(order[static_cast<std::size_t>(r)]);
      permuted.offset(r) = model.offset(order[static_cast<std::size_t>(r)]);
    }
    EXPECT_NEAR(true_cost(permuted, pairs, set, 1.0, CostVariant::distance),
                true_cost(model, pairs, set, 1.0, CostVariant::distance), 1e-12);
  }
}

TEST(HashModel, JsonRoundTripIsBitExact) {
  std::mt19937_64 rng(43);
  HashModel model;
  model.method = Method::nnhash;
  model.projection = testing::gaussian(3, 4, rng);
  model.offset = testing::gaussian(3, 1, rng);
  model.beta = 2.5;
  model.norm = Normalization{testing::gaussian(4, 1, rng), testing::gaussian(4, 1, rng)};
  const auto back = model_from_json(model_to_json(model));
  EXPECT_EQ(back.method, model.method);
  EXPECT_EQ(back.projection, model.projection);
  EXPECT_EQ(back.offset, model.offset);
  EXPECT_EQ(back.beta, model.beta);
  EXPECT_EQ(back.norm, model.norm);

  model.beta.reset();
  model.norm.reset();
  const std::string text = model_to_json(model);
  EXPECT_NE(text.find("\"hard\""), std::string::npos);
  const auto hard = model_from_json(text);
  EXPECT_FALSE(hard.beta.has_value());
  EXPECT_FALSE(hard.norm.has_value());
  EXPECT_EQ(model_to_json(hard), text);
}

TEST(HashModel, RejectsMalformedJson) {
  EXPECT_THROW(model_from_json("{"), Error);
  EXPECT_THROW(model_from_json(R"({"method":"bogus","dim":1,"code_length":1,"beta":"hard",
      "projection":[1],"offset":[0],"norm_params":null})"),
               Error);
  EXPECT_THROW(model_from_json(R"({"method":"ssh","dim":2,"code_length":1,"beta":"hard",
      "projection":[1],"offset":[0],"norm_params":null})"),
               Error);
  EXPECT_THROW(model_from_json(R"({"method":"ssh","dim":1,"code_length":1,"beta":-1,
      "projection":[1],"offset":[0],"norm_params":null})"),
               Error);
  EXPECT_THROW(parse_method("lsh"), Error);
}

}  // namespace
}  // namespace deschash
