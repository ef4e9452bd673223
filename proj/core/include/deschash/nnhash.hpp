#pragma once

// Siamese single-layer hashing network: tanh(beta (P x + t)) trained under a margin
// contrastive loss, binarized by hard sign at inference.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deschash/descriptor_data.hpp"
#include "deschash/hash_model.hpp"

namespace deschash {

struct BetaPoint {
  int epoch = 0;
  double beta = 1.0;

  bool operator==(const BetaPoint&) const = default;
};

/// Steepness per epoch: linear between points, held constant after the last one.
class BetaSchedule {
 public:
  BetaSchedule() : points_{{0, 1.0}} {}
  explicit BetaSchedule(std::vector<BetaPoint> points);

  /// "e0:b0,e1:b1,..."
  static BetaSchedule parse(std::string_view text);
  static BetaSchedule constant(double beta) { return BetaSchedule({{0, beta}}); }

  double at(int epoch) const;
  const std::vector<BetaPoint>& points() const { return points_; }
  std::string to_string() const;

 private:
  std::vector<BetaPoint> points_;
};

enum class PairLabel { positive, negative };

/// How per-pair losses are averaged.
enum class LossWeighting {
  per_class_mean,  ///< mean over positives + mean over negatives
  pooled_mean,     ///< one mean over every pair
};

enum class SiameseInit { diffhash, random };
enum class Optimizer { conjugate_gradient, gradient_descent };

struct SiameseConfig {
  double margin = 5.0;
  BetaSchedule beta_schedule;
  int epochs = 50;
  Index code_length = 32;
  std::uint64_t seed = 0;
  SiameseInit init = SiameseInit::diffhash;
  double alpha = 1.0;  ///< for the diff-hash initialization
  Optimizer optimizer = Optimizer::conjugate_gradient;
  LossWeighting weighting = LossWeighting::per_class_mean;
  double armijo = 1e-4;
  int max_backtracks = 60;

  void validate() const;
};

/// tanh(beta (P x + t)).
Vector forward(const Matrix& projection, const Vector& offset, double beta, const Vector& x);

/// positive: 0.5 |y1 - y2|^2; negative: 0.5 max(0, margin - |y1 - y2|)^2.
double pair_loss(const Vector& y1, const Vector& y2, PairLabel label, double margin);

struct LabeledPair {
  Vector a;
  Vector b;
  PairLabel label = PairLabel::positive;
};

struct Gradient {
  Matrix d_projection;
  Vector d_offset;
  double loss = 0.0;
};

/// Averaged loss over `batch` and its analytic gradient in (P, t).
/// A negative pair with identical outputs takes the zero subgradient.
Gradient batch_gradient(const Matrix& projection, const Vector& offset, double beta,
                        std::span<const LabeledPair> batch, double margin,
                        LossWeighting weighting = LossWeighting::per_class_mean);

/// Loss over pairs indexed into one descriptor set. Descriptors are forwarded once
/// per evaluation and shared by every pair that touches them.
class SiameseObjective {
 public:
  SiameseObjective(const DescriptorSet& set, const PairSet& pairs, double margin,
                   LossWeighting weighting = LossWeighting::per_class_mean);

  double loss(const Matrix& projection, const Vector& offset, double beta) const;
  Gradient gradient(const Matrix& projection, const Vector& offset, double beta) const;

 private:
  double evaluate(const Matrix& projection, const Vector& offset, double beta,
                  Gradient* grad) const;

  Matrix x_;  // dim x used descriptors
  std::vector<std::pair<Index, Index>> positives_;
  std::vector<std::pair<Index, Index>> negatives_;
  double margin_;
  double w_pos_ = 0.0;
  double w_neg_ = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double beta = 0.0;
  double loss_before = 0.0;  ///< at the start of the epoch, under this epoch's beta
  double loss = 0.0;         ///< after the step
  double step = 0.0;         ///< accepted step length, 0 when no step was accepted
  bool accepted = false;
};

struct TrainingLog {
  double initial_beta = 0.0;
  double initial_loss = 0.0;
  std::vector<EpochRecord> epochs;

  /// "epoch,beta,loss"; row 0 is the starting point.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct NnhashResult {
  HashModel model;
  TrainingLog log;
};

/// Full-batch training from the diff-hash solution (or a seeded random start).
/// Every epoch takes one line-searched step satisfying the Armijo condition, so the
/// loss never rises while beta is unchanged. Throws on a non-finite loss, naming the epoch.
NnhashResult train_nnhash(const DescriptorSet& set, const PairSet& pairs,
                          const SiameseConfig& cfg);

}  // namespace deschash
