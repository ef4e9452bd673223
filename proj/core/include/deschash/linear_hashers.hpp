#pragma once

// Relaxation-based hash learners: diff-hash, LDAHash and boosted similarity-sensitive hashing.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "deschash/descriptor_data.hpp"
#include "deschash/hash_model.hpp"

namespace deschash {

struct TrainConfig {
  double alpha = 1.0;  ///< FPR/FNR tradeoff
  Index code_length = 32;
  std::uint64_t seed = 0;
  int candidates_per_round = 100;  ///< SSH random directions per boosting round
  std::optional<double> ridge;     ///< LDAHash; default_ridge(C-) when empty

  void validate() const;
};

/// Projected values of the two descriptors of a pair on one hash direction.
struct ProjectedPair {
  double a = 0.0;
  double b = 0.0;
};

struct ThresholdChoice {
  double offset = 0.0;  ///< bit = sign(value + offset)
  double error = 0.0;   ///< FPR + FNR
};

/// Picks the offset minimizing FPR + FNR of the rule "a pair is positive iff both
/// binarized values agree".
///
/// Candidates are the midpoints between sorted distinct projected values plus one
/// sentinel below the minimum and one above the maximum (each 1 away). Ties are broken
/// toward the smallest |offset|.
///
/// `fixed_offsets` are thresholds already placed on the same direction: a pair split by
/// any of them counts as disagreeing whatever the new threshold does. This extends a
/// direction to several bits when the code is longer than the descriptor.
ThresholdChoice select_threshold(std::span<const ProjectedPair> positives,
                                 std::span<const ProjectedPair> negatives,
                                 std::span<const double> fixed_offsets = {});

/// Thresholds for every row of `projection`, fitted on the projected training pairs.
/// Row k treats rows k - period, k - 2*period, ... as the same direction.
Vector fit_offsets(const Matrix& projection, Index period, const DescriptorSet& set,
                   const PairSet& pairs);

HashModel train_diffhash(const DescriptorSet& set, const PairSet& pairs, const TrainConfig& cfg);
HashModel train_ldahash(const DescriptorSet& set, const PairSet& pairs, const TrainConfig& cfg);

// --- boosted SSH ---------------------------------------------------------------

struct WeakClassifier {
  Vector direction;
  double offset = 0.0;
  double weighted_error = 0.0;
  int candidate = -1;  ///< column of the candidate matrix it came from
};

/// Class-balanced start: positives share 1/2 of the mass, negatives the other half.
/// Layout is positives first, then negatives.
std::vector<double> initial_pair_weights(const PairSet& pairs);

/// Best (direction, offset) over the columns of `candidates` (dim x count) under the
/// pair weights. Ties go to the smaller |offset|, then to the lower column.
WeakClassifier select_weak_classifier(const DescriptorSet& set, const PairSet& pairs,
                                      std::span<const double> weights, const Matrix& candidates);

/// Weighted error of one weak classifier, counted pair by pair.
double weighted_pair_error(const DescriptorSet& set, const PairSet& pairs,
                           std::span<const double> weights, const Vector& direction,
                           double offset);

/// AdaBoost update: misclassified pairs scale by exp(a), the rest by exp(-a), with
/// a = 0.5 ln((1 - err) / err); then renormalized to sum 1.
void reweight_pairs(const DescriptorSet& set, const PairSet& pairs, std::span<double> weights,
                    const WeakClassifier& weak);

struct SshResult {
  HashModel model;
  std::vector<double> round_errors;  ///< weighted error of every accepted round
  bool truncated = false;            ///< stopped early on a round with error >= 0.5
};

SshResult train_ssh(const DescriptorSet& set, const PairSet& pairs, const TrainConfig& cfg);

// --- evaluation of the non-relaxed objectives -----------------------------------

enum class CostVariant { correlation, distance };

/// Hard-sign cost, expectations taken as means over each pair class:
///   correlation: E_neg[y.y'] - alpha E_pos[y.y']
///   distance:    alpha E_pos[|y - y'|^2] - E_neg[|y - y'|^2]
double true_cost(const HashModel& model, const PairSet& pairs, const DescriptorSet& set,
                 double alpha, CostVariant variant);

/// Hard-sign codes of every descriptor as a count x code_length matrix of +-1.
Matrix sign_codes(const HashModel& model, const DescriptorSet& set);

}  // namespace deschash
