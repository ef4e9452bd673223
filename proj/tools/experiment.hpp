#pragma once

// Train/test comparison driver behind `deschash compare`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deschash/descriptor_data.hpp"
#include "deschash/eval.hpp"
#include "deschash/hash_model.hpp"
#include "deschash/nnhash.hpp"
#include "deschash/synthgen.hpp"

namespace deschash::tools {

struct DtWindow {
  std::int64_t min = 0;
  std::int64_t max = 0;
};

struct ExperimentManifest {
  // Either files or an in-memory synthetic dataset.
  std::filesystem::path descriptors;
  std::filesystem::path tracks;
  std::optional<SynthConfig> synthetic;
  bool synthetic_seed_from_root = true;  ///< generate with `seed` instead of synthetic->seed

  double test_fraction = 0.5;  ///< share of tracks held out for testing
  DtWindow train_dt{1, 60};
  DtWindow test_dt{10, 30};
  std::size_t train_positives = 1000;
  std::size_t train_negatives = 10000;
  std::size_t test_positives = 1000;
  std::size_t test_negatives = 10000;

  std::vector<Method> methods{Method::diffhash, Method::ssh, Method::nnhash};
  std::vector<Index> code_lengths{32, 64};
  double alpha = 1.0;
  double margin = 5.0;
  int epochs = 50;
  std::map<Index, BetaSchedule> beta_schedules{{32, BetaSchedule::parse("0:1")},
                                               {64, BetaSchedule::parse("0:1,50:3")}};
  int ssh_candidates = 100;

  std::filesystem::path out;  ///< empty: nothing is written
  std::uint64_t seed = 1;

  /// Throws on an inconsistent manifest.
  void validate() const;
  BetaSchedule beta_for(Index bits) const;

  /// Relative paths resolve against the manifest's directory.
  static ExperimentManifest load(const std::filesystem::path& path);
};

struct TrueCostRow {
  std::string method;
  Index code_length = 0;
  double cost = 0.0;  ///< distance variant, alpha = 1, on the training pairs
};

struct ExperimentData {
  DescriptorSet descriptors;  ///< normalized with the training-split fit
  TrackSet train_tracks;
  TrackSet test_tracks;
  PairSet train_pairs;
  PairSet test_pairs;
};

struct CompareResult {
  std::vector<EvalReport> reports;  ///< manifest order: methods outer, code lengths inner
  std::vector<TrueCostRow> true_costs;
  EvalReport baseline;  ///< Euclidean distance on the normalized descriptors
  std::map<std::string, TrainingLog> logs;  ///< keyed "nnhash_<bits>"
  std::map<std::string, HashModel> models;  ///< keyed "<method>_<bits>"
};

/// Loads or generates the descriptors, splits tracks, normalizes, and builds pair sets.
/// Throws if train and test pairs intersect.
ExperimentData prepare_experiment(const ExperimentManifest& manifest);

/// Trains a single model with the manifest's settings for that method.
HashModel train_method(Method method, Index bits, const ExperimentData& data,
                       const ExperimentManifest& manifest, TrainingLog* log = nullptr);

/// Runs every method at every code length and, when `out` is set, writes
/// comparison.csv, baseline.csv, true_costs.csv, roc_<method>_<bits>.csv,
/// model_<method>_<bits>.json and nnhash_<bits>_log.csv.
CompareResult run_compare(const ExperimentManifest& manifest);

std::string true_cost_csv(const std::vector<TrueCostRow>& rows);

}  // namespace deschash::tools
