#pragma once

// Synthetic descriptor tracks with a frame-dependent distortion and known ground truth.

#include <cstdint>
#include <span>
#include <vector>

#include "deschash/descriptor_data.hpp"

namespace deschash {

struct SynthConfig {
  Index dim = 32;
  Index n_tracks = 200;
  Index frames_per_track = 60;
  double base_spread = 1.0;  ///< std-dev of the per-track base descriptor
  double drift_rate = 0.05;  ///< growth per frame of the deviation from identity
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  DescriptorSet descriptors;
  TrackSet tracks;
};

/// Track k observed at frame f is
///   (I + drift_rate f M) base_k + drift_rate f base_spread b + noise_sigma e,
/// with one seeded distortion (M, b) shared by every track, base_k ~ N(0, base_spread^2 I)
/// and e ~ N(0, I). Descriptor index k * frames_per_track + f.
SynthDataset generate(const SynthConfig& cfg);

struct SweepEntry {
  double drift_rate = 0.0;
  SynthDataset data;
};

/// One dataset per drift value. All share the seed, so bases, distortion and noise
/// are common and only the drift magnitude varies.
std::vector<SweepEntry> difficulty_sweep(const SynthConfig& cfg, std::span<const double> drifts);

/// Mean Euclidean distance over all within-track descriptor pairs.
double mean_within_track_distance(const SynthDataset& data);

}  // namespace deschash
