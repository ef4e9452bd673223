#pragma once

// Descriptor sets, feature tracks and the positive/negative pair sets minted from them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace deschash {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Per-dimension affine map `x -> clamp((x - offset) * scale, -1, 1)`.
/// A zero scale marks a constant dimension, which maps to 0.
struct Normalization {
  Vector offset;
  Vector scale;

  Index dim() const { return offset.size(); }
  bool operator==(const Normalization&) const = default;
};

/// `count x dim` matrix of finite descriptors, one per row.
class DescriptorSet {
 public:
  DescriptorSet() = default;
  explicit DescriptorSet(Matrix data, std::optional<Normalization> norm = std::nullopt);

  Index dim() const { return data_.cols(); }
  Index count() const { return data_.rows(); }

  const Matrix& data() const { return data_; }
  auto row(Index i) const { return data_.row(i); }
  const std::optional<Normalization>& normalization() const { return norm_; }

  /// Rows selected by `indices`, in order. Normalization is carried over.
  DescriptorSet subset(std::span<const std::size_t> indices) const;

 private:
  Matrix data_;
  std::optional<Normalization> norm_;
};

struct TrackEntry {
  std::int64_t frame = 0;
  std::size_t descriptor = 0;

  bool operator==(const TrackEntry&) const = default;
};

using Track = std::vector<TrackEntry>;

/// Feature tracks. Frames strictly increase within a track and no descriptor
/// belongs to two tracks.
class TrackSet {
 public:
  TrackSet() = default;
  explicit TrackSet(std::vector<Track> tracks);

  const std::vector<Track>& tracks() const { return tracks_; }
  std::size_t size() const { return tracks_.size(); }
  const Track& operator[](std::size_t i) const { return tracks_[i]; }

  /// Largest referenced descriptor index + 1.
  std::size_t descriptor_extent() const { return extent_; }

  /// Throws unless every entry indexes into `set`.
  void check_against(std::size_t descriptor_count) const;

  /// track id per descriptor index; -1 for descriptors not on any track.
  std::vector<std::int64_t> track_lookup(std::size_t descriptor_count) const;

  /// Tracks selected by `ids`, in order.
  TrackSet subset(std::span<const std::size_t> ids) const;

 private:
  std::vector<Track> tracks_;
  std::size_t extent_ = 0;
};

struct PositivePair {
  std::size_t i = 0;
  std::size_t j = 0;
  std::int64_t dt = 0;

  bool operator==(const PositivePair&) const = default;
};

struct IndexPair {
  std::size_t i = 0;
  std::size_t j = 0;

  bool operator==(const IndexPair&) const = default;
};

struct PairSet {
  std::vector<PositivePair> positives;
  std::vector<IndexPair> negatives;

  /// Positives stripped of their frame gap.
  std::vector<IndexPair> positive_indices() const;
};

// File formats.
DescriptorSet load_descriptors(const std::filesystem::path& path);
void save_descriptors(const std::filesystem::path& path, const DescriptorSet& set);
TrackSet load_tracks(const std::filesystem::path& path);
void save_tracks(const std::filesystem::path& path, const TrackSet& tracks);
PairSet load_pairs(const std::filesystem::path& path);
void save_pairs(const std::filesystem::path& path, const PairSet& pairs);

Normalization fit_normalization(const DescriptorSet& set);
DescriptorSet apply_normalization(const DescriptorSet& set, const Normalization& params);

/// Positive pairs drawn within tracks with `min_dt <= dt <= max_dt`.
///
/// Candidates are grouped by frame gap and the request is split evenly over every
/// achievable gap, remainder handed out round-robin from the smallest gap. A bucket
/// smaller than its quota is cycled through reshuffled passes, so duplicates appear
/// only once a bucket is exhausted.
std::vector<PositivePair> build_positive_pairs(const TrackSet& tracks, std::int64_t min_dt,
                                               std::int64_t max_dt, std::size_t target_count,
                                               std::uint64_t seed);

/// Distinct cross-track pairs drawn uniformly. Throws if fewer than `target_count` exist.
std::vector<IndexPair> sample_negative_pairs(const TrackSet& tracks, std::size_t target_count,
                                             std::uint64_t seed);

/// Throws unless positives share a track, negatives do not, and no pair is (i, i).
void check_pairs(const PairSet& pairs, const TrackSet& tracks, std::size_t descriptor_count);

}  // namespace deschash
