#include "deschash/synthgen.hpp"

#include <cmath>
#include <string>

#include "deschash/error.hpp"
#include "deschash/seed.hpp"

namespace deschash {

void SynthConfig::validate() const {
  if (dim < 1) throw Error("synthetic dim must be positive");
  if (n_tracks < 2) throw Error("synthetic data needs at least two tracks");
  if (frames_per_track < 1) throw Error("frames_per_track must be positive");
  if (!(base_spread >= 0.0) || !(drift_rate >= 0.0) || !(noise_sigma >= 0.0)) {
    throw Error("synthetic magnitudes must be non-negative");
  }
}

namespace {

Matrix gaussian(Rng& rng, Index rows, Index cols, double sigma) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = sigma * g(rng);
  }
  return m;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.dim;
  const Index frames = cfg.frames_per_track;

  Rng distortion_rng = make_rng(cfg.seed, "synth-distortion");
  const Matrix warp = gaussian(distortion_rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
  const Vector shift = gaussian(distortion_rng, n, 1, 1.0 / std::sqrt(static_cast<double>(n)));

  Matrix data(cfg.n_tracks * frames, n);
  std::vector<Track> tracks(static_cast<std::size_t>(cfg.n_tracks));
  for (Index k = 0; k < cfg.n_tracks; ++k) {
    Rng rng = make_rng(cfg.seed, "synth-track-" + std::to_string(k));
    const Vector base = gaussian(rng, n, 1, cfg.base_spread);
    const Vector warped = warp * base + cfg.base_spread * shift;
    Track& track = tracks[static_cast<std::size_t>(k)];
    track.reserve(static_cast<std::size_t>(frames));
    for (Index f = 0; f < frames; ++f) {
      const Vector noise = gaussian(rng, n, 1, cfg.noise_sigma);
      const Index row = k * frames + f;
      data.row(row) =
          (base + cfg.drift_rate * static_cast<double>(f) * warped + noise).transpose();
      track.push_back({static_cast<std::int64_t>(f), static_cast<std::size_t>(row)});
    }
  }
  return {DescriptorSet(std::move(data)), TrackSet(std::move(tracks))};
}

std::vector<SweepEntry> difficulty_sweep(const SynthConfig& cfg, std::span<const double> drifts) {
  if (drifts.empty()) throw Error("difficulty sweep needs at least one drift value");
  std::vector<SweepEntry> out;
  out.reserve(drifts.size());
  for (double d : drifts) {
    SynthConfig c = cfg;
    c.drift_rate = d;
    out.push_back({d, generate(c)});
  }
  return out;
}

double mean_within_track_distance(const SynthDataset& data) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& track : data.tracks.tracks()) {
    for (std::size_t a = 0; a < track.size(); ++a) {
      for (std::size_t b = a + 1; b < track.size(); ++b) {
        total += (data.descriptors.row(static_cast<Index>(track[a].descriptor)) -
                  data.descriptors.row(static_cast<Index>(track[b].descriptor)))
                     .norm();
        ++count;
      }
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace deschash
