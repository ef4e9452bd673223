#include "deschash/descriptor_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>

#include "deschash/error.hpp"
#include "deschash/seed.hpp"
#include "text_io.hpp"

namespace deschash {

DescriptorSet::DescriptorSet(Matrix data, std::optional<Normalization> norm)
    : data_(std::move(data)), norm_(std::move(norm)) {
  if (!data_.allFinite()) {
    throw Error("descriptor set contains non-finite values");
  }
  if (norm_ && norm_->dim() != data_.cols()) {
    throw Error("normalization dimension does not match descriptor dimension");
  }
}

DescriptorSet DescriptorSet::subset(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Index>(indices.size()), dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= static_cast<std::size_t>(count())) {
      throw Error("descriptor index " + std::to_string(indices[r]) + " out of range");
    }
    out.row(static_cast<Index>(r)) = data_.row(static_cast<Index>(indices[r]));
  }
  return DescriptorSet(std::move(out), norm_);
}

TrackSet::TrackSet(std::vector<Track> tracks) : tracks_(std::move(tracks)) {
  std::unordered_set<std::size_t> seen;
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    const Track& track = tracks_[t];
    if (track.empty()) {
      throw Error("track " + std::to_string(t) + " is empty");
    }
    for (std::size_t k = 0; k < track.size(); ++k) {
      if (track[k].frame < 0) {
        throw Error("track " + std::to_string(t) + " has a negative frame index");
      }
      if (k > 0 && track[k].frame <= track[k - 1].frame) {
        throw Error("track " + std::to_string(t) + " frames are not strictly increasing");
      }
      if (!seen.insert(track[k].descriptor).second) {
        throw Error("descriptor " + std::to_string(track[k].descriptor) +
                    " appears in more than one track entry");
      }
      extent_ = std::max(extent_, track[k].descriptor + 1);
    }
  }
}

void TrackSet::check_against(std::size_t descriptor_count) const {
  if (extent_ > descriptor_count) {
    throw Error("track references descriptor " + std::to_string(extent_ - 1) +
                " but the set holds " + std::to_string(descriptor_count));
  }
}

std::vector<std::int64_t> TrackSet::track_lookup(std::size_t descriptor_count) const {
  check_against(descriptor_count);
  std::vector<std::int64_t> lookup(descriptor_count, -1);
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    for (const auto& e : tracks_[t]) lookup[e.descriptor] = static_cast<std::int64_t>(t);
  }
  return lookup;
}

TrackSet TrackSet::subset(std::span<const std::size_t> ids) const {
  std::vector<Track> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id >= tracks_.size()) throw Error("track id out of range");
    out.push_back(tracks_[id]);
  }
  return TrackSet(std::move(out));
}

std::vector<IndexPair> PairSet::positive_indices() const {
  std::vector<IndexPair> out;
  out.reserve(positives.size());
  for (const auto& p : positives) out.push_back({p.i, p.j});
  return out;
}

// ---------------------------------------------------------------------------
// File formats

DescriptorSet load_descriptors(const std::filesystem::path& path) {
  detail::LineReader in(path);
  std::vector<std::string_view> fields;
  if (!in.next_nonblank(fields)) {
    throw ParseError(path.string(), 0, "empty descriptor file");
  }
  if (fields.size() != 2) {
    throw ParseError(path.string(), in.line(), "header must be \"<dim> <count>\"");
  }
  const auto dim = detail::parse_integer<std::int64_t>(fields[0], path, in.line());
  const auto count = detail::parse_integer<std::int64_t>(fields[1], path, in.line());
  if (dim <= 0 || count <= 0) {
    throw ParseError(path.string(), in.line(), "dim and count must be positive");
  }

  Matrix data(count, dim);
  for (std::int64_t r = 0; r < count; ++r) {
    if (!in.next_nonblank(fields)) {
      throw ParseError(path.string(), in.line() + 1,
                       "expected " + std::to_string(count) + " rows, found " + std::to_string(r));
    }
    if (static_cast<std::int64_t>(fields.size()) != dim) {
      throw ParseError(path.string(), in.line(),
                       "expected " + std::to_string(dim) + " values, found " +
                           std::to_string(fields.size()));
    }
    for (std::int64_t c = 0; c < dim; ++c) {
      const double v = detail::parse_double(fields[static_cast<std::size_t>(c)], path, in.line());
      if (!std::isfinite(v)) {
        throw ParseError(path.string(), in.line(), "non-finite value");
      }
      data(r, c) = v;
    }
  }
  if (in.next_nonblank(fields)) {
    throw ParseError(path.string(), in.line(), "unexpected data after the last row");
  }
  return DescriptorSet(std::move(data));
}

void save_descriptors(const std::filesystem::path& path, const DescriptorSet& set) {
  std::string out;
  out += std::to_string(set.dim()) + " " + std::to_string(set.count()) + "\n";
  for (Index r = 0; r < set.count(); ++r) {
    for (Index c = 0; c < set.dim(); ++c) {
      if (c) out += ' ';
      detail::append_double(out, set.data()(r, c));
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

TrackSet load_tracks(const std::filesystem::path& path) {
  detail::LineReader in(path);
  std::vector<std::string_view> fields;
  std::vector<Track> tracks;
  while (in.next_nonblank(fields)) {
    Track track;
    for (auto f : fields) {
      const auto colon = f.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(path.string(), in.line(), "entry must be \"frame:descriptor_index\"");
      }
      const auto frame = detail::parse_integer<std::int64_t>(f.substr(0, colon), path, in.line());
      const auto index = detail::parse_integer<std::size_t>(f.substr(colon + 1), path, in.line());
      track.push_back({frame, index});
    }
    tracks.push_back(std::move(track));
  }
  try {
    return TrackSet(std::move(tracks));
  } catch (const Error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void save_tracks(const std::filesystem::path& path, const TrackSet& tracks) {
  std::string out;
  for (const auto& track : tracks.tracks()) {
    for (std::size_t k = 0; k < track.size(); ++k) {
      if (k) out += ' ';
      out += std::to_string(track[k].frame) + ":" + std::to_string(track[k].descriptor);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

PairSet load_pairs(const std::filesystem::path& path) {
  detail::LineReader in(path);
  std::vector<std::string_view> fields;
  PairSet pairs;
  while (in.next_nonblank(fields)) {
    if (fields.size() < 3 || fields.size() > 4) {
      throw ParseError(path.string(), in.line(), "expected \"<i> <j> <label> [<dt>]\"");
    }
    const auto i = detail::parse_integer<std::size_t>(fields[0], path, in.line());
    const auto j = detail::parse_integer<std::size_t>(fields[1], path, in.line());
    const auto label = detail::parse_integer<int>(fields[2], path, in.line());
    if (label == 1) {
      std::int64_t dt = 0;
      if (fields.size() == 4) dt = detail::parse_integer<std::int64_t>(fields[3], path, in.line());
      pairs.positives.push_back({i, j, dt});
    } else if (label == 0) {
      pairs.negatives.push_back({i, j});
    } else {
      throw ParseError(path.string(), in.line(), "label must be 0 or 1");
    }
  }
  return pairs;
}

void save_pairs(const std::filesystem::path& path, const PairSet& pairs) {
  std::string out;
  for (const auto& p : pairs.positives) {
    out += std::to_string(p.i) + " " + std::to_string(p.j) + " 1 " + std::to_string(p.dt) + "\n";
  }
  for (const auto& p : pairs.negatives) {
    out += std::to_string(p.i) + " " + std::to_string(p.j) + " 0\n";
  }
  detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Normalization

Normalization fit_normalization(const DescriptorSet& set) {
  if (set.count() == 0) throw Error("cannot fit normalization on an empty descriptor set");
  const RowVector lo = set.data().colwise().minCoeff();
  const RowVector hi = set.data().colwise().maxCoeff();
  Normalization params{Vector(set.dim()), Vector(set.dim())};
  for (Index c = 0; c < set.dim(); ++c) {
    params.offset(c) = 0.5 * (lo(c) + hi(c));
    const double spread = hi(c) - lo(c);
    params.scale(c) = spread > 0.0 ? 2.0 / spread : 0.0;
  }
  return params;
}

DescriptorSet apply_normalization(const DescriptorSet& set, const Normalization& params) {
  if (params.dim() != set.dim()) {
    throw Error("normalization has dimension " + std::to_string(params.dim()) +
                ", descriptors have " + std::to_string(set.dim()));
  }
  Matrix out = set.data();
  for (Index c = 0; c < set.dim(); ++c) {
    const double offset = params.offset(c);
    const double scale = params.scale(c);
    for (Index r = 0; r < set.count(); ++r) {
      out(r, c) = std::clamp((out(r, c) - offset) * scale, -1.0, 1.0);
    }
  }
  return DescriptorSet(std::move(out), params);
}

// ---------------------------------------------------------------------------
// Pair construction

std::vector<PositivePair> build_positive_pairs(const TrackSet& tracks, std::int64_t min_dt,
                                               std::int64_t max_dt, std::size_t target_count,
                                               std::uint64_t seed) {
  if (min_dt > max_dt) throw Error("dt window is empty: min_dt > max_dt");
  if (tracks.size() == 0) throw Error("no tracks to build positive pairs from");

  std::map<std::int64_t, std::vector<PositivePair>> buckets;
  for (const auto& track : tracks.tracks()) {
    for (std::size_t a = 0; a < track.size(); ++a) {
      for (std::size_t b = a + 1; b < track.size(); ++b) {
        const std::int64_t dt = track[b].frame - track[a].frame;
        if (dt > max_dt) break;
        if (dt >= min_dt) buckets[dt].push_back({track[a].descriptor, track[b].descriptor, dt});
      }
    }
  }
  if (buckets.empty()) {
    throw Error("no track admits a pair with dt in [" + std::to_string(min_dt) + ", " +
                std::to_string(max_dt) + "]");
  }

  const std::size_t k = buckets.size();
  const std::size_t base = target_count / k;
  const std::size_t remainder = target_count % k;

  Rng rng(seed);
  std::vector<PositivePair> out;
  out.reserve(target_count);
  std::size_t b = 0;
  for (auto& [dt, candidates] : buckets) {
    const std::size_t quota = base + (b++ < remainder ? 1 : 0);
    std::size_t cursor = candidates.size();
    for (std::size_t taken = 0; taken < quota; ++taken) {
      if (cursor == candidates.size()) {
        std::shuffle(candidates.begin(), candidates.end(), rng);
        cursor = 0;
      }
      out.push_back(candidates[cursor++]);
    }
  }
  return out;
}

std::vector<IndexPair> sample_negative_pairs(const TrackSet& tracks, std::size_t target_count,
                                             std::uint64_t seed) {
  if (tracks.size() < 2) throw Error("negative pairs need at least two tracks");

  struct Entry {
    std::size_t track;
    std::size_t descriptor;
  };
  std::vector<Entry> entries;
  double same_track = 0.0;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (const auto& e : tracks[t]) entries.push_back({t, e.descriptor});
    const double len = static_cast<double>(tracks[t].size());
    same_track += len * (len - 1.0) / 2.0;
  }
  const double n = static_cast<double>(entries.size());
  const double available = n * (n - 1.0) / 2.0 - same_track;
  if (static_cast<double>(target_count) > available) {
    throw Error("requested " + std::to_string(target_count) + " negatives but only " +
                std::to_string(static_cast<std::uint64_t>(available)) + " cross-track pairs exist");
  }

  Rng rng(seed);
  std::vector<IndexPair> out;
  out.reserve(target_count);

  if (2.0 * static_cast<double>(target_count) > available) {
    // Dense request: enumerate and shuffle.
    std::vector<IndexPair> all;
    for (std::size_t a = 0; a < entries.size(); ++a) {
      for (std::size_t b = a + 1; b < entries.size(); ++b) {
        if (entries[a].track != entries[b].track) {
          all.push_back({entries[a].descriptor, entries[b].descriptor});
        }
      }
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(target_count);
    return all;
  }

  std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(target_count * 2);
  while (out.size() < target_count) {
    const Entry& a = entries[pick(rng)];
    const Entry& b = entries[pick(rng)];
    if (a.track == b.track) continue;
    const std::uint64_t lo = std::min(a.descriptor, b.descriptor);
    const std::uint64_t hi = std::max(a.descriptor, b.descriptor);
    if (!seen.insert((lo << 32) ^ hi).second) continue;
    out.push_back({a.descriptor, b.descriptor});
  }
  return out;
}

void check_pairs(const PairSet& pairs, const TrackSet& tracks, std::size_t descriptor_count) {
  const auto lookup = tracks.track_lookup(descriptor_count);
  auto track_of = [&](std::size_t i) {
    if (i >= descriptor_count) throw Error("pair index " + std::to_string(i) + " out of range");
    return lookup[i];
  };
  for (const auto& p : pairs.positives) {
    if (p.i == p.j) throw Error("positive pair repeats descriptor " + std::to_string(p.i));
    const auto ti = track_of(p.i);
    if (ti < 0 || ti != track_of(p.j)) {
      throw Error("positive pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) +
                  ") does not share a track");
    }
  }
  for (const auto& p : pairs.negatives) {
    if (p.i == p.j) throw Error("negative pair repeats descriptor " + std::to_string(p.i));
    const auto ti = track_of(p.i);
    if (ti >= 0 && ti == track_of(p.j)) {
      throw Error("negative pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) +
                  ") lies on one track");
    }
  }
}

}  // namespace deschash
