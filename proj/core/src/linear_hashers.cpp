#include "deschash/linear_hashers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deschash/covstats.hpp"
#include "deschash/error.hpp"
#include "deschash/seed.hpp"

namespace deschash {

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (code_length < 1) throw Error("code length must be at least 1");
  if (candidates_per_round < 1) throw Error("candidates_per_round must be at least 1");
  if (ridge && !(*ridge >= 0.0)) throw Error("ridge must be non-negative");
}

namespace {

void require_pairs(const PairSet& pairs, std::size_t descriptor_count) {
  if (pairs.positives.empty() || pairs.negatives.empty()) {
    throw Error("training needs at least one positive and one negative pair");
  }
  for (const auto& p : pairs.positives) {
    if (p.i >= descriptor_count || p.j >= descriptor_count) throw Error("pair index out of range");
  }
  for (const auto& p : pairs.negatives) {
    if (p.i >= descriptor_count || p.j >= descriptor_count) throw Error("pair index out of range");
  }
}

bool bit_of(double value, double offset) { return value + offset >= 0.0; }

bool split_by(const ProjectedPair& p, double offset) {
  return bit_of(p.a, offset) != bit_of(p.b, offset);
}

struct SortedBounds {
  std::vector<double> lo;
  std::vector<double> hi;

  // number of pairs with lo < tau <= hi
  std::int64_t split(double tau) const {
    const auto below_lo = std::lower_bound(lo.begin(), lo.end(), tau) - lo.begin();
    const auto below_hi = std::lower_bound(hi.begin(), hi.end(), tau) - hi.begin();
    return static_cast<std::int64_t>(below_lo - below_hi);
  }
};

SortedBounds bounds_of(std::span<const ProjectedPair> pairs, std::span<const double> fixed,
                       std::int64_t& already_split) {
  SortedBounds out;
  already_split = 0;
  for (const auto& p : pairs) {
    const bool split = std::any_of(fixed.begin(), fixed.end(),
                                   [&](double off) { return split_by(p, off); });
    if (split) {
      ++already_split;
      continue;
    }
    out.lo.push_back(std::min(p.a, p.b));
    out.hi.push_back(std::max(p.a, p.b));
  }
  std::sort(out.lo.begin(), out.lo.end());
  std::sort(out.hi.begin(), out.hi.end());
  return out;
}

/// Midpoints between sorted distinct values, with one sentinel 1 beyond each end.
std::vector<double> candidate_thresholds(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> out;
  out.reserve(values.size() + 1);
  out.push_back(values.front() - 1.0);
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    out.push_back(0.5 * (values[k] + values[k + 1]));
  }
  out.push_back(values.back() + 1.0);
  return out;
}

}  // namespace

ThresholdChoice select_threshold(std::span<const ProjectedPair> positives,
                                 std::span<const ProjectedPair> negatives,
                                 std::span<const double> fixed_offsets) {
  if (positives.empty() || negatives.empty()) {
    throw Error("threshold selection needs positive and negative pairs");
  }
  std::vector<double> values;
  values.reserve(2 * (positives.size() + negatives.size()));
  for (const auto& p : positives) values.insert(values.end(), {p.a, p.b});
  for (const auto& p : negatives) values.insert(values.end(), {p.a, p.b});
  const auto candidates = candidate_thresholds(std::move(values));

  std::int64_t pos_fixed = 0;
  std::int64_t neg_fixed = 0;
  const SortedBounds pos = bounds_of(positives, fixed_offsets, pos_fixed);
  const SortedBounds neg = bounds_of(negatives, fixed_offsets, neg_fixed);
  const auto n_pos = static_cast<std::int64_t>(positives.size());
  const auto n_neg = static_cast<std::int64_t>(negatives.size());
  const auto neg_free = static_cast<std::int64_t>(neg.lo.size());

  // FPR + FNR = fn/P + fp/N, compared exactly as fn*N + fp*P.
  std::int64_t best_score = 0;
  std::int64_t best_fn = 0;
  std::int64_t best_fp = 0;
  double best_tau = 0.0;
  bool have = false;
  for (double tau : candidates) {
    const std::int64_t fn = pos_fixed + pos.split(tau);
    const std::int64_t fp = neg_free - neg.split(tau);
    const std::int64_t score = fn * n_neg + fp * n_pos;
    if (!have || score < best_score ||
        (score == best_score && std::abs(tau) < std::abs(best_tau))) {
      have = true;
      best_score = score;
      best_fn = fn;
      best_fp = fp;
      best_tau = tau;
    }
  }
  const double error = static_cast<double>(best_fn) / static_cast<double>(n_pos) +
                       static_cast<double>(best_fp) / static_cast<double>(n_neg);
  return {-best_tau, error};
}

Vector fit_offsets(const Matrix& projection, Index period, const DescriptorSet& set,
                   const PairSet& pairs) {
  if (period < 1) throw Error("offset period must be positive");
  const Matrix z = set.data() * projection.transpose();
  Vector offsets(projection.rows());
  std::vector<ProjectedPair> pos(pairs.positives.size());
  std::vector<ProjectedPair> neg(pairs.negatives.size());
  for (Index r = 0; r < projection.rows(); ++r) {
    for (std::size_t k = 0; k < pos.size(); ++k) {
      const auto& p = pairs.positives[k];
      pos[k] = {z(static_cast<Index>(p.i), r), z(static_cast<Index>(p.j), r)};
    }
    for (std::size_t k = 0; k < neg.size(); ++k) {
      const auto& p = pairs.negatives[k];
      neg[k] = {z(static_cast<Index>(p.i), r), z(static_cast<Index>(p.j), r)};
    }
    std::vector<double> fixed;
    for (Index prev = r - period; prev >= 0; prev -= period) fixed.push_back(offsets(prev));
    offsets(r) = select_threshold(pos, neg, fixed).offset;
  }
  return offsets;
}

namespace {

HashModel assemble_cycled(Method method, const Matrix& directions, const DescriptorSet& set,
                          const PairSet& pairs, Index code_length) {
  const Index unique = directions.rows();
  HashModel model;
  model.method = method;
  model.projection.resize(code_length, directions.cols());
  for (Index r = 0; r < code_length; ++r) model.projection.row(r) = directions.row(r % unique);
  model.offset = fit_offsets(model.projection, unique, set, pairs);
  model.norm = set.normalization();
  model.validate();
  return model;
}

}  // namespace

HashModel train_diffhash(const DescriptorSet& set, const PairSet& pairs, const TrainConfig& cfg) {
  cfg.validate();
  require_pairs(pairs, static_cast<std::size_t>(set.count()));
  const auto cov = DiffCovariance::compute(set, pairs);
  const Matrix objective = cfg.alpha * cov.c_plus - cov.c_minus;
  const auto eig = smallest_eigenvectors_symmetric(objective, std::min(cfg.code_length, set.dim()));
  return assemble_cycled(Method::diffhash, eig.vectors, set, pairs, cfg.code_length);
}

HashModel train_ldahash(const DescriptorSet& set, const PairSet& pairs, const TrainConfig& cfg) {
  cfg.validate();
  require_pairs(pairs, static_cast<std::size_t>(set.count()));
  const auto cov = DiffCovariance::compute(set, pairs);
  const double ridge = cfg.ridge.value_or(default_ridge(cov.c_minus));
  const auto eig = smallest_generalized_eigenvectors(cov.c_plus, cov.c_minus,
                                                     std::min(cfg.code_length, set.dim()), ridge);
  return assemble_cycled(Method::ldahash, eig.vectors, set, pairs, cfg.code_length);
}

// ---------------------------------------------------------------------------
// SSH

std::vector<double> initial_pair_weights(const PairSet& pairs) {
  if (pairs.positives.empty() || pairs.negatives.empty()) {
    throw Error("boosting needs positive and negative pairs");
  }
  std::vector<double> w;
  w.reserve(pairs.positives.size() + pairs.negatives.size());
  w.insert(w.end(), pairs.positives.size(), 0.5 / static_cast<double>(pairs.positives.size()));
  w.insert(w.end(), pairs.negatives.size(), 0.5 / static_cast<double>(pairs.negatives.size()));
  return w;
}

namespace {

struct PairView {
  std::size_t i;
  std::size_t j;
  bool positive;
};

std::vector<PairView> flatten(const PairSet& pairs) {
  std::vector<PairView> out;
  out.reserve(pairs.positives.size() + pairs.negatives.size());
  for (const auto& p : pairs.positives) out.push_back({p.i, p.j, true});
  for (const auto& p : pairs.negatives) out.push_back({p.i, p.j, false});
  return out;
}

bool misclassified(const PairView& p, double vi, double vj, double offset) {
  const bool agree = bit_of(vi, offset) == bit_of(vj, offset);
  return agree != p.positive;
}

}  // namespace

WeakClassifier select_weak_classifier(const DescriptorSet& set, const PairSet& pairs,
                                      std::span<const double> weights, const Matrix& candidates) {
  const auto flat = flatten(pairs);
  if (weights.size() != flat.size()) throw Error("one weight per pair required");
  if (candidates.rows() != set.dim() || candidates.cols() < 1) {
    throw Error("candidate directions must be a dim x count matrix");
  }

  // Only descriptors touched by a pair take part.
  std::vector<std::size_t> local(static_cast<std::size_t>(set.count()),
                                 static_cast<std::size_t>(-1));
  std::vector<std::size_t> used;
  for (const auto& p : flat) {
    for (std::size_t d : {p.i, p.j}) {
      if (d >= local.size()) throw Error("pair index out of range");
      if (local[d] == static_cast<std::size_t>(-1)) {
        local[d] = used.size();
        used.push_back(d);
      }
    }
  }
  Matrix x(static_cast<Index>(used.size()), set.dim());
  for (std::size_t k = 0; k < used.size(); ++k) {
    x.row(static_cast<Index>(k)) = set.row(static_cast<Index>(used[k]));
  }
  const Matrix proj = x * candidates;

  double w_neg = 0.0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (!flat[k].positive) w_neg += weights[k];
  }

  const std::size_t m = used.size();
  std::vector<std::size_t> order(m);
  std::vector<std::size_t> rank(m);
  std::vector<double> d_pos(m);
  std::vector<double> d_neg(m);

  WeakClassifier best;
  bool have = false;
  for (Index c = 0; c < candidates.cols(); ++c) {
    const auto v = proj.col(c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = v(static_cast<Index>(a));
      const double vb = v(static_cast<Index>(b));
      return va != vb ? va < vb : a < b;
    });
    for (std::size_t r = 0; r < m; ++r) rank[order[r]] = r;

    // A pair is split by tau iff lo < tau <= hi: +w enters at the lower endpoint's
    // rank and leaves at the upper one's.
    std::fill(d_pos.begin(), d_pos.end(), 0.0);
    std::fill(d_neg.begin(), d_neg.end(), 0.0);
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const std::size_t ri = rank[local[flat[k].i]];
      const std::size_t rj = rank[local[flat[k].j]];
      auto& delta = flat[k].positive ? d_pos : d_neg;
      delta[std::min(ri, rj)] += weights[k];
      delta[std::max(ri, rj)] -= weights[k];
    }

    auto consider = [&](double tau, double split_pos, double split_neg) {
      const double err = split_pos + (w_neg - split_neg);
      const bool better = !have || err < best.weighted_error ||
                          (err == best.weighted_error && std::abs(tau) < std::abs(best.offset));
      if (better) {
        have = true;
        best.weighted_error = err;
        best.offset = -tau;
        best.candidate = static_cast<int>(c);
      }
    };

    const double v_min = v(static_cast<Index>(order.front()));
    const double v_max = v(static_cast<Index>(order.back()));
    consider(v_min - 1.0, 0.0, 0.0);
    double split_pos = 0.0;
    double split_neg = 0.0;
    for (std::size_t r = 0; r + 1 < m; ++r) {
      split_pos += d_pos[r];
      split_neg += d_neg[r];
      const double here = v(static_cast<Index>(order[r]));
      const double next = v(static_cast<Index>(order[r + 1]));
      if (here != next) consider(0.5 * (here + next), split_pos, split_neg);
    }
    consider(v_max + 1.0, 0.0, 0.0);
  }
  best.direction = candidates.col(best.candidate);
  return best;
}

double weighted_pair_error(const DescriptorSet& set, const PairSet& pairs,
                           std::span<const double> weights, const Vector& direction,
                           double offset) {
  const auto flat = flatten(pairs);
  if (weights.size() != flat.size()) throw Error("one weight per pair required");
  double err = 0.0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double vi = set.row(static_cast<Index>(flat[k].i)).dot(direction);
    const double vj = set.row(static_cast<Index>(flat[k].j)).dot(direction);
    if (misclassified(flat[k], vi, vj, offset)) err += weights[k];
  }
  return err;
}

void reweight_pairs(const DescriptorSet& set, const PairSet& pairs, std::span<double> weights,
                    const WeakClassifier& weak) {
  const auto flat = flatten(pairs);
  if (weights.size() != flat.size()) throw Error("one weight per pair required");
  const double eps = std::clamp(weak.weighted_error, 1e-12, 1.0 - 1e-12);
  const double step = 0.5 * std::log((1.0 - eps) / eps);
  const double up = std::exp(step);
  const double down = std::exp(-step);
  double total = 0.0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double vi = set.row(static_cast<Index>(flat[k].i)).dot(weak.direction);
    const double vj = set.row(static_cast<Index>(flat[k].j)).dot(weak.direction);
    weights[k] *= misclassified(flat[k], vi, vj, weak.offset) ? up : down;
    total += weights[k];
  }
  for (double& w : weights) w /= total;
}

SshResult train_ssh(const DescriptorSet& set, const PairSet& pairs, const TrainConfig& cfg) {
  cfg.validate();
  require_pairs(pairs, static_cast<std::size_t>(set.count()));
  auto weights = initial_pair_weights(pairs);
  Rng rng = make_rng(cfg.seed, "ssh-directions");
  std::normal_distribution<double> gauss(0.0, 1.0);

  SshResult result;
  std::vector<Vector> rows;
  std::vector<double> offsets;
  for (Index round = 0; round < cfg.code_length; ++round) {
    Matrix candidates(set.dim(), cfg.candidates_per_round);
    for (Index c = 0; c < candidates.cols(); ++c) {
      for (Index r = 0; r < candidates.rows(); ++r) candidates(r, c) = gauss(rng);
      const double norm = candidates.col(c).norm();
      if (norm > 0.0) candidates.col(c) /= norm;
    }
    const auto weak = select_weak_classifier(set, pairs, weights, candidates);
    if (weak.weighted_error >= 0.5) {
      result.truncated = true;
      break;
    }
    rows.push_back(weak.direction);
    offsets.push_back(weak.offset);
    result.round_errors.push_back(weak.weighted_error);
    reweight_pairs(set, pairs, weights, weak);
  }
  if (rows.empty()) {
    throw Error("SSH: no weak classifier reached weighted error below 0.5 in the first round");
  }

  HashModel& model = result.model;
  model.method = Method::ssh;
  model.projection.resize(static_cast<Index>(rows.size()), set.dim());
  model.offset.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    model.projection.row(static_cast<Index>(r)) = rows[r].transpose();
    model.offset(static_cast<Index>(r)) = offsets[r];
  }
  model.norm = set.normalization();
  model.validate();
  return result;
}

// ---------------------------------------------------------------------------
// True costs

Matrix sign_codes(const HashModel& model, const DescriptorSet& set) {
  if (model.dim() != set.dim()) {
    throw Error("model dimension " + std::to_string(model.dim()) + " does not match descriptors (" +
                std::to_string(set.dim()) + ")");
  }
  Matrix z = set.data() * model.projection.transpose();
  z.rowwise() += model.offset.transpose();
  return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

double true_cost(const HashModel& model, const PairSet& pairs, const DescriptorSet& set,
                 double alpha, CostVariant variant) {
  if (pairs.positives.empty() || pairs.negatives.empty()) {
    throw Error("true cost needs non-empty positive and negative pair sets");
  }
  require_pairs(pairs, static_cast<std::size_t>(set.count()));
  const Matrix y = sign_codes(model, set);
  auto term = [&](std::size_t i, std::size_t j) {
    const auto a = y.row(static_cast<Index>(i));
    const auto b = y.row(static_cast<Index>(j));
    return variant == CostVariant::correlation ? a.dot(b) : (a - b).squaredNorm();
  };
  double pos = 0.0;
  for (const auto& p : pairs.positives) pos += term(p.i, p.j);
  pos /= static_cast<double>(pairs.positives.size());
  double neg = 0.0;
  for (const auto& p : pairs.negatives) neg += term(p.i, p.j);
  neg /= static_cast<double>(pairs.negatives.size());
  return variant == CostVariant::correlation ? neg - alpha * pos : alpha * pos - neg;
}

}  // namespace deschash
