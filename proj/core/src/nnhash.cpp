#include "deschash/nnhash.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deschash/error.hpp"
#include "deschash/linear_hashers.hpp"
#include "deschash/seed.hpp"
#include "text_io.hpp"

namespace deschash {

// ---------------------------------------------------------------------------
// Beta schedule

BetaSchedule::BetaSchedule(std::vector<BetaPoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error("beta schedule is empty");
  if (points_.front().epoch != 0) throw Error("beta schedule must start at epoch 0");
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (!(points_[k].beta > 0.0) || !std::isfinite(points_[k].beta)) {
      throw Error("beta schedule values must be positive");
    }
    if (k > 0 && (points_[k].epoch <= points_[k - 1].epoch ||
                  points_[k].beta < points_[k - 1].beta)) {
      throw Error("beta schedule must increase in epoch and not decrease in beta");
    }
  }
}

BetaSchedule BetaSchedule::parse(std::string_view text) {
  std::vector<BetaPoint> points;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw Error("beta schedule entry \"" + std::string(item) + "\" must be epoch:beta");
    }
    BetaPoint p;
    try {
      p.epoch = detail::parse_integer<int>(item.substr(0, colon), "beta-schedule", 0);
      p.beta = detail::parse_double(item.substr(colon + 1), "beta-schedule", 0);
    } catch (const ParseError&) {
      throw Error("malformed beta schedule entry \"" + std::string(item) + "\"");
    }
    points.push_back(p);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return BetaSchedule(std::move(points));
}

double BetaSchedule::at(int epoch) const {
  if (epoch <= 0) return points_.front().beta;
  for (std::size_t k = 1; k < points_.size(); ++k) {
    if (epoch < points_[k].epoch) {
      const auto& a = points_[k - 1];
      const auto& b = points_[k];
      const double s = static_cast<double>(epoch - a.epoch) / static_cast<double>(b.epoch - a.epoch);
      return a.beta + s * (b.beta - a.beta);
    }
  }
  return points_.back().beta;
}

std::string BetaSchedule::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(points_[k].epoch) + ":";
    detail::append_double(out, points_[k].beta);
  }
  return out;
}

void SiameseConfig::validate() const {
  if (!(margin > 0.0)) throw Error("margin must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (code_length < 1) throw Error("code length must be at least 1");
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (!(armijo > 0.0 && armijo < 1.0)) throw Error("Armijo constant must lie in (0, 1)");
  if (max_backtracks < 1) throw Error("max_backtracks must be at least 1");
}

// ---------------------------------------------------------------------------
// Network pieces

Vector forward(const Matrix& projection, const Vector& offset, double beta, const Vector& x) {
  return (beta * (projection * x + offset)).array().tanh().matrix();
}

double pair_loss(const Vector& y1, const Vector& y2, PairLabel label, double margin) {
  if (y1.size() != y2.size()) throw Error("pair outputs differ in length");
  if (label == PairLabel::positive) return 0.5 * (y1 - y2).squaredNorm();
  const double hinge = std::max(0.0, margin - (y1 - y2).norm());
  return 0.5 * hinge * hinge;
}

namespace {

std::pair<double, double> class_weights(std::size_t n_pos, std::size_t n_neg,
                                        LossWeighting weighting) {
  if (weighting == LossWeighting::pooled_mean) {
    const double w = 1.0 / static_cast<double>(n_pos + n_neg);
    return {w, w};
  }
  return {n_pos ? 1.0 / static_cast<double>(n_pos) : 0.0,
          n_neg ? 1.0 / static_cast<double>(n_neg) : 0.0};
}

}  // namespace

SiameseObjective::SiameseObjective(const DescriptorSet& set, const PairSet& pairs, double margin,
                                   LossWeighting weighting)
    : margin_(margin) {
  if (!(margin > 0.0)) throw Error("margin must be positive");
  if (pairs.positives.empty() && pairs.negatives.empty()) throw Error("empty training batch");
  const auto count = static_cast<std::size_t>(set.count());
  std::vector<Index> local(count, -1);
  std::vector<Index> used;
  auto map = [&](std::size_t d) {
    if (d >= count) throw Error("pair index out of range");
    if (local[d] < 0) {
      local[d] = static_cast<Index>(used.size());
      used.push_back(static_cast<Index>(d));
    }
    return local[d];
  };
  for (const auto& p : pairs.positives) positives_.emplace_back(map(p.i), map(p.j));
  for (const auto& p : pairs.negatives) negatives_.emplace_back(map(p.i), map(p.j));
  x_.resize(set.dim(), static_cast<Index>(used.size()));
  for (std::size_t k = 0; k < used.size(); ++k) {
    x_.col(static_cast<Index>(k)) = set.row(used[k]).transpose();
  }
  std::tie(w_pos_, w_neg_) = class_weights(positives_.size(), negatives_.size(), weighting);
}

double SiameseObjective::evaluate(const Matrix& projection, const Vector& offset, double beta,
                                  Gradient* grad) const {
  if (projection.cols() != x_.rows() || offset.size() != projection.rows()) {
    throw Error("network parameters do not match the descriptor dimension");
  }
  Matrix y = projection * x_;
  y.colwise() += offset;
  y = (beta * y).array().tanh().matrix();

  Matrix g_y;
  if (grad) g_y = Matrix::Zero(y.rows(), y.cols());

  double pos_loss = 0.0;
  for (const auto& [a, b] : positives_) {
    const Vector d = y.col(a) - y.col(b);
    pos_loss += 0.5 * d.squaredNorm();
    if (grad) {
      g_y.col(a) += w_pos_ * d;
      g_y.col(b) -= w_pos_ * d;
    }
  }
  double neg_loss = 0.0;
  for (const auto& [a, b] : negatives_) {
    const Vector d = y.col(a) - y.col(b);
    const double dist = d.norm();
    if (dist >= margin_) continue;
    const double gap = margin_ - dist;
    neg_loss += 0.5 * gap * gap;
    if (grad && dist > 0.0) {
      const double coef = -w_neg_ * gap / dist;
      g_y.col(a) += coef * d;
      g_y.col(b) -= coef * d;
    }
  }
  const double loss = w_pos_ * pos_loss + w_neg_ * neg_loss;

  if (grad) {
    // dy/dz = beta (1 - y^2)
    const Matrix g_z = (g_y.array() * (beta * (1.0 - y.array().square()))).matrix();
    grad->d_projection = g_z * x_.transpose();
    grad->d_offset = g_z.rowwise().sum();
    grad->loss = loss;
  }
  return loss;
}

double SiameseObjective::loss(const Matrix& projection, const Vector& offset, double beta) const {
  return evaluate(projection, offset, beta, nullptr);
}

Gradient SiameseObjective::gradient(const Matrix& projection, const Vector& offset,
                                    double beta) const {
  Gradient g;
  evaluate(projection, offset, beta, &g);
  return g;
}

Gradient batch_gradient(const Matrix& projection, const Vector& offset, double beta,
                        std::span<const LabeledPair> batch, double margin,
                        LossWeighting weighting) {
  if (batch.empty()) throw Error("empty batch");
  const Index n = projection.cols();
  Matrix data(static_cast<Index>(2 * batch.size()), n);
  PairSet pairs;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch[k].a.size() != n || batch[k].b.size() != n) {
      throw Error("batch descriptor dimension does not match the projection");
    }
    data.row(static_cast<Index>(2 * k)) = batch[k].a.transpose();
    data.row(static_cast<Index>(2 * k + 1)) = batch[k].b.transpose();
    if (batch[k].label == PairLabel::positive) {
      pairs.positives.push_back({2 * k, 2 * k + 1, 0});
    } else {
      pairs.negatives.push_back({2 * k, 2 * k + 1});
    }
  }
  const SiameseObjective objective(DescriptorSet(std::move(data)), pairs, margin, weighting);
  return objective.gradient(projection, offset, beta);
}

// ---------------------------------------------------------------------------
// Training log

std::string TrainingLog::to_csv() const {
  std::string out = "epoch,beta,loss\n0,";
  detail::append_double(out, initial_beta);
  out += ',';
  detail::append_double(out, initial_loss);
  out += '\n';
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + ",";
    detail::append_double(out, e.beta);
    out += ',';
    detail::append_double(out, e.loss);
    out += '\n';
  }
  return out;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  detail::write_file(path, to_csv());
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Params {
  Matrix p;
  Vector t;
};

double dot(const Gradient& g, const Params& d) {
  return (g.d_projection.array() * d.p.array()).sum() + g.d_offset.dot(d.t);
}

double sq_norm(const Gradient& g) { return g.d_projection.squaredNorm() + g.d_offset.squaredNorm(); }

Params negated(const Gradient& g) { return {-g.d_projection, -g.d_offset}; }

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw Error("NNhash training produced a non-finite loss at epoch " + std::to_string(epoch));
  }
}

}  // namespace

NnhashResult train_nnhash(const DescriptorSet& set, const PairSet& pairs,
                          const SiameseConfig& cfg) {
  cfg.validate();
  if (pairs.positives.empty() || pairs.negatives.empty()) {
    throw Error("NNhash training needs positive and negative pairs");
  }

  Params x;
  if (cfg.init == SiameseInit::diffhash) {
    TrainConfig lin;
    lin.alpha = cfg.alpha;
    lin.code_length = cfg.code_length;
    lin.seed = cfg.seed;
    const HashModel start = train_diffhash(set, pairs, lin);
    x = {start.projection, start.offset};
  } else {
    Rng rng = make_rng(cfg.seed, "nnhash-init");
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(set.dim())));
    x.p.resize(cfg.code_length, set.dim());
    for (Index r = 0; r < x.p.rows(); ++r) {
      for (Index c = 0; c < x.p.cols(); ++c) x.p(r, c) = gauss(rng);
    }
    x.t = Vector::Zero(cfg.code_length);
  }

  const SiameseObjective objective(set, pairs, cfg.margin, cfg.weighting);
  NnhashResult result;
  TrainingLog& log = result.log;

  double beta = cfg.beta_schedule.at(0);
  Gradient g = objective.gradient(x.p, x.t, beta);
  check_finite(g.loss, 0);
  log.initial_beta = beta;
  log.initial_loss = g.loss;

  Params dir = negated(g);
  double step = 1.0 / std::max(1.0, std::sqrt(sq_norm(g)));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double beta_e = cfg.beta_schedule.at(epoch);
    if (beta_e != beta) {
      beta = beta_e;
      g = objective.gradient(x.p, x.t, beta);
      check_finite(g.loss, epoch);
      dir = negated(g);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.beta = beta;
    rec.loss_before = g.loss;
    rec.loss = g.loss;

    if (cfg.optimizer == Optimizer::gradient_descent || dot(g, dir) >= 0.0) dir = negated(g);

    bool accepted = false;
    bool steepest = cfg.optimizer == Optimizer::gradient_descent;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const double slope = dot(g, dir);
      if (!(slope < 0.0)) break;
      double alpha = 2.0 * step;
      for (int k = 0; k < cfg.max_backtracks; ++k, alpha *= 0.5) {
        const Matrix p_try = x.p + alpha * dir.p;
        const Vector t_try = x.t + alpha * dir.t;
        const double f_try = objective.loss(p_try, t_try, beta);
        check_finite(f_try, epoch);
        if (f_try <= g.loss + cfg.armijo * alpha * slope) {
          x.p = p_try;
          x.t = t_try;
          step = alpha;
          accepted = true;
          break;
        }
      }
      // Conjugate direction failed the line search: fall back to steepest descent once.
      if (accepted || steepest) break;
      dir = negated(g);
      steepest = true;
    }

    if (accepted) {
      Gradient g_new = objective.gradient(x.p, x.t, beta);
      check_finite(g_new.loss, epoch);
      if (cfg.optimizer == Optimizer::conjugate_gradient) {
        // Polak-Ribiere+, restarted whenever it goes negative.
        const double denom = sq_norm(g);
        double pr = 0.0;
        if (denom > 0.0) {
          pr = ((g_new.d_projection.array() * (g_new.d_projection - g.d_projection).array()).sum() +
                g_new.d_offset.dot(g_new.d_offset - g.d_offset)) /
               denom;
        }
        pr = std::max(0.0, pr);
        dir = {-g_new.d_projection + pr * dir.p, -g_new.d_offset + pr * dir.t};
      } else {
        dir = negated(g_new);
      }
      g = std::move(g_new);
      rec.loss = g.loss;
      rec.step = step;
      rec.accepted = true;
    }
    log.epochs.push_back(rec);
  }

  HashModel& model = result.model;
  model.method = Method::nnhash;
  model.projection = std::move(x.p);
  model.offset = std::move(x.t);
  model.beta = beta;
  model.norm = set.normalization();
  model.validate();
  return result;
}

}  // namespace deschash
