#include "deschash/eval.hpp"

#include <algorithm>
#include <string>

#include "deschash/error.hpp"
#include "deschash/linear_hashers.hpp"
#include "text_io.hpp"

namespace deschash {

RocCurve roc_from_distances(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) {
    throw Error("ROC needs positive and negative distances");
  }
  std::vector<double> pos(positive.begin(), positive.end());
  std::vector<double> neg(negative.begin(), negative.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size() + 1);
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);

  const double n_pos = static_cast<double>(pos.size());
  const double n_neg = static_cast<double>(neg.size());
  RocCurve curve;
  curve.points.reserve(thresholds.size());
  std::size_t ip = 0;
  std::size_t in = 0;
  for (double thr : thresholds) {
    while (ip < pos.size() && pos[ip] <= thr) ++ip;
    while (in < neg.size() && neg[in] <= thr) ++in;
    curve.points.push_back({thr, static_cast<double>(in) / n_neg,
                            static_cast<double>(pos.size() - ip) / n_pos});
  }
  return curve;
}

double eer(const RocCurve& curve) {
  const auto& pts = curve.points;
  if (pts.empty()) throw Error("empty ROC curve");
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double gap = pts[k].fpr - pts[k].fnr;
    if (gap == 0.0) return pts[k].fpr;
    if (gap > 0.0) {
      if (k == 0) return pts[0].fpr;
      const auto& a = pts[k - 1];
      const auto& b = pts[k];
      const double ga = a.fpr - a.fnr;
      const double s = -ga / (gap - ga);
      return a.fpr + s * (b.fpr - a.fpr);
    }
  }
  return pts.back().fpr;
}

double fpr_at_fnr(const RocCurve& curve, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("FNR level must lie strictly between 0 and 1");
  const auto& pts = curve.points;
  if (pts.empty()) throw Error("empty ROC curve");
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].fnr == level) return pts[k].fpr;
    if (pts[k].fnr < level) {
      if (k == 0) return pts[0].fpr;
      const auto& a = pts[k - 1];
      const auto& b = pts[k];
      const double s = (a.fnr - level) / (a.fnr - b.fnr);
      return a.fpr + s * (b.fpr - a.fpr);
    }
  }
  return pts.back().fpr;
}

EvalReport report_from_distances(std::string method, Index code_length,
                                 std::span<const double> positive,
                                 std::span<const double> negative) {
  EvalReport r;
  r.method = std::move(method);
  r.code_length = code_length;
  r.roc = roc_from_distances(positive, negative);
  r.eer = eer(r.roc);
  r.fpr_at_1pct = fpr_at_fnr(r.roc, 0.01);
  r.fpr_at_0p1pct = fpr_at_fnr(r.roc, 0.001);
  return r;
}

std::vector<BinaryCode> encode_all(const HashModel& model, const DescriptorSet& set) {
  const Matrix signs = sign_codes(model, set);
  std::vector<BinaryCode> codes;
  codes.reserve(static_cast<std::size_t>(set.count()));
  for (Index r = 0; r < signs.rows(); ++r) {
    BinaryCode code(static_cast<std::size_t>(signs.cols()));
    for (Index c = 0; c < signs.cols(); ++c) code.set_bit(static_cast<std::size_t>(c), signs(r, c) > 0.0);
    codes.push_back(std::move(code));
  }
  return codes;
}

namespace {

void check_indices(const PairSet& test, Index count) {
  const auto n = static_cast<std::size_t>(count);
  for (const auto& p : test.positives) {
    if (p.i >= n || p.j >= n) throw Error("test pair index out of range");
  }
  for (const auto& p : test.negatives) {
    if (p.i >= n || p.j >= n) throw Error("test pair index out of range");
  }
}

}  // namespace

EvalReport evaluate_model(const HashModel& model, const DescriptorSet& set, const PairSet& test) {
  check_indices(test, set.count());
  const auto codes = encode_all(model, set);
  std::vector<double> pos;
  std::vector<double> neg;
  pos.reserve(test.positives.size());
  neg.reserve(test.negatives.size());
  for (const auto& p : test.positives) pos.push_back(hamming_distance(codes[p.i], codes[p.j]));
  for (const auto& p : test.negatives) neg.push_back(hamming_distance(codes[p.i], codes[p.j]));
  return report_from_distances(std::string(to_string(model.method)), model.code_length(), pos, neg);
}

EvalReport evaluate_identity(const DescriptorSet& set, const PairSet& test) {
  check_indices(test, set.count());
  auto dist = [&](std::size_t i, std::size_t j) {
    return (set.row(static_cast<Index>(i)) - set.row(static_cast<Index>(j))).norm();
  };
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& p : test.positives) pos.push_back(dist(p.i, p.j));
  for (const auto& p : test.negatives) neg.push_back(dist(p.i, p.j));
  return report_from_distances("identity", 32 * set.dim(), pos, neg);
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,fnr\n";
  for (const auto& p : curve.points) {
    detail::append_double(out, p.threshold);
    out += ',';
    detail::append_double(out, p.fpr);
    out += ',';
    detail::append_double(out, p.fnr);
    out += '\n';
  }
  return out;
}

std::string report_csv(std::span<const EvalReport> reports) {
  std::string out = "method,code_length,eer,fpr_at_1pct,fpr_at_0p1pct\n";
  for (const auto& r : reports) {
    out += r.method + "," + std::to_string(r.code_length) + ",";
    detail::append_double(out, r.eer);
    out += ',';
    detail::append_double(out, r.fpr_at_1pct);
    out += ',';
    detail::append_double(out, r.fpr_at_0p1pct);
    out += '\n';
  }
  return out;
}

std::string matches_csv(std::span<const MatchRecord> matches) {
  std::string out = "query_index,groundtruth_index,matched_index,distance,correct\n";
  for (const auto& m : matches) {
    out += std::to_string(m.query_index) + "," + std::to_string(m.groundtruth_index) + "," +
           std::to_string(m.matched_index) + ",";
    detail::append_double(out, m.distance);
    out += m.correct ? ",1\n" : ",0\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  detail::write_file(path, contents);
}

}  // namespace deschash
