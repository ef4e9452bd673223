#pragma once

// ROC curves, equal error rate and FPR operating points over pair distances.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deschash/descriptor_data.hpp"
#include "deschash/hamming.hpp"
#include "deschash/hash_model.hpp"

namespace deschash {

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

/// Operating points for the rule "accept as positive when distance <= threshold".
/// Thresholds strictly increase, so fpr is non-decreasing and fnr non-increasing along
/// the list. The first point accepts nothing (fpr 0, fnr 1), the last accepts
/// everything (fpr 1, fnr 0).
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Thresholds at every distinct distance plus a sentinel 1 below the smallest.
RocCurve roc_from_distances(std::span<const double> positive, std::span<const double> negative);

/// Rate where fpr = fnr, linearly interpolated between neighbouring points.
double eer(const RocCurve& curve);

/// FPR where fnr = level, linearly interpolated in fnr. Throws unless 0 < level < 1.
double fpr_at_fnr(const RocCurve& curve, double level);

struct EvalReport {
  std::string method;
  Index code_length = 0;
  double eer = 0.0;
  double fpr_at_1pct = 0.0;
  double fpr_at_0p1pct = 0.0;
  RocCurve roc;
};

EvalReport report_from_distances(std::string method, Index code_length,
                                 std::span<const double> positive,
                                 std::span<const double> negative);

std::vector<BinaryCode> encode_all(const HashModel& model, const DescriptorSet& set);

/// Hamming distances of the model's codes over the test pairs.
EvalReport evaluate_model(const HashModel& model, const DescriptorSet& set, const PairSet& test);

/// Raw-descriptor baseline: Euclidean distance, reported as method "identity" with
/// code_length = 32 * dim (float storage).
EvalReport evaluate_identity(const DescriptorSet& set, const PairSet& test);

/// "threshold,fpr,fnr"
std::string roc_csv(const RocCurve& curve);

/// "method,code_length,eer,fpr_at_1pct,fpr_at_0p1pct", one row per report.
std::string report_csv(std::span<const EvalReport> reports);

struct MatchRecord {
  std::size_t query_index = 0;
  std::size_t groundtruth_index = 0;
  std::size_t matched_index = 0;
  double distance = 0.0;
  bool correct = false;
};

/// "query_index,groundtruth_index,matched_index,distance,correct"
std::string matches_csv(std::span<const MatchRecord> matches);

void write_text(const std::filesystem::path& path, const std::string& contents);

}  // namespace deschash
