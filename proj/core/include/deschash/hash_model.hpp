#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deschash/descriptor_data.hpp"

namespace deschash {

enum class Method { diffhash, ldahash, ssh, nnhash };

std::string_view to_string(Method method);
/// Throws on unknown names.
Method parse_method(std::string_view name);

/// Entries are exactly -1 or +1.
using SignVector = std::vector<std::int8_t>;

/// Affine embedding `y = sign(P x + t)`.
struct HashModel {
  Method method = Method::diffhash;
  Matrix projection;                  ///< code_length x dim
  Vector offset;                      ///< code_length
  std::optional<double> beta;         ///< tanh steepness; empty for hard-sign models
  std::optional<Normalization> norm;  ///< normalization of the training descriptors

  Index code_length() const { return projection.rows(); }
  Index dim() const { return projection.cols(); }

  /// Throws on shape mismatch or non-finite entries.
  void validate() const;
};

/// Component-wise sign of `P x + t`; exact zeros map to +1.
SignVector encode(const HashModel& model, const Eigen::Ref<const Vector>& x);

std::string model_to_json(const HashModel& model);
HashModel model_from_json(std::string_view text);
void save_model(const std::filesystem::path& path, const HashModel& model);
HashModel load_model(const std::filesystem::path& path);

}  // namespace deschash
