#include "deschash/hash_model.hpp"

#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "deschash/error.hpp"
#include "text_io.hpp"

namespace deschash {

using nlohmann::json;

std::string_view to_string(Method method) {
  switch (method) {
    case Method::diffhash: return "diffhash";
    case Method::ldahash: return "ldahash";
    case Method::ssh: return "ssh";
    case Method::nnhash: return "nnhash";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::diffhash, Method::ldahash, Method::ssh, Method::nnhash}) {
    if (to_string(m) == name) return m;
  }
  throw Error("unknown method \"" + std::string(name) + "\"");
}

void HashModel::validate() const {
  if (projection.rows() < 1 || projection.cols() < 1) throw Error("model projection is empty");
  if (offset.size() != projection.rows()) {
    throw Error("model offset length does not match the code length");
  }
  if (!projection.allFinite() || !offset.allFinite()) throw Error("model has non-finite entries");
  if (beta && !(*beta > 0.0)) throw Error("model beta must be positive");
  if (norm && norm->dim() != projection.cols()) {
    throw Error("model normalization does not match its dimension");
  }
}

SignVector encode(const HashModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim()) {
    throw Error("descriptor has dimension " + std::to_string(x.size()) + ", model expects " +
                std::to_string(model.dim()));
  }
  const Vector z = model.projection * x + model.offset;
  SignVector out(static_cast<std::size_t>(z.size()));
  for (Index k = 0; k < z.size(); ++k) out[static_cast<std::size_t>(k)] = z(k) >= 0.0 ? 1 : -1;
  return out;
}

namespace {

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j, Index expected, const char* field) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Index>(values.size()) != expected) {
    throw Error(std::string("model field \"") + field + "\" has the wrong length");
  }
  return Eigen::Map<const Vector>(values.data(), expected);
}

}  // namespace

std::string model_to_json(const HashModel& model) {
  model.validate();
  json j;
  j["method"] = std::string(to_string(model.method));
  j["dim"] = model.dim();
  j["code_length"] = model.code_length();
  j["beta"] = model.beta ? json(*model.beta) : json("hard");
  std::vector<double> rows;
  rows.reserve(static_cast<std::size_t>(model.projection.size()));
  for (Index r = 0; r < model.code_length(); ++r) {
    for (Index c = 0; c < model.dim(); ++c) rows.push_back(model.projection(r, c));
  }
  j["projection"] = rows;
  j["offset"] = vector_json(model.offset);
  if (model.norm) {
    j["norm_params"] = {{"offset", vector_json(model.norm->offset)},
                        {"scale", vector_json(model.norm->scale)}};
  } else {
    j["norm_params"] = nullptr;
  }
  return j.dump(1) + "\n";
}

HashModel model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    HashModel model;
    model.method = parse_method(j.at("method").get<std::string>());
    const Index dim = j.at("dim").get<Index>();
    const Index bits = j.at("code_length").get<Index>();
    if (dim < 1 || bits < 1) throw Error("model dim and code_length must be positive");
    const auto& beta = j.at("beta");
    if (beta.is_number()) {
      model.beta = beta.get<double>();
    } else if (!(beta.is_string() && beta.get<std::string>() == "hard")) {
      throw Error("model beta must be a number or \"hard\"");
    }
    const Vector flat = vector_from(j.at("projection"), dim * bits, "projection");
    model.projection = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                      Eigen::RowMajor>>(flat.data(), bits, dim);
    model.offset = vector_from(j.at("offset"), bits, "offset");
    const auto& norm = j.at("norm_params");
    if (!norm.is_null()) {
      model.norm = Normalization{vector_from(norm.at("offset"), dim, "norm_params.offset"),
                                 vector_from(norm.at("scale"), dim, "norm_params.scale")};
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const HashModel& model) {
  detail::write_file(path, model_to_json(model));
}

HashModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return model_from_json(text);
}

}  // namespace deschash
