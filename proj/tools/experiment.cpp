#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "deschash/error.hpp"
#include "deschash/linear_hashers.hpp"
#include "deschash/seed.hpp"

namespace deschash::tools {

using nlohmann::json;

void ExperimentManifest::validate() const {
  if (!synthetic && (descriptors.empty() || tracks.empty())) {
    throw Error("manifest needs descriptor and track files or a synthetic section");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("test_fraction must lie strictly between 0 and 1");
  }
  for (const auto& w : {train_dt, test_dt}) {
    if (w.min < 0 || w.min > w.max) throw Error("dt windows must satisfy 0 <= min <= max");
  }
  if (train_positives == 0 || train_negatives == 0 || test_positives == 0 ||
      test_negatives == 0) {
    throw Error("pair counts must be positive");
  }
  if (methods.empty() || code_lengths.empty()) throw Error("manifest lists no methods or bits");
  for (Index b : code_lengths) {
    if (b < 1) throw Error("code lengths must be positive");
  }
  if (!(alpha > 0.0) || !(margin > 0.0) || epochs < 0 || ssh_candidates < 1) {
    throw Error("alpha, margin, epochs or ssh_candidates out of range");
  }
}

BetaSchedule ExperimentManifest::beta_for(Index bits) const {
  const auto it = beta_schedules.find(bits);
  return it != beta_schedules.end() ? it->second : BetaSchedule::constant(1.0);
}

ExperimentManifest ExperimentManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("manifest " + path.string() + " is not valid JSON: " + e.what());
  }

  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  ExperimentManifest m;
  try {
    if (j.contains("descriptors")) m.descriptors = resolve(j["descriptors"].get<std::string>());
    if (j.contains("tracks")) m.tracks = resolve(j["tracks"].get<std::string>());
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      SynthConfig c;
      c.dim = s.value("dim", c.dim);
      c.n_tracks = s.value("tracks", c.n_tracks);
      c.frames_per_track = s.value("frames", c.frames_per_track);
      c.base_spread = s.value("spread", c.base_spread);
      c.drift_rate = s.value("drift", c.drift_rate);
      c.noise_sigma = s.value("noise", c.noise_sigma);
      if (s.contains("seed")) {
        c.seed = s["seed"].get<std::uint64_t>();
        m.synthetic_seed_from_root = false;
      }
      m.synthetic = c;
    }
    m.test_fraction = j.value("test_fraction", m.test_fraction);
    if (j.contains("train_dt")) m.train_dt = {j["train_dt"].at(0), j["train_dt"].at(1)};
    if (j.contains("test_dt")) m.test_dt = {j["test_dt"].at(0), j["test_dt"].at(1)};
    m.train_positives = j.value("train_positives", m.train_positives);
    m.train_negatives = j.value("train_negatives", m.train_negatives);
    m.test_positives = j.value("test_positives", m.test_positives);
    m.test_negatives = j.value("test_negatives", m.test_negatives);
    if (j.contains("methods")) {
      m.methods.clear();
      for (const auto& name : j["methods"]) m.methods.push_back(parse_method(name.get<std::string>()));
    }
    if (j.contains("code_lengths")) m.code_lengths = j["code_lengths"].get<std::vector<Index>>();
    m.alpha = j.value("alpha", m.alpha);
    m.margin = j.value("margin", m.margin);
    m.epochs = j.value("epochs", m.epochs);
    if (j.contains("beta_schedules")) {
      m.beta_schedules.clear();
      for (const auto& [bits, sched] : j["beta_schedules"].items()) {
        m.beta_schedules.emplace(std::stoll(bits), BetaSchedule::parse(sched.get<std::string>()));
      }
    }
    m.ssh_candidates = j.value("ssh_candidates", m.ssh_candidates);
    if (j.contains("out")) m.out = resolve(j["out"].get<std::string>());
    m.seed = j.value("seed", m.seed);
  } catch (const json::exception& e) {
    throw Error("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

namespace {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error("stage '" + name + "' failed: " + e.what());
  }
}

std::uint64_t pair_key(std::size_t i, std::size_t j) {
  return (static_cast<std::uint64_t>(std::min(i, j)) << 32) ^ std::max(i, j);
}

void check_disjoint(const PairSet& train, const PairSet& test) {
  std::unordered_set<std::uint64_t> keys;
  for (const auto& p : train.positives) keys.insert(pair_key(p.i, p.j));
  for (const auto& p : train.negatives) keys.insert(pair_key(p.i, p.j));
  for (const auto& p : test.positives) {
    if (keys.count(pair_key(p.i, p.j))) throw Error("train and test pair sets intersect");
  }
  for (const auto& p : test.negatives) {
    if (keys.count(pair_key(p.i, p.j))) throw Error("train and test pair sets intersect");
  }
}

std::vector<std::size_t> descriptors_of(const TrackSet& tracks) {
  std::vector<std::size_t> out;
  for (const auto& t : tracks.tracks()) {
    for (const auto& e : t) out.push_back(e.descriptor);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string key(Method method, Index bits) {
  return std::string(to_string(method)) + "_" + std::to_string(bits);
}

}  // namespace

ExperimentData prepare_experiment(const ExperimentManifest& manifest) {
  manifest.validate();
  const std::uint64_t root = manifest.seed;

  auto loaded = stage("load", [&] {
    if (manifest.synthetic) {
      SynthConfig cfg = *manifest.synthetic;
      if (manifest.synthetic_seed_from_root) cfg.seed = root;
      auto d = generate(cfg);
      return std::pair{std::move(d.descriptors), std::move(d.tracks)};
    }
    return std::pair{load_descriptors(manifest.descriptors), load_tracks(manifest.tracks)};
  });
  const DescriptorSet& raw = loaded.first;
  const TrackSet& tracks = loaded.second;
  tracks.check_against(static_cast<std::size_t>(raw.count()));

  ExperimentData data;
  stage("split", [&] {
    std::vector<std::size_t> ids(tracks.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    Rng rng = make_rng(root, "split");
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::lround(manifest.test_fraction * static_cast<double>(ids.size())));
    if (n_test < 2 || ids.size() - n_test < 2) {
      throw Error("each split needs at least two tracks");
    }
    std::vector<std::size_t> test_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
    std::sort(test_ids.begin(), test_ids.end());
    std::sort(train_ids.begin(), train_ids.end());
    data.train_tracks = tracks.subset(train_ids);
    data.test_tracks = tracks.subset(test_ids);
  });

  stage("normalize", [&] {
    const auto train_rows = descriptors_of(data.train_tracks);
    const auto params = fit_normalization(raw.subset(train_rows));
    data.descriptors = apply_normalization(raw, params);
  });

  stage("pairs", [&] {
    data.train_pairs.positives =
        build_positive_pairs(data.train_tracks, manifest.train_dt.min, manifest.train_dt.max,
                             manifest.train_positives, derive_seed(root, "train-positives"));
    data.train_pairs.negatives = sample_negative_pairs(
        data.train_tracks, manifest.train_negatives, derive_seed(root, "train-negatives"));
    data.test_pairs.positives =
        build_positive_pairs(data.test_tracks, manifest.test_dt.min, manifest.test_dt.max,
                             manifest.test_positives, derive_seed(root, "test-positives"));
    data.test_pairs.negatives = sample_negative_pairs(
        data.test_tracks, manifest.test_negatives, derive_seed(root, "test-negatives"));
    check_disjoint(data.train_pairs, data.test_pairs);
  });
  return data;
}

HashModel train_method(Method method, Index bits, const ExperimentData& data,
                       const ExperimentManifest& manifest, TrainingLog* log) {
  const std::uint64_t seed = derive_seed(manifest.seed, "train-" + key(method, bits));
  if (method == Method::nnhash) {
    SiameseConfig cfg;
    cfg.margin = manifest.margin;
    cfg.beta_schedule = manifest.beta_for(bits);
    cfg.epochs = manifest.epochs;
    cfg.code_length = bits;
    cfg.seed = seed;
    cfg.alpha = manifest.alpha;
    auto result = train_nnhash(data.descriptors, data.train_pairs, cfg);
    if (log) *log = std::move(result.log);
    return std::move(result.model);
  }
  TrainConfig cfg;
  cfg.alpha = manifest.alpha;
  cfg.code_length = bits;
  cfg.seed = seed;
  cfg.candidates_per_round = manifest.ssh_candidates;
  switch (method) {
    case Method::diffhash: return train_diffhash(data.descriptors, data.train_pairs, cfg);
    case Method::ldahash: return train_ldahash(data.descriptors, data.train_pairs, cfg);
    case Method::ssh: return train_ssh(data.descriptors, data.train_pairs, cfg).model;
    case Method::nnhash: break;
  }
  throw Error("unreachable method");
}

CompareResult run_compare(const ExperimentManifest& manifest) {
  const ExperimentData data = prepare_experiment(manifest);
  const bool write = !manifest.out.empty();
  if (write) std::filesystem::create_directories(manifest.out);

  CompareResult result;
  result.baseline = stage("baseline", [&] { return evaluate_identity(data.descriptors, data.test_pairs); });

  for (Method method : manifest.methods) {
    for (Index bits : manifest.code_lengths) {
      const std::string k = key(method, bits);
      TrainingLog log;
      const HashModel model = stage("train " + k, [&] {
        return train_method(method, bits, data, manifest, method == Method::nnhash ? &log : nullptr);
      });
      EvalReport report = stage("evaluate " + k, [&] {
        return evaluate_model(model, data.descriptors, data.test_pairs);
      });
      const double cost = stage("true cost " + k, [&] {
        return true_cost(model, data.train_pairs, data.descriptors, 1.0, CostVariant::distance);
      });
      result.true_costs.push_back({std::string(to_string(method)), bits, cost});

      if (write) {
        stage("write " + k, [&] {
          save_model(manifest.out / ("model_" + k + ".json"), model);
          write_text(manifest.out / ("roc_" + k + ".csv"), roc_csv(report.roc));
          if (method == Method::nnhash) {
            log.write_csv(manifest.out / ("nnhash_" + std::to_string(bits) + "_log.csv"));
          }
        });
      }
      if (method == Method::nnhash) result.logs.emplace(k, std::move(log));
      result.models.emplace(k, model);
      result.reports.push_back(std::move(report));
    }
  }

  if (write) {
    stage("write tables", [&] {
      write_text(manifest.out / "comparison.csv", report_csv(result.reports));
      const EvalReport baseline[] = {result.baseline};
      write_text(manifest.out / "baseline.csv", report_csv(baseline));
      write_text(manifest.out / "roc_identity.csv", roc_csv(result.baseline.roc));
      write_text(manifest.out / "true_costs.csv", true_cost_csv(result.true_costs));
    });
  }
  return result;
}

std::string true_cost_csv(const std::vector<TrueCostRow>& rows) {
  std::string out = "method,code_length,true_cost_distance\n";
  for (const auto& r : rows) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r.cost);
    out += r.method + "," + std::to_string(r.code_length) + "," + std::string(buf, ptr) + "\n";
  }
  return out;
}

}  // namespace deschash::tools
