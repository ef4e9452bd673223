#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "deschash/error.hpp"
#include "deschash/eval.hpp"
#include "deschash/hamming.hpp"
#include "deschash/linear_hashers.hpp"
#include "deschash/nnhash.hpp"
#include "deschash/seed.hpp"
#include "deschash/synthgen.hpp"
#include "experiment.hpp"

namespace deschash::tools {

namespace {

namespace fs = std::filesystem;

struct UsageError : Error {
  using Error::Error;
};

struct SynthArgs {
  SynthConfig cfg;
  std::uint64_t seed = 1;
  double test_fraction = 0.0;
  std::string out = ".";
};

void add_synth_flags(CLI::App* cmd, SynthArgs& a) {
  cmd->add_option("--dim", a.cfg.dim, "descriptor dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--tracks", a.cfg.n_tracks, "number of tracks")->check(CLI::Range(2, 1 << 24));
  cmd->add_option("--frames", a.cfg.frames_per_track, "frames per track")->check(CLI::PositiveNumber);
  cmd->add_option("--spread", a.cfg.base_spread, "base descriptor spread")->check(CLI::NonNegativeNumber);
  cmd->add_option("--drift", a.cfg.drift_rate, "distortion growth per frame")->check(CLI::NonNegativeNumber);
  cmd->add_option("--noise", a.cfg.noise_sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", a.seed, "root seed");
  cmd->add_option("--out", a.out, "output directory");
}

struct PairArgs {
  std::int64_t dt_min = 1;
  std::int64_t dt_max = 60;
  std::size_t positives = 1000;
  std::size_t negatives = 10000;
  std::uint64_t seed = 1;
};

void add_pair_flags(CLI::App* cmd, PairArgs& a) {
  cmd->add_option("--dt-min", a.dt_min, "smallest frame gap of positive pairs")->capture_default_str();
  cmd->add_option("--dt-max", a.dt_max, "largest frame gap of positive pairs")->capture_default_str();
  cmd->add_option("--positives", a.positives, "positive pair count")->capture_default_str();
  cmd->add_option("--negatives", a.negatives, "negative pair count")->capture_default_str();
  cmd->add_option("--seed", a.seed, "root seed")->capture_default_str();
}

PairSet build_pairs(const TrackSet& tracks, const PairArgs& a, std::string_view prefix) {
  if (a.dt_min > a.dt_max) throw UsageError("--dt-min must not exceed --dt-max");
  PairSet pairs;
  pairs.positives = build_positive_pairs(tracks, a.dt_min, a.dt_max, a.positives,
                                         derive_seed(a.seed, std::string(prefix) + "-positives"));
  pairs.negatives = sample_negative_pairs(tracks, a.negatives,
                                          derive_seed(a.seed, std::string(prefix) + "-negatives"));
  return pairs;
}

std::vector<std::size_t> referenced(const TrackSet& tracks) {
  std::vector<std::size_t> out;
  for (const auto& t : tracks.tracks()) {
    for (const auto& e : t) out.push_back(e.descriptor);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Applies the model's training normalization, if it has one.
DescriptorSet prepare_for(const HashModel& model, const DescriptorSet& raw) {
  return model.norm ? apply_normalization(raw, *model.norm) : raw;
}

void write_split(const SynthDataset& data, const SynthArgs& a, const fs::path& dir) {
  std::vector<std::size_t> ids(data.tracks.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng = make_rng(a.seed, "split");
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_test = static_cast<std::size_t>(a.test_fraction * static_cast<double>(ids.size()) + 0.5);
  std::vector<std::size_t> test(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  save_tracks(dir / "tracks_train.txt", data.tracks.subset(train));
  save_tracks(dir / "tracks_test.txt", data.tracks.subset(test));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn and evaluate similarity-preserving binary hashes of feature descriptors",
               "deschash"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help of every subcommand");

  // gen ---------------------------------------------------------------------
  SynthArgs gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate a synthetic descriptor/track dataset");
  add_synth_flags(cmd_gen, gen);
  cmd_gen->add_option("--test-fraction", gen.test_fraction,
                      "also write tracks_train.txt / tracks_test.txt with this test share")
      ->check(CLI::Range(0.0, 1.0));

  // sweep -------------------------------------------------------------------
  SynthArgs sweep;
  std::vector<double> drifts;
  auto* cmd_sweep = app.add_subcommand("sweep", "generate one dataset per drift value");
  add_synth_flags(cmd_sweep, sweep);
  cmd_sweep->add_option("--drifts", drifts, "drift values")->required()->delimiter(',');

  // pairs -------------------------------------------------------------------
  PairArgs pair_args;
  std::string pairs_tracks;
  std::string pairs_out = "pairs.txt";
  auto* cmd_pairs = app.add_subcommand("pairs", "build positive/negative pairs from tracks");
  cmd_pairs->add_option("--tracks", pairs_tracks, "track file")->required()->check(CLI::ExistingFile);
  add_pair_flags(cmd_pairs, pair_args);
  cmd_pairs->add_option("--out", pairs_out, "pair file to write");

  // train -------------------------------------------------------------------
  std::string method_name;
  std::string train_desc, train_tracks, train_pairs_file, train_out = "model.json", train_log;
  PairArgs train_pairs;
  Index bits = 32;
  double alpha = 1.0;
  double margin = 5.0;
  std::string beta_schedule = "0:1";
  int epochs = 50;
  int candidates = 100;
  std::string init = "diffhash";
  std::optional<double> ridge;
  auto* cmd_train = app.add_subcommand("train", "train a hash model");
  cmd_train->add_option("--method", method_name, "diffhash|ldahash|ssh|nnhash")
      ->required()
      ->check(CLI::IsMember({"diffhash", "ldahash", "ssh", "nnhash"}));
  cmd_train->add_option("--descriptors", train_desc, "descriptor file")->required()->check(CLI::ExistingFile);
  cmd_train->add_option("--tracks", train_tracks, "training track file")->required()->check(CLI::ExistingFile);
  cmd_train->add_option("--pairs", train_pairs_file, "use this pair file instead of sampling")
      ->check(CLI::ExistingFile);
  add_pair_flags(cmd_train, train_pairs);
  cmd_train->add_option("--bits", bits, "code length")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--alpha", alpha, "FPR/FNR tradeoff")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--margin", margin, "NNhash margin")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--beta-schedule", beta_schedule, "NNhash steepness, \"e0:b0,e1:b1\"")
      ->capture_default_str();
  cmd_train->add_option("--epochs", epochs, "NNhash epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_train->add_option("--candidates", candidates, "SSH directions per round")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_train->add_option("--init", init, "NNhash start")->check(CLI::IsMember({"diffhash", "random"}));
  cmd_train->add_option("--ridge", ridge, "LDAHash ridge")->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--out", train_out, "model file to write")->capture_default_str();
  cmd_train->add_option("--log", train_log, "NNhash epoch log (default <out>.log.csv)");

  // eval --------------------------------------------------------------------
  std::string eval_model, eval_desc, eval_tracks, eval_pairs_file, eval_out = ".";
  bool eval_identity = false;
  PairArgs eval_pairs;
  eval_pairs.dt_min = 10;
  eval_pairs.dt_max = 30;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a model on test pairs");
  auto* opt_model = cmd_eval->add_option("--model", eval_model, "model file")->check(CLI::ExistingFile);
  auto* opt_identity =
      cmd_eval->add_flag("--identity", eval_identity, "evaluate raw descriptors under Euclidean distance");
  opt_model->excludes(opt_identity);
  cmd_eval->add_option("--descriptors", eval_desc, "descriptor file")->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--tracks", eval_tracks, "test track file")->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--pairs", eval_pairs_file, "use this pair file instead of sampling")
      ->check(CLI::ExistingFile);
  add_pair_flags(cmd_eval, eval_pairs);
  cmd_eval->add_option("--out", eval_out, "output directory for report.csv and roc.csv");

  // encode ------------------------------------------------------------------
  std::string enc_model, enc_desc, enc_out = "codes.txt";
  auto* cmd_encode = app.add_subcommand("encode", "write binary codes of every descriptor");
  cmd_encode->add_option("--model", enc_model, "model file")->required()->check(CLI::ExistingFile);
  cmd_encode->add_option("--descriptors", enc_desc, "descriptor file")->required()->check(CLI::ExistingFile);
  cmd_encode->add_option("--out", enc_out, "code file to write");

  // match -------------------------------------------------------------------
  std::string match_model, match_desc, match_tracks, match_out = "matches.csv";
  std::int64_t query_frame = 0;
  std::int64_t db_frame = 0;
  auto* cmd_match = app.add_subcommand("match", "1-nearest Hamming matching between two frames");
  cmd_match->add_option("--model", match_model, "model file")->required()->check(CLI::ExistingFile);
  cmd_match->add_option("--descriptors", match_desc, "descriptor file")->required()->check(CLI::ExistingFile);
  cmd_match->add_option("--tracks", match_tracks, "track file")->required()->check(CLI::ExistingFile);
  cmd_match->add_option("--query-frame", query_frame, "frame of the queries")->required();
  cmd_match->add_option("--db-frame", db_frame, "frame of the database")->required();
  cmd_match->add_option("--out", match_out, "match list to write");

  // compare -----------------------------------------------------------------
  std::string manifest_path, compare_out;
  std::optional<std::uint64_t> compare_seed;
  auto* cmd_compare = app.add_subcommand("compare", "train and evaluate every method of a manifest");
  cmd_compare->add_option("--manifest", manifest_path, "experiment manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_compare->add_option("--out", compare_out, "override the manifest output directory");
  cmd_compare->add_option("--seed", compare_seed, "override the manifest seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*cmd_gen) {
      gen.cfg.seed = gen.seed;
      const auto data = generate(gen.cfg);
      const fs::path dir(gen.out);
      fs::create_directories(dir);
      save_descriptors(dir / "descriptors.txt", data.descriptors);
      save_tracks(dir / "tracks.txt", data.tracks);
      if (gen.test_fraction > 0.0) write_split(data, gen, dir);
      out << "wrote " << data.descriptors.count() << " descriptors of dim " << data.descriptors.dim()
          << " in " << data.tracks.size() << " tracks to " << dir.string() << "\n";
    } else if (*cmd_sweep) {
      sweep.cfg.seed = sweep.seed;
      const auto entries = difficulty_sweep(sweep.cfg, drifts);
      const fs::path dir(sweep.out);
      fs::create_directories(dir);
      std::string csv = "drift,mean_within_track_distance\n";
      for (std::size_t k = 0; k < entries.size(); ++k) {
        const fs::path sub = dir / ("drift_" + std::to_string(k));
        fs::create_directories(sub);
        save_descriptors(sub / "descriptors.txt", entries[k].data.descriptors);
        save_tracks(sub / "tracks.txt", entries[k].data.tracks);
        std::ostringstream row;
        row.precision(17);
        row << entries[k].drift_rate << "," << mean_within_track_distance(entries[k].data) << "\n";
        csv += row.str();
      }
      write_text(dir / "sweep.csv", csv);
      out << "wrote " << entries.size() << " datasets to " << dir.string() << "\n";
    } else if (*cmd_pairs) {
      const auto tracks = load_tracks(pairs_tracks);
      const auto pairs = build_pairs(tracks, pair_args, "pairs");
      save_pairs(pairs_out, pairs);
      out << "wrote " << pairs.positives.size() << " positives and " << pairs.negatives.size()
          << " negatives to " << pairs_out << "\n";
    } else if (*cmd_train) {
      const Method method = parse_method(method_name);
      const auto raw = load_descriptors(train_desc);
      const auto tracks = load_tracks(train_tracks);
      tracks.check_against(static_cast<std::size_t>(raw.count()));
      const auto params = fit_normalization(raw.subset(referenced(tracks)));
      const auto set = apply_normalization(raw, params);
      const PairSet pairs =
          train_pairs_file.empty() ? build_pairs(tracks, train_pairs, "train") : load_pairs(train_pairs_file);
      check_pairs(pairs, tracks, static_cast<std::size_t>(set.count()));

      const std::uint64_t seed = derive_seed(train_pairs.seed, "train-" + method_name);
      HashModel model;
      if (method == Method::nnhash) {
        SiameseConfig cfg;
        cfg.margin = margin;
        cfg.beta_schedule = BetaSchedule::parse(beta_schedule);
        cfg.epochs = epochs;
        cfg.code_length = bits;
        cfg.seed = seed;
        cfg.alpha = alpha;
        cfg.init = init == "random" ? SiameseInit::random : SiameseInit::diffhash;
        auto result = train_nnhash(set, pairs, cfg);
        const std::string log_path = train_log.empty() ? train_out + ".log.csv" : train_log;
        result.log.write_csv(log_path);
        model = std::move(result.model);
        out << "nnhash: loss " << result.log.initial_loss << " -> "
            << (result.log.epochs.empty() ? result.log.initial_loss : result.log.epochs.back().loss)
            << " over " << epochs << " epochs; log " << log_path << "\n";
      } else {
        TrainConfig cfg;
        cfg.alpha = alpha;
        cfg.code_length = bits;
        cfg.seed = seed;
        cfg.candidates_per_round = candidates;
        cfg.ridge = ridge;
        if (method == Method::diffhash) {
          model = train_diffhash(set, pairs, cfg);
        } else if (method == Method::ldahash) {
          model = train_ldahash(set, pairs, cfg);
        } else {
          auto result = train_ssh(set, pairs, cfg);
          if (result.truncated) {
            err << "warning: SSH stopped after " << result.round_errors.size()
                << " rounds (weighted error reached 0.5)\n";
          }
          model = std::move(result.model);
        }
      }
      save_model(train_out, model);
      out << "wrote " << to_string(method) << " model with " << model.code_length() << " bits to "
          << train_out << "\n";
    } else if (*cmd_eval) {
      if (eval_model.empty() && !eval_identity) throw UsageError("eval needs --model or --identity");
      const auto raw = load_descriptors(eval_desc);
      const auto tracks = load_tracks(eval_tracks);
      tracks.check_against(static_cast<std::size_t>(raw.count()));
      const PairSet pairs =
          eval_pairs_file.empty() ? build_pairs(tracks, eval_pairs, "test") : load_pairs(eval_pairs_file);
      check_pairs(pairs, tracks, static_cast<std::size_t>(raw.count()));
      EvalReport report;
      if (eval_identity) {
        report = evaluate_identity(raw, pairs);
      } else {
        const auto model = load_model(eval_model);
        report = evaluate_model(model, prepare_for(model, raw), pairs);
      }
      const fs::path dir(eval_out);
      fs::create_directories(dir);
      const EvalReport reports[] = {report};
      write_text(dir / "report.csv", report_csv(reports));
      write_text(dir / "roc.csv", roc_csv(report.roc));
      out << report.method << " " << report.code_length << " bits: EER " << report.eer
          << ", FPR@1% " << report.fpr_at_1pct << ", FPR@0.1% " << report.fpr_at_0p1pct << "\n";
    } else if (*cmd_encode) {
      const auto model = load_model(enc_model);
      const auto codes = encode_all(model, prepare_for(model, load_descriptors(enc_desc)));
      save_codes(enc_out, codes);
      out << "wrote " << codes.size() << " codes to " << enc_out << "\n";
    } else if (*cmd_match) {
      const auto model = load_model(match_model);
      const auto raw = load_descriptors(match_desc);
      const auto tracks = load_tracks(match_tracks);
      tracks.check_against(static_cast<std::size_t>(raw.count()));
      const auto codes = encode_all(model, prepare_for(model, raw));

      auto at_frame = [](const Track& t, std::int64_t f) -> std::optional<std::size_t> {
        for (const auto& e : t) {
          if (e.frame == f) return e.descriptor;
        }
        return std::nullopt;
      };
      std::vector<std::size_t> query_ids, truth_ids, db_ids;
      std::vector<std::optional<std::size_t>> db_of_track;
      for (const auto& t : tracks.tracks()) {
        const auto d = at_frame(t, db_frame);
        if (d) db_ids.push_back(*d);
        const auto q = at_frame(t, query_frame);
        if (q && d) {
          query_ids.push_back(*q);
          truth_ids.push_back(*d);
        }
      }
      if (query_ids.empty()) throw Error("no track is observed at both frames");
      std::vector<BinaryCode> queries, database;
      for (auto q : query_ids) queries.push_back(codes[q]);
      for (auto d : db_ids) database.push_back(codes[d]);
      const auto nearest = match_nearest(queries, database, 1);
      std::vector<MatchRecord> records;
      std::size_t correct = 0;
      for (std::size_t k = 0; k < query_ids.size(); ++k) {
        const auto& m = nearest[k].front();
        const std::size_t matched = db_ids[m.index];
        records.push_back({query_ids[k], truth_ids[k], matched, static_cast<double>(m.distance),
                           matched == truth_ids[k]});
        correct += matched == truth_ids[k];
      }
      write_text(match_out, matches_csv(records));
      out << correct << "/" << records.size() << " correct 1-nearest matches; wrote " << match_out
          << "\n";
    } else if (*cmd_compare) {
      auto manifest = ExperimentManifest::load(manifest_path);
      if (!compare_out.empty()) manifest.out = compare_out;
      if (compare_seed) manifest.seed = *compare_seed;
      const auto result = run_compare(manifest);
      out << "method      bits      EER    FPR@1%  FPR@0.1%  true_cost_d\n";
      auto row = [&](const EvalReport& r, const char* cost) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-10s %5lld  %7.2f%%  %7.2f%%  %7.2f%%  %s\n", r.method.c_str(),
                      static_cast<long long>(r.code_length), 100 * r.eer, 100 * r.fpr_at_1pct,
                      100 * r.fpr_at_0p1pct, cost);
        out << buf;
      };
      row(result.baseline, "-");
      for (std::size_t k = 0; k < result.reports.size(); ++k) {
        row(result.reports[k], std::to_string(result.true_costs[k].cost).c_str());
      }
      if (!manifest.out.empty()) out << "results in " << manifest.out.string() << "\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace deschash::tools
