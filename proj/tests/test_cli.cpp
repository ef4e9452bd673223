#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "deschash/descriptor_data.hpp"
#include "deschash/hamming.hpp"
#include "deschash/hash_model.hpp"
#include "test_util.hpp"

namespace deschash {
namespace {

using testing::TempDir;
using testing::read_file;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = tools::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  CliTest() : dir_("cli") {
    const auto r = cli({"gen", "--dim", "8", "--tracks", "30", "--frames", "16", "--seed", "4",
                        "--test-fraction", "0.5", "--out", path("data")});
    EXPECT_EQ(r.code, 0) << r.err;
  }

  std::string path(const std::string& leaf) const { return (dir_ / leaf).string(); }
  std::string descriptors() const { return path("data/descriptors.txt"); }
  std::string train_tracks() const { return path("data/tracks_train.txt"); }
  std::string test_tracks() const { return path("data/tracks_test.txt"); }

  std::vector<std::string> train_args(const std::string& method, const std::string& out) const {
    return {"train", "--method", method, "--descriptors", descriptors(), "--tracks", train_tracks(),
            "--bits", "8", "--dt-max", "15", "--positives", "200", "--negatives", "1000",
            "--candidates", "10", "--epochs", "10", "--out", path(out)};
  }

  TempDir dir_;
};

TEST_F(CliTest, GenFilesParseBackAndAreDeterministic) {
  const auto set = load_descriptors(descriptors());
  EXPECT_EQ(set.dim(), 8);
  EXPECT_EQ(set.count(), 30 * 16);
  EXPECT_EQ(load_tracks(path("data/tracks.txt")).size(), 30u);
  EXPECT_EQ(load_tracks(train_tracks()).size() + load_tracks(test_tracks()).size(), 30u);

  const auto r = cli({"gen", "--dim", "8", "--tracks", "30", "--frames", "16", "--seed", "4",
                      "--test-fraction", "0.5", "--out", path("again")});
  ASSERT_EQ(r.code, 0);
  for (const char* f : {"descriptors.txt", "tracks.txt", "tracks_train.txt", "tracks_test.txt"}) {
    EXPECT_EQ(read_file(path("data/") + f), read_file(path("again/") + f)) << f;
  }
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"bogus"}).code, 2);
  EXPECT_EQ(cli({"gen", "--dim", "zero"}).code, 2);
  EXPECT_EQ(cli({"gen", "--tracks", "1"}).code, 2);
  EXPECT_EQ(cli({"gen", "--drift", "-1"}).code, 2);
  auto args = train_args("lsh", "m.json");
  EXPECT_EQ(cli(args).code, 2);
  EXPECT_EQ(cli({"train", "--method", "diffhash"}).code, 2);
  EXPECT_EQ(cli({"eval", "--descriptors", descriptors(), "--tracks", test_tracks()}).code, 2);
  EXPECT_EQ(cli({"train", "--method", "diffhash", "--descriptors", path("nope.txt"), "--tracks",
                 train_tracks()})
                .code,
            2);
  const auto help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("compare"), std::string::npos);
}

TEST_F(CliTest, RuntimeFailuresExitWithOne) {
  testing::write_file(path("bad.txt"), "8 2\n1 2 3\n");
  auto args = train_args("diffhash", "m.json");
  args[4] = path("bad.txt");
  const auto r = cli(args);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.txt:2:"), std::string::npos) << r.err;

  // window wider than any track
  ASSERT_EQ(cli(train_args("diffhash", "m.json")).code, 0);
  const auto e = cli({"eval", "--model", path("m.json"), "--descriptors", descriptors(), "--tracks",
                      test_tracks(), "--dt-min", "40", "--dt-max", "50", "--out", path("ev")});
  EXPECT_EQ(e.code, 1);
}

TEST_F(CliTest, TrainEveryMethodProducesLoadableModels) {
  for (const std::string m : {"diffhash", "ldahash", "ssh", "nnhash"}) {
    const auto r = cli(train_args(m, m + ".json"));
    ASSERT_EQ(r.code, 0) << m << ": " << r.err;
    const auto model = load_model(path(m + ".json"));
    EXPECT_EQ(to_string(model.method), m);
    EXPECT_EQ(model.code_length(), 8);
    EXPECT_TRUE(model.norm.has_value());
  }
  const auto log = read_file(path("nnhash.json.log.csv"));
  EXPECT_EQ(log.rfind("epoch,beta,loss\n", 0), 0u);
}

TEST_F(CliTest, NnhashWithoutEpochsEqualsDiffHash) {
  ASSERT_EQ(cli(train_args("diffhash", "d.json")).code, 0);
  auto args = train_args("nnhash", "n.json");
  *(std::find(args.begin(), args.end(), "--epochs") + 1) = "0";
  ASSERT_EQ(cli(args).code, 0);
  const auto d = load_model(path("d.json"));
  const auto n = load_model(path("n.json"));
  EXPECT_EQ(n.projection, d.projection);
  EXPECT_EQ(n.offset, d.offset);
  EXPECT_EQ(n.norm, d.norm);
}

TEST_F(CliTest, EvalWritesReportAndIsDeterministic) {
  ASSERT_EQ(cli(train_args("diffhash", "m.json")).code, 0);
  std::vector<std::string> eval{"eval", "--model", path("m.json"), "--descriptors", descriptors(),
                                "--tracks", test_tracks(), "--dt-min", "2", "--dt-max", "10",
                                "--positives", "200", "--negatives", "1000", "--out", path("e1")};
  ASSERT_EQ(cli(eval).code, 0);
  eval.back() = path("e2");
  ASSERT_EQ(cli(eval).code, 0);
  const auto report = read_file(path("e1/report.csv"));
  EXPECT_EQ(report.rfind("method,code_length,eer,fpr_at_1pct,fpr_at_0p1pct\ndiffhash,8,", 0), 0u);
  EXPECT_EQ(report, read_file(path("e2/report.csv")));
  EXPECT_EQ(read_file(path("e1/roc.csv")), read_file(path("e2/roc.csv")));

  const auto id = cli({"eval", "--identity", "--descriptors", descriptors(), "--tracks", test_tracks(),
                       "--dt-min", "2", "--dt-max", "10", "--out", path("e3")});
  ASSERT_EQ(id.code, 0) << id.err;
  EXPECT_NE(read_file(path("e3/report.csv")).find("identity,"), std::string::npos);
}

TEST_F(CliTest, PairsFileFeedsTraining) {
  ASSERT_EQ(cli({"pairs", "--tracks", train_tracks(), "--dt-max", "15", "--positives", "100",
                 "--negatives", "300", "--out", path("p.txt")})
                .code,
            0);
  const auto pairs = load_pairs(path("p.txt"));
  EXPECT_EQ(pairs.positives.size(), 100u);
  EXPECT_EQ(pairs.negatives.size(), 300u);
  auto args = train_args("diffhash", "m.json");
  args.push_back("--pairs");
  args.push_back(path("p.txt"));
  EXPECT_EQ(cli(args).code, 0);
}

TEST_F(CliTest, EncodeAndMatch) {
  ASSERT_EQ(cli(train_args("diffhash", "m.json")).code, 0);
  ASSERT_EQ(cli({"encode", "--model", path("m.json"), "--descriptors", descriptors(), "--out",
                 path("codes.txt")})
                .code,
            0);
  const auto codes = load_codes(path("codes.txt"));
  EXPECT_EQ(codes.size(), 30u * 16u);
  EXPECT_EQ(codes.front().length(), 8u);

  const auto r = cli({"match", "--model", path("m.json"), "--descriptors", descriptors(), "--tracks",
                      test_tracks(), "--query-frame", "0", "--db-frame", "3", "--out", path("m.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(path("m.csv"));
  EXPECT_EQ(csv.rfind("query_index,groundtruth_index,matched_index,distance,correct\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 15);
  EXPECT_EQ(cli({"match", "--model", path("m.json"), "--descriptors", descriptors(), "--tracks",
                 test_tracks(), "--query-frame", "0", "--db-frame", "99"})
                .code,
            1);
}

TEST_F(CliTest, CompareRowsFollowTheManifest) {
  testing::write_file(path("m.json"), R"({
    "synthetic": {"dim": 8, "tracks": 30, "frames": 16},
    "train_dt": [1, 15], "test_dt": [2, 10],
    "train_positives": 200, "train_negatives": 1000,
    "test_positives": 200, "test_negatives": 1000,
    "methods": ["diffhash", "ssh", "nnhash"], "code_lengths": [4, 8],
    "epochs": 10, "ssh_candidates": 10, "beta_schedules": {"4": "0:1", "8": "0:1,10:3"},
    "out": "cmp", "seed": 2
  })");
  const auto r = cli({"compare", "--manifest", path("m.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = read_file(path("cmp/comparison.csv"));
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1 + 6);
  for (const char* f : {"baseline.csv", "true_costs.csv", "roc_nnhash_8.csv", "model_ssh_4.json",
                        "nnhash_8_log.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(path("cmp/") + f)) << f;
  }

  // rerun is byte-identical; dropping a method drops exactly its rows
  ASSERT_EQ(cli({"compare", "--manifest", path("m.json"), "--out", path("cmp2")}).code, 0);
  EXPECT_EQ(table, read_file(path("cmp2/comparison.csv")));
  auto text = read_file(path("m.json"));
  text.replace(text.find("\"ssh\", "), 7, "");
  testing::write_file(path("m2.json"), text);
  ASSERT_EQ(cli({"compare", "--manifest", path("m2.json"), "--out", path("cmp3")}).code, 0);
  std::string expect;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("ssh,", 0) != 0) expect += line + "\n";
  }
  EXPECT_EQ(read_file(path("cmp3/comparison.csv")), expect);
}

TEST_F(CliTest, CompareNamesTheFailingStage) {
  testing::write_file(path("m.json"), R"({"descriptors": "data/descriptors.txt",
    "tracks": "data/tracks.txt", "test_dt": [40, 50]})");
  const auto r = cli({"compare", "--manifest", path("m.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("stage 'pairs'"), std::string::npos) << r.err;

  testing::write_file(path("m.json"), R"({"methods": ["diffhash"]})");
  EXPECT_EQ(cli({"compare", "--manifest", path("m.json")}).code, 1);
  testing::write_file(path("m.json"), R"({"synthetic": {}, "methods": ["lsh"]})");
  EXPECT_EQ(cli({"compare", "--manifest", path("m.json")}).code, 1);
}

}  // namespace
}  // namespace deschash
