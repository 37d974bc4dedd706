#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dnagen/cli/cli.hpp"
#include "dnagen/seqdata/datasets.hpp"

namespace fs = std::filesystem;
using namespace dnagen;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dnagen_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  std::string train_small_gan(const std::string& out_dir) {
    const auto cfg = write("gan.ini",
                           "seed = 3\n[data]\nsource = motif\nmotif = TAGCAT\ncount = 100\nlength = 12\n"
                           "[model]\nlatent_dim = 8\nchannels = 4\nresblocks = 1\n"
                           "[train]\nbatch = 8\nsteps = 4\nsnapshot_every = 2\nsnapshot_samples = 16\n");
    EXPECT_EQ(run({"train-gan", "--config", cfg, "--out", path(out_dir)}), cli::kExitOk) << err_.str();
    return path(out_dir);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, MissingKeyNamesItAndExitsWithConfigCode) {
  const auto cfg = write("bad.ini", "[data]\nsource = fasta\n");
  EXPECT_EQ(run({"train-gan", "--config", cfg, "--out", path("r")}), cli::kExitConfig);
  EXPECT_NE(err_.str().find("[data] path"), std::string::npos) << err_.str();
}

TEST_F(CliTest, UnknownKeyAndSectionAreRejected) {
  EXPECT_EQ(run({"train-gan", "--config", write("a.ini", "[train]\nfoo = 1\n"), "--out", path("r")}),
            cli::kExitConfig);
  EXPECT_NE(err_.str().find("foo"), std::string::npos);
  EXPECT_EQ(run({"train-gan", "--config", write("b.ini", "[bogus]\nx = 1\n"), "--out", path("r")}),
            cli::kExitConfig);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);
}

TEST_F(CliTest, MissingConfigOrCheckpointExitsWithConfigCode) {
  EXPECT_EQ(run({"train-gan", "--config", path("nope.ini"), "--out", path("r")}), cli::kExitConfig);
  const auto cfg = write("e.ini", "[eval]\ngenerator = " + path("missing.ck") + "\nsteps = 3\n");
  EXPECT_EQ(run({"eval", "interpolate", "--config", cfg, "--out", path("r2")}), cli::kExitConfig);
  EXPECT_NE(run({"no-such-command"}), cli::kExitOk);
}

TEST_F(CliTest, TrainGanWritesArtifactsAndIsDeterministic) {
  const auto a = train_small_gan("a");
  for (const char* f : {"gan.ck", "metrics.tsv", "train.txt", "config.ini"}) EXPECT_TRUE(fs::exists(fs::path(a) / f)) << f;
  EXPECT_NE(out_.str().find("step 4"), std::string::npos);
  const auto b = train_small_gan("b");
  EXPECT_EQ(slurp(fs::path(a) / "gan.ck"), slurp(fs::path(b) / "gan.ck"));
  EXPECT_EQ(slurp(fs::path(a) / "metrics.tsv"), slurp(fs::path(b) / "metrics.tsv"));
  const auto resolved = slurp(fs::path(a) / "config.ini");
  EXPECT_NE(resolved.find("critic_steps"), std::string::npos);
  EXPECT_NE(resolved.find("seed"), std::string::npos);
  EXPECT_EQ(run({"train-gan", "--config", path("gan.ini"), "--seed", "4", "--out", path("c")}), cli::kExitOk);
  EXPECT_NE(slurp(fs::path(a) / "gan.ck"), slurp(path("c") + "/gan.ck"));
}

TEST_F(CliTest, TrainPredictorReportsSpearmanAndAppliesPercentile) {
  const auto cfg = write("p.ini",
                         "seed = 5\n[data]\nsource = oracle\ncount = 300\nlength = 16\n"
                         "[model]\npred_filters = 4\npred_hidden = 8\npred_filter_length = 5\n[train]\nepochs = 2\n");
  ASSERT_EQ(run({"train-predictor", "--config", cfg, "--out", path("full")}), cli::kExitOk) << err_.str();
  for (const char* f : {"predictor.ck", "metrics.tsv", "data.tsv", "oracle.json"})
    EXPECT_TRUE(fs::exists(path("full") + "/" + f)) << f;
  const auto header = lines(path("full") + "/metrics.tsv").front();
  EXPECT_NE(header.find("spearman"), std::string::npos) << header;

  ASSERT_EQ(run({"train-predictor", "--config", cfg, "--percentile", "40", "--out", path("low")}), cli::kExitOk)
      << err_.str();
  const auto full = seq::ScoredDataset::load_tsv(path("full") + "/data.tsv");
  const auto low = seq::ScoredDataset::load_tsv(path("low") + "/data.tsv");
  std::vector<double> sorted = full.scores;
  std::sort(sorted.begin(), sorted.end());
  const double cut = sorted[static_cast<std::size_t>(std::ceil(0.4 * 300)) - 1];
  std::size_t expect = 0;
  for (double s : full.scores) expect += s <= cut ? 1 : 0;
  EXPECT_EQ(low.size(), expect);
  for (double s : low.scores) EXPECT_LE(s, cut);
}

TEST_F(CliTest, EvalInterpolateDistancesAndLogos) {
  const auto g = train_small_gan("g");
  const auto ck = g + "/gan.ck";
  ASSERT_EQ(run({"eval", "interpolate", "--config", write("i.ini", "[eval]\ngenerator = " + ck + "\nsteps = 2\n"),
                 "--out", path("i")}),
            cli::kExitOk)
      << err_.str();
  EXPECT_EQ(lines(path("i") + "/interpolation.tsv").size(), 3u);

  const auto train = g + "/train.txt";
  ASSERT_EQ(run({"eval", "distances", "--config",
                 write("d.ini", "[eval]\nqueries = " + train + "\nreference = " + train + "\ninclude_self = true\n"),
                 "--out", path("d")}),
            cli::kExitOk)
      << err_.str();
  const auto d = lines(path("d") + "/distances.tsv");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[1], "0\t100\tqueries");

  write("one.txt", "GATTACAGATTA\n");
  ASSERT_EQ(run({"eval", "logos", "--config", write("l.ini", "[eval]\ninput = " + path("one.txt") + "\n"), "--out",
                 path("l")}),
            cli::kExitOk)
      << err_.str();
  const auto l = lines(path("l") + "/logo.tsv");
  ASSERT_EQ(l.size(), 13u);
  for (std::size_t i = 1; i < l.size(); ++i) EXPECT_EQ(std::stod(l[i].substr(l[i].rfind('\t') + 1)), 2.0);
}

TEST_F(CliTest, DirectDesignWritesTables) {
  ASSERT_EQ(run({"make-oracle", "--config", write("o.ini", "seed = 2\n[data]\nlength = 12\n"), "--out", path("o")}),
            cli::kExitOk)
      << err_.str();
  const auto oracle = path("o") + "/oracle.json";
  const auto cfg = write("des.ini", "seed = 1\n[design]\nterms = oracle:" + oracle +
                                        "*1.0, channel:A*-0.1\nlength = 12\nrestarts = 3\nmax_steps = 20\n"
                                        "score_oracle = " + oracle + "\n");
  ASSERT_EQ(run({"design", "--config", cfg, "--out", path("des")}), cli::kExitOk) << err_.str();
  for (const char* f : {"design.tsv", "summary.tsv", "trajectories.tsv", "scatter.tsv"})
    EXPECT_TRUE(fs::exists(path("des") + "/" + f)) << f;
  EXPECT_EQ(lines(path("des") + "/design.tsv").size(), 4u);
  EXPECT_EQ(lines(path("des") + "/trajectories.tsv").size(), 61u);
}
