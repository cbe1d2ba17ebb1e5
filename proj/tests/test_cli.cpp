#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "g2s/corpus.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "g2s_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(G2S_CLI_PATH) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string out() { return slurp(kWork / "stdout.txt"); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const auto c = g2s::testing::overfit_corpus(6);
    {
      std::ofstream corpus(kWork / "corpus.jsonl");
      for (const auto& r : c.records)
        corpus << nlohmann::json{{"id", r.id}, {"title", r.title}, {"content", r.content}, {"comments", r.comments}}.dump()
               << "\n";
      std::ofstream lex(kWork / "lexicon.txt");
      for (const auto& t : c.lexicon) lex << t << "\n";
    }
    std::ofstream(kWork / "empty.jsonl").close();
    std::ofstream(kWork / "stop.txt") << "the\n";
    ASSERT_EQ(run("train --corpus " + p("corpus.jsonl") + " --lexicon " + p("lexicon.txt") +
                  " --topk 2 --dim 8 --heads 2 --epochs 2 --batch 4 --seed 5 --out " + p("model")),
              0)
        << slurp(kWork / "stderr.txt");
  }

  static std::string p(const std::string& name) { return (kWork / name).string(); }
  std::string ckpt() const { return p("model/model.ckpt"); }
};

TEST_F(Cli, HelpListsEverySubcommand) {
  EXPECT_EQ(run("--help"), 0);
  for (const char* sub : {"build-graph", "train", "generate", "stats", "grad-check"})
    EXPECT_NE(out().find(sub), std::string::npos) << sub;
  EXPECT_EQ(run("train --help"), 0);
  for (const char* flag : {"--corpus", "--lexicon", "--out", "--epochs", "--batch", "--lr", "--seed", "--no-clip"})
    EXPECT_NE(out().find(flag), std::string::npos) << flag;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("train --corpus x --out y --bogus"), 1);
  EXPECT_EQ(run("build-graph --input " + p("corpus.jsonl") + " --format svg"), 1);
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(run("build-graph --input " + p("missing.jsonl")), 2);
  EXPECT_EQ(run("train --corpus " + p("empty.jsonl") + " --out " + p("never")), 2);
  EXPECT_EQ(run("generate --checkpoint " + p("corpus.jsonl") + " --corpus " + p("corpus.jsonl")), 2);
}

TEST_F(Cli, TrainWritesLogAndCheckpoints) {
  for (const char* f : {"train.log", "epoch-1.ckpt", "epoch-2.ckpt", "model.ckpt"}) EXPECT_TRUE(fs::exists(kWork / "model" / f)) << f;
  std::istringstream log(slurp(kWork / "model/train.log"));
  std::string line;
  std::size_t steps = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.contains("event")) continue;
    ++steps;
    for (const char* k : {"epoch", "step", "loss", "lr"}) EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(steps, 4u);
}

TEST_F(Cli, BuildGraphWritesOneFilePerArticle) {
  ASSERT_EQ(run("build-graph --input " + p("corpus.jsonl") + " --lexicon " + p("lexicon.txt") +
                " --format structured --out " + p("graphs")),
            0);
  EXPECT_EQ(std::distance(fs::directory_iterator(kWork / "graphs"), fs::directory_iterator{}), 6);
  const auto g = nlohmann::json::parse(slurp(kWork / "graphs/doc0.json"));
  EXPECT_EQ(g.at("vertices").at(0).at("kind"), "title");
  ASSERT_EQ(run("build-graph --input " + p("corpus.jsonl") + " --format dot"), 0);
  EXPECT_NE(out().find("graph"), std::string::npos);
}

TEST_F(Cli, GenerateGreedyEqualsBeamOne) {
  ASSERT_EQ(run("generate --checkpoint " + ckpt() + " --corpus " + p("corpus.jsonl") + " --out " + p("g1.jsonl")), 0);
  ASSERT_EQ(run("generate --checkpoint " + ckpt() + " --corpus " + p("corpus.jsonl") + " --beam 1 --out " + p("g2.jsonl")), 0);
  const auto a = slurp(kWork / "g1.jsonl");
  EXPECT_EQ(a, slurp(kWork / "g2.jsonl"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 6);
}

TEST_F(Cli, GenerateEmptyCorpus) {
  ASSERT_EQ(run("generate --checkpoint " + ckpt() + " --corpus " + p("empty.jsonl")), 0);
  EXPECT_TRUE(out().empty());
}

TEST_F(Cli, GenerateRespectsMaxLen) {
  ASSERT_EQ(run("generate --checkpoint " + ckpt() + " --corpus " + p("corpus.jsonl") + " --beam 3 --max-len 1"), 0);
  std::istringstream lines(out());
  std::string line;
  while (std::getline(lines, line)) EXPECT_LE(g2s::tokenize(nlohmann::json::parse(line).at("comment").get<std::string>()).size(), 1u);
}

TEST_F(Cli, StatsReport) {
  std::ofstream(kWork / "gen.jsonl") << R"({"id":"1","comment":"a b","score":0})" "\n" R"({"id":"2","comment":"a c","score":0})" "\n";
  ASSERT_EQ(run("stats --input " + p("gen.jsonl")), 0);
  EXPECT_EQ(nlohmann::json::parse(out()).at("unique_words"), 3);
  std::ofstream(kWork / "gen2.jsonl") << R"({"id":"1","comment":"the","score":0})" "\n" R"({"id":"2","comment":"the","score":0})" "\n";
  ASSERT_EQ(run("stats --input " + p("gen2.jsonl") + " --stopwords " + p("stop.txt")), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j.at("unique_words"), 0);
  EXPECT_EQ(j.at("distinct_ratio"), 0.5);
}

TEST_F(Cli, GradCheckPassesAndCatchesCorruption) {
  EXPECT_EQ(run("grad-check --dim 16 --seed 3"), 0);
  const auto first = out();
  EXPECT_NE(first.find("PASS"), std::string::npos);
  EXPECT_EQ(run("grad-check --dim 16 --seed 3"), 0);
  EXPECT_EQ(out(), first);
  EXPECT_EQ(run("grad-check --dim 16 --seed 3 --corrupt-backward 1.5"), 3);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  std::ofstream(kWork / "run.cfg") << "train.epochs=1\ntrain.batch=6\ntrain.dim=8\ntrain.heads=2\n";
  ASSERT_EQ(run("--config " + p("run.cfg") + " train --corpus " + p("corpus.jsonl") + " --batch 3 --out " + p("cfgrun")), 0);
  EXPECT_TRUE(fs::exists(kWork / "cfgrun/epoch-1.ckpt"));
  EXPECT_FALSE(fs::exists(kWork / "cfgrun/epoch-2.ckpt"));
  const auto log = slurp(kWork / "cfgrun/train.log");
  EXPECT_NE(log.find("\"step\":2"), std::string::npos);  // batch 3 from the flag, not 6
}

TEST_F(Cli, TrainingIsReproducible) {
  const std::string args = "train --corpus " + p("corpus.jsonl") + " --lexicon " + p("lexicon.txt") +
                           " --topk 2 --dim 8 --heads 2 --epochs 2 --batch 4 --seed 5 --out ";
  ASSERT_EQ(run(args + p("again")), 0);
  EXPECT_EQ(slurp(kWork / "again/model.ckpt"), slurp(kWork / "model/model.ckpt"));
  EXPECT_EQ(slurp(kWork / "again/train.log"), slurp(kWork / "model/train.log"));
}

TEST_F(Cli, ResumeFromEpochCheckpoint) {
  ASSERT_EQ(run("train --corpus " + p("corpus.jsonl") + " --epochs 2 --resume " + p("model/epoch-1.ckpt") + " --out " +
                p("resumed")),
            0)
      << slurp(kWork / "stderr.txt");
  EXPECT_EQ(slurp(kWork / "resumed/model.ckpt"), slurp(kWork / "model/model.ckpt"));
}

}  // namespace
