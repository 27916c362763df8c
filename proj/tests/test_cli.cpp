#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "mentra/cli.hpp"

using namespace mentra;
namespace fs = std::filesystem;

namespace {

const std::string kGolden = MENTRA_GOLDEN_DIR;
const std::string kData = MENTRA_TEST_DATA_DIR;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
  std::vector<nlohmann::json> lines() const {
    std::vector<nlohmann::json> v;
    std::istringstream in(out);
    std::string l;
    while (std::getline(in, l))
      if (!l.empty()) v.push_back(nlohmann::json::parse(l));
    return v;
  }
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mentra");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mentra-cli-" + name + "-" + std::to_string(std::random_device{}()));
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Cli, ValidateGoldenCorpus) {
  const auto r = run({"validate", kGolden});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = r.lines();
  EXPECT_EQ(lines.size(), 8u);
  for (const auto& j : lines) {
    EXPECT_TRUE(j["format_valid"].get<bool>()) << j.dump();
    EXPECT_TRUE(j["length_valid"].get<bool>()) << j.dump();
  }
}

TEST(Cli, ValidateInvalidCorpusStrict) {
  const auto dir = kData + "/invalid";
  EXPECT_EQ(run({"validate", dir}).code, 0);
  const auto r = run({"validate", "--strict", dir});
  EXPECT_EQ(r.code, 1);
  for (const auto& j : r.lines()) {
    EXPECT_FALSE(j["format_valid"].get<bool>());
    EXPECT_FALSE(j["violations"].empty());
  }
  const auto t = run({"--format", "table", "validate", dir});
  EXPECT_NE(t.out.find("MissingThinkBlock"), std::string::npos);
}

TEST(Cli, ValidateGeneratorReportedCount) {
  const auto r = run({"validate", "--token-count", "5000", kGolden + "/single_choice_basic.txt"});
  ASSERT_EQ(r.code, 0);
  const auto j = r.lines().at(0);
  EXPECT_TRUE(j["format_valid"].get<bool>());
  EXPECT_FALSE(j["length_valid"].get<bool>());
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"validate"}).code, 2);
  EXPECT_EQ(run({"--format", "xml", "validate", kGolden}).code, 2);
  EXPECT_EQ(run({"eval", "--dataset", "/nonexistent"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const auto r = run({"validate", "/nonexistent/file.txt"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("IoError"), std::string::npos);
  EXPECT_EQ(run({"agreement", kData + "/rubric_rater1.jsonl"}).code, 1);
}

TEST(Cli, ScoreResponses) {
  const auto r = run({"score", "--dataset", kData + "/tasks.jsonl", "--responses", kData + "/responses.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, nlohmann::json> by_id;
  for (const auto& j : r.lines()) by_id[j["id"]] = j;
  ASSERT_EQ(by_id.size(), 4u);
  EXPECT_EQ(by_id["sc-1"]["reward"], 1.0);
  EXPECT_EQ(by_id["sc-2"]["reward"], 0.0);
  EXPECT_EQ(by_id["sc-2"]["quality"], 0.0);
  EXPECT_EQ(by_id["sc-3"]["format_gate"], 0);
  EXPECT_TRUE(by_id["sc-3"]["length_gate"].is_null());
  EXPECT_GT(by_id["mc-1"]["reward"].get<double>(), 0.0);
}

TEST(Cli, ScoreWithSeededJudgeIsDeterministic) {
  const std::vector<std::string> args = {"score",  "--dataset", kData + "/tasks.jsonl", "--responses",
                                         kData + "/responses.jsonl", "--judge", "seeded", "--judge-p", "0.5",
                                         "--seed", "3"};
  const auto a = run(args), b = run(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, RtgOffline) {
  const auto r = run({"rtg", "--dataset", kData + "/tasks.jsonl", "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = r.lines();
  ASSERT_EQ(lines.size(), 6u);
  for (const auto& j : lines) {
    EXPECT_LE(j["generator_calls"].get<int>(), 9);
    if (j["status"] == "accepted") {
      EXPECT_TRUE(validate_text(j["text"].get<std::string>(), {}).format_valid);
    }
  }
  const auto filtered = run({"rtg", "--dataset", kData + "/tasks.jsonl", "--filter", "--solver-accuracy", "1"});
  EXPECT_EQ(filtered.code, 0);
  EXPECT_TRUE(filtered.lines().empty());
}

TEST(Cli, TrainToyIsReproducibleAndResumes) {
  const auto d1 = fresh_dir("a"), d2 = fresh_dir("b");
  const auto a = run({"train-toy", "--steps", "60", "--seed", "5", "--log-every", "20", "--out", d1.string()});
  const auto b = run({"train-toy", "--steps", "60", "--seed", "5", "--log-every", "20", "--out", d2.string()});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto lines = a.lines();
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_TRUE(lines.back()["final"].get<bool>());
  EXPECT_EQ(lines.back()["step"], 60);
  EXPECT_EQ(lines.back()["checkpoints"], 7);
  EXPECT_EQ(read_train_log(d1 / "train_log.jsonl").size(), 60u);

  const auto resumed = run({"train-toy", "--steps", "60", "--seed", "5", "--log-every", "20", "--out", d2.string(),
                            "--resume", checkpoint_path(d2, 30).string()});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  auto tail = resumed.lines().back();
  EXPECT_EQ(tail["checkpoints"], 3);
  for (const char* k : {"step", "total_loss", "mean_reward"}) EXPECT_EQ(tail[k], lines.back()[k]) << k;
  EXPECT_EQ(read_train_log(d2 / "train_log.jsonl"), read_train_log(d1 / "train_log.jsonl"));

  const auto rep = run({"report", (d1 / "train_log.jsonl").string(), "--every", "10"});
  ASSERT_EQ(rep.code, 0);
  const auto series = rep.lines().at(0);
  EXPECT_EQ(series["step"].size(), 6u);
  const auto csv = run({"--format", "csv", "report", (d1 / "train_log.jsonl").string(), "--every", "30"});
  EXPECT_EQ(csv.out.substr(0, csv.out.find('\n')), "step,mu,sft_loss,grpo_loss,total_loss,mean_reward");
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Cli, EvalFixture) {
  const auto r = run({"eval", "--dataset", kData + "/tasks.jsonl", "--predictions", kData + "/predictions.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, double> values;
  for (const auto& j : r.lines()) values[j["metric"]] = j["value"];
  EXPECT_NEAR(values.at("micro_f1"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(values.at("jaccard"), 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(values.at("point_recall"), 2.0 / 3.0, 1e-12);
}

TEST(Cli, AgreementFixture) {
  const auto r = run({"agreement", kData + "/rubric_rater1.jsonl", kData + "/rubric_rater2.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = r.lines();
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0]["dimension"], "R1");
  EXPECT_NEAR(lines[0]["percent"].get<double>(), 10.0 / 12.0, 1e-12);
  EXPECT_EQ(lines[5]["dimension"], "R_avg");
  const auto t = run({"--format", "table", "agreement", kData + "/rubric_rater1.jsonl", kData + "/rubric_rater2.jsonl"});
  EXPECT_NE(t.out.find("Gwet AC1"), std::string::npos);
  EXPECT_NE(t.out.find("Cohen's Kappa"), std::string::npos);
}

TEST(Cli, LiveModeWithoutCredentialFails) {
  ::unsetenv("MENTRA_API_KEY");
  const auto r = run({"--live", "score", "--dataset", kData + "/tasks.jsonl", "--responses", kData + "/responses.jsonl"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("MENTRA_API_KEY"), std::string::npos);
}
