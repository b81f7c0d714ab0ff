#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <thread>

#include "conex/annotation_http.hpp"
#include "support/cli.hpp"

using namespace testing_support;
using conex::Json;

namespace {

Json error_of(const CliResult& r) { return Json::parse(r.err)["error"]; }

/// A small trained head shared by the decode tests.
class TrainedHead : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const auto c = data_file("synthetic_pipeline.json");
    const auto d = dir_->path().string();
    auto ok = [](const CliResult& r) { ASSERT_EQ(r.exit_code, 0) << r.err; };
    ok(run_cli({"gen-synthetic", "--config", c, "--out-dir", d, "--entities", "60"}, *dir_));
    ok(run_cli({"build-dataset", "--config", c, "--corpus", d + "/corpus.jsonl", "--kg", d + "/kg.tsv", "--out-dir", d},
               *dir_));
    ok(run_cli({"train-head", "--config", c, "--dataset", d + "/dataset.jsonl", "--split", d + "/split.json", "--out",
                d + "/head.json", "--epochs", "2"},
               *dir_));
  }
  static void TearDownTestSuite() { delete dir_; }
  static TempDir* dir_;
};

TempDir* TrainedHead::dir_ = nullptr;

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof(addr);
  int port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0 &&
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
    port = ntohs(addr.sin_port);
  }
  ::close(fd);
  return port;
}

}  // namespace

TEST(Cli, UsageErrors) {
  TempDir t;
  EXPECT_EQ(run_cli({}, t).exit_code, 2);
  EXPECT_EQ(run_cli({"no-such-command"}, t).exit_code, 2);
  EXPECT_EQ(run_cli({"decode", "--bogus"}, t).exit_code, 2);
  EXPECT_EQ(run_cli({"--help"}, t).exit_code, 0);
}

TEST(Cli, MissingInputIsStructured) {
  TempDir t;
  const auto r = run_cli({"decode", "--dataset", t.file("absent.jsonl"), "--head", t.file("absent.json"), "--out",
                          t.file("out.jsonl")},
                         t);
  EXPECT_EQ(r.exit_code, 3);
  const auto e = error_of(r);
  EXPECT_EQ(e["kind"], "missing_input");
  EXPECT_EQ(e["exit_code"], 3);
  EXPECT_FALSE(e["message"].get<std::string>().empty());
}

TEST(Cli, MalformedCorpusIsSchemaError) {
  TempDir t;
  spit(t.file("corpus.jsonl"), "{\"entity_id\": 3}\n");
  spit(t.file("kg.tsv"), "e\tc\n");
  const auto r = run_cli({"build-dataset", "--corpus", t.file("corpus.jsonl"), "--kg", t.file("kg.tsv"), "--out-dir",
                          t.file("o")},
                         t);
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
}

TEST(Cli, SeedConflictWithManifest) {
  TempDir t;
  const auto c = data_file("synthetic_pipeline.json");
  const auto d = t.path().string();
  ASSERT_EQ(run_cli({"gen-synthetic", "--config", c, "--out-dir", d, "--entities", "60"}, t).exit_code, 0);
  ASSERT_EQ(run_cli({"build-dataset", "--config", c, "--corpus", d + "/corpus.jsonl", "--kg", d + "/kg.tsv",
                     "--out-dir", d},
                    t)
                .exit_code,
            0);
  const auto r = run_cli({"build-dataset", "--config", c, "--seed", "99", "--corpus", d + "/corpus.jsonl", "--kg",
                          d + "/kg.tsv", "--manifest", d + "/split.json", "--out-dir", d + "/again"},
                         t);
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_EQ(error_of(r)["kind"], "seed_conflict");
  EXPECT_EQ(run_cli({"build-dataset", "--config", c, "--corpus", d + "/corpus.jsonl", "--kg", d + "/kg.tsv",
                     "--manifest", d + "/split.json", "--out-dir", d + "/again"},
                    t)
                .exit_code,
            0);
  EXPECT_EQ(slurp(d + "/split.json"), slurp(d + "/again/split.json"));
}

TEST_F(TrainedHead, ThresholdTwoWritesNoCandidates) {
  TempDir t;
  spit(t.file("one.jsonl"),
       R"({"entity_id": "e1", "name": "Kyoto", "abstract": "Kyoto is a historic city .", "language_mode": "word"})"
       "\n");
  const auto r = run_cli({"decode", "--dataset", t.file("one.jsonl"), "--head", dir_->file("head.json"), "--threshold",
                          "2.0", "--out", t.file("cands.jsonl")},
                         t);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::ifstream in(t.file("cands.jsonl"));
  std::size_t spans = 0;
  for (const auto& rc : conex::read_candidates(in)) spans += rc.spans.size();
  EXPECT_EQ(spans, 0u);
}

TEST_F(TrainedHead, InvalidThresholdRejected) {
  TempDir t;
  const auto r = run_cli({"decode", "--dataset", dir_->file("dataset.jsonl"), "--head", dir_->file("head.json"),
                          "--threshold", "-1", "--out", t.file("c.jsonl")},
                         t);
  EXPECT_EQ(r.exit_code, 6);
}

TEST(Cli, MissingJudgmentNamesPair) {
  TempDir t;
  spit(t.file("kg.tsv"), "e1\tcity\n");
  spit(t.file("sys.jsonl"), R"({"entity_id": "e1", "concepts": ["city", "old harbour"], "system_id": "s"})"
                            "\n");
  spit(t.file("judg.csv"), "entity_id,concept,verdict\n");
  const auto r = run_cli({"evaluate", "--system", t.file("sys.jsonl"), "--kg", t.file("kg.tsv"), "--judgments",
                          t.file("judg.csv")},
                         t);
  EXPECT_EQ(r.exit_code, 9);
  const auto msg = error_of(r)["message"].get<std::string>();
  EXPECT_NE(msg.find("e1"), std::string::npos);
  EXPECT_NE(msg.find("old harbour"), std::string::npos);

  spit(t.file("judg.csv"), "entity_id,concept,verdict\ne1,old harbour,correct\n");
  const auto ok = run_cli({"evaluate", "--system", t.file("sys.jsonl"), "--kg", t.file("kg.tsv"), "--judgments",
                           t.file("judg.csv"), "--out", t.file("report.json")},
                          t);
  ASSERT_EQ(ok.exit_code, 0) << ok.err;
  const auto report = Json::parse(slurp(t.file("report.json")));
  EXPECT_EQ(report["systems"][0]["nc_count"], 1);
  EXPECT_EQ(report["systems"][0]["ec_count"], 1);
}

TEST(Cli, DegenerateLabelsExitCode) {
  TempDir t;
  spit(t.file("labels.csv"), "A,B,C,D,E,label,provenance\n0.9,0.4,0.5,1,0,keep,a\n0.8,0.4,0.5,1,0,keep,b\n");
  spit(t.file("cands.jsonl"), R"({"entity_id":"e","spans":[]})"
                              "\n");
  spit(t.file("kg.tsv"), "e\tc\n");
  const auto r = run_cli({"select", "--labels", t.file("labels.csv"), "--candidates", t.file("cands.jsonl"), "--kg",
                          t.file("kg.tsv"), "--out", t.file("sel.jsonl")},
                         t);
  EXPECT_EQ(r.exit_code, 8);
}

TEST(Cli, BatchCompleteEmitsOnlyNewPairs) {
  TempDir t;
  const auto d = t.file("run");
  const auto run = run_synthetic_pipeline(d, t);
  ASSERT_TRUE(run.ok) << run.failure;
  const auto r = run_cli({"batch-complete", "--config", data_file("synthetic_pipeline.json"), "--dataset",
                          d + "/dataset.jsonl", "--kg", d + "/kg.tsv", "--head", d + "/head.json", "--forest",
                          d + "/forest.json", "--out", t.file("new_pairs.tsv")},
                         t);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::ifstream kg_in(d + "/kg.tsv");
  const conex::ConceptIndex kg(conex::load_kg_dump(kg_in, conex::KgFormat::kTsv), conex::LanguageMode::kWord);
  std::ifstream in(t.file("new_pairs.tsv"));
  std::string line;
  std::size_t pairs = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos);
    EXPECT_FALSE(kg.entity_has(line.substr(0, tab), line.substr(tab + 1))) << line;
    ++pairs;
  }
  EXPECT_GT(pairs, 0u);
  EXPECT_EQ(Json::parse(r.out)["new_relations"], pairs);
}

TEST(Cli, ServeAnswersAndReplaysLog) {
  TempDir t;
  const auto d = t.file("run");
  ASSERT_TRUE(run_synthetic_pipeline(d, t).ok);
  const int port = free_port();
  ASSERT_GT(port, 0);
  const std::string cmd = shell_quote(CONEX_CLI) + " serve --dataset " + shell_quote(d + "/dataset.jsonl") +
                          " --candidates " + shell_quote(d + "/test_candidates.jsonl") + " --kg " +
                          shell_quote(d + "/kg.tsv") + " --log " + shell_quote(t.file("log.jsonl")) +
                          " --sample 15 --port " + std::to_string(port) + " >/dev/null 2>" + shell_quote(t.file("serve.err")) +
                          " & echo $! > " + shell_quote(t.file("pid"));
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  httplib::Result res;
  for (int k = 0; k < 100 && !res; ++k) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    res = httplib::Client("127.0.0.1", port).Get("/api/progress");
  }
  httplib::Client c("127.0.0.1", port);
  ASSERT_TRUE(res) << slurp(t.file("serve.err"));
  EXPECT_EQ(Json::parse(res->body)["progress"]["total"], 15);
  const auto listed = c.Get("/api/tasks?limit=2");
  ASSERT_TRUE(listed) << httplib::to_string(listed.error());
  const auto tasks = Json::parse(listed->body)["tasks"];
  ASSERT_EQ(tasks.size(), 2u);
  const auto id = tasks[0]["task_id"].get<std::string>();
  const auto posted = c.Post("/api/tasks/" + id + "/verdict", R"({"verdict": "correct"})", "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  const std::string pid = slurp(t.file("pid"));
  ASSERT_EQ(std::system(("kill " + pid.substr(0, pid.find('\n')) + "; sleep 0.2").c_str()), 0);
  EXPECT_EQ(conex::AnnotationStore::replay_only(t.file("log.jsonl")).progress().labeled, 1u);
}
