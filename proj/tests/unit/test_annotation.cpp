#include <gtest/gtest.h>

#include <thread>

#include "conex/annotation.hpp"
#include "conex/annotation_http.hpp"
#include "support/helpers.hpp"

using namespace conex;
using testing_support::TempDir;

namespace {

std::vector<AnnotationTask> fixture_tasks(std::size_t n) {
  std::vector<AnnotationTask> out;
  for (std::size_t k = 0; k < n; ++k) {
    AnnotationTask t;
    char id[16];
    std::snprintf(id, sizeof(id), "t%05zu", k + 1);
    t.task_id = id;
    t.entity_id = "e" + std::to_string(k);
    t.entity_name = "Entity" + std::to_string(k);
    t.abstract_text = t.entity_name + " is a railway station .";
    t.token_start = 3;
    t.token_end = 4;
    t.surface = "railway station";
    t.confidence = 0.5 + 0.01 * double(k);
    t.features = FeatureVector::from_array({t.confidence, 0.4, 0.45, double(k % 2), 0});
    out.push_back(t);
  }
  return out;
}

AnnotationStore::Clock fixed_clock() {
  return [] { return std::string("2026-01-01T00:00:00Z"); };
}

std::size_t csv_rows(const std::string& csv) {
  return static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
}

}  // namespace

TEST(Store, SubmitUpdatesProgressAndExports) {
  TempDir dir;
  auto store = AnnotationStore::open(dir.file("log.jsonl"), fixture_tasks(12), fixed_clock());
  for (int k = 1; k <= 10; ++k) {
    char id[16];
    std::snprintf(id, sizeof(id), "t%05d", k);
    store.submit(id, k % 3 == 0 ? "incorrect" : "correct", "ann");
  }
  const auto p = store.progress();
  EXPECT_EQ(p.total, 12u);
  EXPECT_EQ(p.labeled, 10u);
  EXPECT_EQ(p.incorrect, 3u);
  EXPECT_EQ(p.pending(), 2u);
  const auto csv = store.export_selector_csv();
  EXPECT_EQ(csv_rows(csv), 10u);
  std::istringstream in(csv);
  const auto rows = read_labeled_csv(in);
  for (const auto& r : rows) {
    const int k = std::stoi(r.provenance.substr(1));
    EXPECT_EQ(r.label, k % 3 == 0 ? Label::kDrop : Label::kKeep) << r.provenance;
  }
  EXPECT_EQ(csv_rows(store.export_judgments_csv()), 10u);
}

TEST(Store, ResubmitOverwritesAndLogKeepsBoth) {
  TempDir dir;
  auto store = AnnotationStore::open(dir.file("log.jsonl"), fixture_tasks(2), fixed_clock());
  store.submit("t00001", "correct", std::nullopt);
  store.submit("t00001", "incorrect", std::nullopt);
  EXPECT_EQ(store.get("t00001").verdict, Verdict::kIncorrect);
  EXPECT_EQ(store.progress().labeled, 1u);
  EXPECT_EQ(store.log_events(), 3u);
}

TEST(Store, RestartPreservesLabels) {
  TempDir dir;
  {
    auto store = AnnotationStore::open(dir.file("log.jsonl"), fixture_tasks(8), fixed_clock());
    for (const auto& id : {"t00001", "t00002", "t00003", "t00004", "t00005"}) store.submit(id, "correct", "a");
  }
  auto again = AnnotationStore::open(dir.file("log.jsonl"), fixture_tasks(3), fixed_clock());
  EXPECT_EQ(again.progress().total, 8u);
  EXPECT_EQ(again.progress().labeled, 5u);
  EXPECT_EQ(AnnotationStore::replay_only(dir.file("log.jsonl")).progress().labeled, 5u);
  EXPECT_THROW(AnnotationStore::replay_only(dir.file("absent.jsonl")), Error);
}

TEST(Store, ListFiltersAndErrors) {
  TempDir dir;
  auto store = AnnotationStore::open(dir.file("log.jsonl"), fixture_tasks(5), fixed_clock());
  store.submit("t00002", "correct", std::nullopt);
  EXPECT_EQ(store.list(TaskStatus::kPending, 100).size(), 4u);
  EXPECT_EQ(store.list(TaskStatus::kLabeled, 100).size(), 1u);
  EXPECT_EQ(store.list(std::nullopt, 3).size(), 3u);
  try {
    store.get("t99999");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
  }
  EXPECT_THROW(store.submit("t00001", "maybe", std::nullopt), Error);
}

TEST(Task, JsonRoundTrip) {
  auto t = fixture_tasks(1)[0];
  t.status = TaskStatus::kLabeled;
  t.verdict = Verdict::kCorrect;
  t.annotator = "a";
  t.timestamp = "2026-01-01T00:00:00Z";
  const auto back = AnnotationTask::from_json(t.to_json());
  EXPECT_EQ(back.to_json(), t.to_json());
}

TEST(Sampling, DeterministicAndBoundedWithCharOffsets) {
  const auto r = testing_support::word_record("e", "Kyoto", "Kyoto is a historic city");
  RecordCandidates rc{"e", {{3, 4, 0.9, "historic city", 0.45, 0.45}, {4, 4, 0.88, "city", 0.43, 0.45}}};
  const KgStore kg;
  const ConceptIndex idx(kg, LanguageMode::kWord);
  const auto a = sample_tasks({r}, {rc}, idx, 5, 3);
  ASSERT_EQ(a.size(), 2u);
  const auto b = sample_tasks({r}, {rc}, idx, 5, 3);
  EXPECT_EQ(a[0].to_json(), b[0].to_json());
  for (const auto& t : a) {
    EXPECT_EQ(r.abstract_text.substr(t.char_begin, t.char_end - t.char_begin), t.surface);
  }
  EXPECT_EQ(sample_tasks({r}, {rc}, idx, 1, 3).size(), 1u);
}

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    store_.emplace(AnnotationStore::open(dir_.file("log.jsonl"), fixture_tasks(12), fixed_clock()));
    mount_annotation_api(server_, *store_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  TempDir dir_;
  std::optional<AnnotationStore> store_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpApi, TaskListingAndDetail) {
  auto c = client();
  auto res = c.Get("/api/tasks");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto body = Json::parse(res->body);
  EXPECT_EQ(body["schema_version"], kAnnotationSchemaVersion);
  EXPECT_EQ(body["tasks"].size(), 12u);
  res = c.Get("/api/tasks?limit=3&status=all");
  EXPECT_EQ(Json::parse(res->body)["tasks"].size(), 3u);
  res = c.Get("/api/tasks?limit=abc");
  EXPECT_EQ(res->status, 400);
  res = c.Get("/api/tasks/t00004");
  EXPECT_EQ(Json::parse(res->body)["task"]["task_id"], "t00004");
  res = c.Get("/api/tasks/t77777");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(Json::parse(res->body)["error"]["kind"], "not_found");
}

TEST_F(HttpApi, VerdictsProgressAndExport) {
  auto c = client();
  for (int k = 1; k <= 10; ++k) {
    char path[48];
    std::snprintf(path, sizeof(path), "/api/tasks/t%05d/verdict", k);
    const Json body{{"verdict", k % 2 ? "correct" : "incorrect"}, {"annotator", "ui"}};
    auto res = c.Post(path, body.dump(), "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
  }
  auto res = c.Get("/api/progress");
  const auto prog = Json::parse(res->body)["progress"];
  EXPECT_EQ(prog["labeled"], 10);
  EXPECT_EQ(prog["pending"], 2);
  res = c.Get("/api/tasks?status=labeled&limit=100");
  EXPECT_EQ(Json::parse(res->body)["tasks"].size(), 10u);

  res = c.Post("/api/export", R"({"kind": "selector"})", "application/json");
  const auto exp = Json::parse(res->body);
  EXPECT_EQ(exp["rows"], 10);
  std::istringstream in(exp["csv"].get<std::string>());
  const auto rows = read_labeled_csv(in);
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) {
    const int k = std::stoi(r.provenance.substr(1));
    EXPECT_EQ(r.label, k % 2 ? Label::kKeep : Label::kDrop);
  }
  res = c.Post("/api/export", R"({"kind": "other"})", "application/json");
  EXPECT_EQ(res->status, 400);

  // A fresh store over the same log sees all ten labels.
  EXPECT_EQ(AnnotationStore::replay_only(dir_.file("log.jsonl")).progress().labeled, 10u);
}

TEST_F(HttpApi, VerdictErrors) {
  auto c = client();
  auto res = c.Post("/api/tasks/t99999/verdict", R"({"verdict": "maybe"})", "application/json");
  EXPECT_EQ(res->status, 404);
  res = c.Post("/api/tasks/t00001/verdict", R"({"verdict": "maybe"})", "application/json");
  EXPECT_EQ(res->status, 400);
  res = c.Post("/api/tasks/t00001/verdict", "not json", "application/json");
  EXPECT_EQ(res->status, 400);
  res = c.Post("/api/tasks/t00001/verdict", R"({"note": 1})", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(store_->progress().labeled, 0u);
}

TEST(Port, EnvironmentOverride) {
  ::setenv("CONEX_PORT", "9123", 1);
  EXPECT_EQ(annotation_port_from_env(), 9123);
  ::unsetenv("CONEX_PORT");
  EXPECT_EQ(annotation_port_from_env(), 8080);
}
