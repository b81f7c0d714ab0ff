#pragma once

// Annotation tasks over sampled candidates. State lives in an append-only
// JSONL log: one "tasks" event followed by "verdict" events. Replaying the
// log reproduces the store exactly.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/csv.hpp"
#include "conex/error.hpp"
#include "conex/evaluator.hpp"
#include "conex/rng.hpp"
#include "conex/selector.hpp"
#include "conex/span_decoder.hpp"

namespace conex {

enum class TaskStatus { kPending, kLabeled };

inline std::string_view status_name(TaskStatus s) {
  return s == TaskStatus::kPending ? "pending" : "labeled";
}

inline TaskStatus parse_status(std::string_view s) {
  if (s == "pending") return TaskStatus::kPending;
  if (s == "labeled") return TaskStatus::kLabeled;
  throw Error(ErrorKind::kInvalidArgument, "status must be pending or labeled, got '" + std::string(s) + "'");
}

struct AnnotationTask {
  std::string task_id;
  std::string entity_id;
  std::string entity_name;
  std::string abstract_text;
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::size_t char_begin = 0;  // code points, half-open
  std::size_t char_end = 0;
  std::string surface;
  double confidence = 0.0;
  FeatureVector features;
  TaskStatus status = TaskStatus::kPending;
  std::optional<Verdict> verdict;
  std::optional<std::string> annotator;
  std::optional<std::string> timestamp;

  Json to_json() const {
    Json j{{"task_id", task_id},
           {"entity_id", entity_id},
           {"entity_name", entity_name},
           {"abstract", abstract_text},
           {"span",
            {{"i", token_start},
             {"j", token_end},
             {"char_begin", char_begin},
             {"char_end", char_end},
             {"surface", surface},
             {"cs", confidence}}},
           {"features",
            {{"A", features.confidence},
             {"B", features.start_prob},
             {"C", features.end_prob},
             {"D", features.in_kg},
             {"E", features.contains_other}}},
           {"status", status_name(status)},
           {"verdict", nullptr},
           {"annotator", nullptr},
           {"timestamp", nullptr}};
    if (verdict) j["verdict"] = verdict_name(*verdict);
    if (annotator) j["annotator"] = *annotator;
    if (timestamp) j["timestamp"] = *timestamp;
    return j;
  }

  static AnnotationTask from_json(const Json& j) {
    AnnotationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.entity_id = j.at("entity_id").get<std::string>();
    t.entity_name = j.value("entity_name", std::string());
    t.abstract_text = j.at("abstract").get<std::string>();
    const Json& s = j.at("span");
    t.token_start = s.at("i").get<std::size_t>();
    t.token_end = s.at("j").get<std::size_t>();
    t.char_begin = s.at("char_begin").get<std::size_t>();
    t.char_end = s.at("char_end").get<std::size_t>();
    t.surface = s.at("surface").get<std::string>();
    t.confidence = s.at("cs").get<double>();
    const Json& f = j.at("features");
    t.features = FeatureVector::from_array({f.at("A").get<double>(), f.at("B").get<double>(),
                                            f.at("C").get<double>(), f.at("D").get<double>(),
                                            f.at("E").get<double>()});
    t.status = parse_status(j.value("status", std::string("pending")));
    if (j.contains("verdict") && !j.at("verdict").is_null()) t.verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (j.contains("annotator") && !j.at("annotator").is_null()) t.annotator = j.at("annotator").get<std::string>();
    if (j.contains("timestamp") && !j.at("timestamp").is_null()) t.timestamp = j.at("timestamp").get<std::string>();
    if (t.status == TaskStatus::kLabeled && !t.verdict) {
      throw Error(ErrorKind::kSchema, "task '" + t.task_id + "' is labeled without a verdict");
    }
    return t;
  }
};

/// Uniformly samples up to `count` candidates with `seed` and builds tasks
/// in sampled order. Records missing from `records` are an error.
inline std::vector<AnnotationTask> sample_tasks(const std::vector<EntityRecord>& records,
                                                const std::vector<RecordCandidates>& candidates,
                                                const ConceptIndex& kg, std::size_t count,
                                                std::uint64_t seed) {
  std::map<std::string, const EntityRecord*> by_id;
  for (const auto& r : records) by_id[r.entity_id] = &r;
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    for (std::size_t s = 0; s < candidates[r].spans.size(); ++s) pool.emplace_back(r, s);
  }
  Rng rng(seed);
  rng.shuffle(pool);
  if (pool.size() > count) pool.resize(count);

  std::vector<AnnotationTask> out;
  for (const auto& [r, s] : pool) {
    const auto& rc = candidates[r];
    auto it = by_id.find(rc.entity_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kMissingInput, "candidate entity '" + rc.entity_id + "' is not in the corpus");
    }
    const EntityRecord& rec = *it->second;
    const CandidateSpan& span = rc.spans[s];
    if (span.end >= rec.tokens.size()) {
      throw Error(ErrorKind::kSchema, "span (" + std::to_string(span.start) + "," + std::to_string(span.end) +
                                          ") exceeds the tokens of '" + rc.entity_id + "'");
    }
    const auto offsets = token_offsets(rec.abstract_text, rec.tokens);
    AnnotationTask t;
    char id[24];
    std::snprintf(id, sizeof(id), "t%05zu", out.size() + 1);
    t.task_id = id;
    t.entity_id = rec.entity_id;
    t.entity_name = rec.surface_name;
    t.abstract_text = rec.abstract_text;
    t.token_start = span.start;
    t.token_end = span.end;
    t.char_begin = offsets[span.start].first;
    t.char_end = offsets[span.end].second;
    t.surface = span.surface;
    t.confidence = span.confidence;
    t.features = extract_features(span, rc.spans, kg);
    out.push_back(std::move(t));
  }
  return out;
}

struct AnnotationProgress {
  std::size_t total = 0;
  std::size_t labeled = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;

  std::size_t pending() const { return total - labeled; }

  Json to_json() const {
    return Json{{"total", total}, {"labeled", labeled}, {"pending", pending()},
                {"correct", correct}, {"incorrect", incorrect}};
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Thread-safe task store backed by an append-only log. Reads share a lock;
/// verdicts take the exclusive lock and are appended before state changes.
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;

  /// Opens `log_path`. An existing log is replayed and `tasks` is ignored;
  /// otherwise the log is created with `tasks` as its first event.
  static AnnotationStore open(const std::string& log_path, const std::vector<AnnotationTask>& tasks,
                              Clock clock = utc_timestamp) {
    AnnotationStore store(log_path, std::move(clock));
    if (std::filesystem::exists(log_path) && std::filesystem::file_size(log_path) > 0) {
      store.replay();
    } else {
      Json list = Json::array();
      for (const auto& t : tasks) list.push_back(t.to_json());
      store.append(Json{{"event", "tasks"}, {"tasks", std::move(list)}});
      store.install(tasks);
    }
    return store;
  }

  /// Replays an existing log; the log must exist.
  static AnnotationStore replay_only(const std::string& log_path, Clock clock = utc_timestamp) {
    if (!std::filesystem::exists(log_path)) {
      throw Error(ErrorKind::kMissingInput, "annotation log '" + log_path + "' does not exist");
    }
    AnnotationStore store(log_path, std::move(clock));
    store.replay();
    return store;
  }

  AnnotationStore(AnnotationStore&& other) noexcept
      : log_path_(std::move(other.log_path_)),
        clock_(std::move(other.clock_)),
        tasks_(std::move(other.tasks_)),
        index_(std::move(other.index_)),
        log_events_(other.log_events_) {}

  std::vector<AnnotationTask> list(std::optional<TaskStatus> status, std::size_t limit) const {
    std::shared_lock lock(mutex_);
    std::vector<AnnotationTask> out;
    for (const auto& t : tasks_) {
      if (out.size() >= limit) break;
      if (!status || t.status == *status) out.push_back(t);
    }
    return out;
  }

  AnnotationTask get(const std::string& task_id) const {
    std::shared_lock lock(mutex_);
    return tasks_[position(task_id)];
  }

  /// Records a verdict; resubmission overwrites the state and the log keeps
  /// every submission.
  AnnotationTask submit(const std::string& task_id, std::string_view verdict,
                        const std::optional<std::string>& annotator) {
    const Verdict v = parse_verdict(verdict);
    std::unique_lock lock(mutex_);
    const std::size_t k = position(task_id);
    const std::string ts = clock_();
    Json event{{"event", "verdict"}, {"task_id", task_id}, {"verdict", verdict_name(v)}, {"timestamp", ts},
               {"annotator", nullptr}};
    if (annotator) event["annotator"] = *annotator;
    append(event);
    apply(tasks_[k], v, annotator, ts);
    return tasks_[k];
  }

  AnnotationProgress progress() const {
    std::shared_lock lock(mutex_);
    AnnotationProgress p;
    p.total = tasks_.size();
    for (const auto& t : tasks_) {
      if (t.status != TaskStatus::kLabeled) continue;
      ++p.labeled;
      (*t.verdict == Verdict::kCorrect ? p.correct : p.incorrect) += 1;
    }
    return p;
  }

  /// Selector training CSV over labeled tasks: correct -> keep.
  std::string export_selector_csv() const {
    std::vector<LabeledExample> rows;
    for (const auto& t : labeled()) {
      rows.push_back({t.features, *t.verdict == Verdict::kCorrect ? Label::kKeep : Label::kDrop, t.task_id});
    }
    std::ostringstream out;
    write_labeled_csv(out, rows);
    return out.str();
  }

  /// Judgment CSV over labeled tasks.
  std::string export_judgments_csv() const {
    std::ostringstream out;
    out << "entity_id,concept,verdict\n";
    for (const auto& t : labeled()) {
      out << csv::join({t.entity_id, t.surface, std::string(verdict_name(*t.verdict))}) << '\n';
    }
    return out.str();
  }

  std::size_t log_events() const {
    std::shared_lock lock(mutex_);
    return log_events_;
  }

  const std::string& log_path() const { return log_path_; }

 private:
  AnnotationStore(std::string log_path, Clock clock) : log_path_(std::move(log_path)), clock_(std::move(clock)) {}

  std::vector<AnnotationTask> labeled() const {
    std::shared_lock lock(mutex_);
    std::vector<AnnotationTask> out;
    for (const auto& t : tasks_) {
      if (t.status == TaskStatus::kLabeled) out.push_back(t);
    }
    return out;
  }

  std::size_t position(const std::string& task_id) const {
    auto it = index_.find(task_id);
    if (it == index_.end()) throw Error(ErrorKind::kNotFound, "unknown task '" + task_id + "'");
    return it->second;
  }

  static void apply(AnnotationTask& t, Verdict v, const std::optional<std::string>& annotator,
                    const std::string& ts) {
    t.status = TaskStatus::kLabeled;
    t.verdict = v;
    t.annotator = annotator;
    t.timestamp = ts;
  }

  void install(const std::vector<AnnotationTask>& tasks) {
    tasks_ = tasks;
    index_.clear();
    for (std::size_t k = 0; k < tasks_.size(); ++k) {
      if (!index_.emplace(tasks_[k].task_id, k).second) {
        throw Error(ErrorKind::kSchema, "duplicate task id '" + tasks_[k].task_id + "'");
      }
    }
  }

  void append(const Json& event) {
    const std::filesystem::path p(log_path_);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(log_path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorKind::kInvalidArgument, "cannot append to '" + log_path_ + "'");
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::kInvalidArgument, "write to '" + log_path_ + "' failed");
    ++log_events_;
  }

  void replay() {
    std::ifstream in(log_path_, std::ios::binary);
    if (!in) throw Error(ErrorKind::kMissingInput, "cannot open '" + log_path_ + "'");
    bool initialized = false;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      Json event;
      try {
        event = Json::parse(line);
      } catch (const Json::exception& e) {
        throw ParseError(line_no, std::string("invalid log event: ") + e.what());
      }
      try {
        const auto kind = event.at("event").get<std::string>();
        if (kind == "tasks") {
          if (initialized) throw ParseError(line_no, "second tasks event");
          std::vector<AnnotationTask> tasks;
          for (const auto& t : event.at("tasks")) tasks.push_back(AnnotationTask::from_json(t));
          install(tasks);
          initialized = true;
        } else if (kind == "verdict") {
          if (!initialized) throw ParseError(line_no, "verdict before tasks event");
          std::optional<std::string> annotator;
          if (event.contains("annotator") && !event.at("annotator").is_null()) {
            annotator = event.at("annotator").get<std::string>();
          }
          apply(tasks_[position(event.at("task_id").get<std::string>())],
                parse_verdict(event.at("verdict").get<std::string>()), annotator,
                event.at("timestamp").get<std::string>());
        } else {
          throw ParseError(line_no, "unknown event '" + kind + "'");
        }
      } catch (const Json::exception& e) {
        throw ParseError(line_no, std::string("malformed log event: ") + e.what());
      }
      ++log_events_;
    }
    if (!initialized) throw Error(ErrorKind::kSchema, "annotation log '" + log_path_ + "' has no tasks event");
  }

  std::string log_path_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> index_;
  std::size_t log_events_ = 0;
};

}  // namespace conex
