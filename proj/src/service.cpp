// Copyright 2026 The capadapt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "httplib.h"
#include "image.hpp"
#include "json.hpp"

namespace capadapt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kInternal, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kState: return 409;
    case ErrorCode::kInvalidArgument: return 422;
    case ErrorCode::kBusy: return 423;
    default: return 500;
  }
}

namespace {

Error NotFound(const std::string& m) { return {ErrorCode::kNotFound, m}; }

std::string ReadOptional(const std::string& path) {
  std::error_code ec;
  return fs::exists(path, ec) ? ReadFile(path) : std::string();
}

}  // namespace

class FeedbackService::WriterSlot {
 public:
  explicit WriterSlot(std::atomic<bool>& flag) : flag_(flag) {
    if (flag_.exchange(true)) throw Error(ErrorCode::kBusy, "an update is already in flight");
  }
  ~WriterSlot() { flag_.store(false); }
  WriterSlot(const WriterSlot&) = delete;
  WriterSlot& operator=(const WriterSlot&) = delete;

 private:
  std::atomic<bool>& flag_;
};

FeedbackService::FeedbackService(ServiceOptions options, std::unique_ptr<Learner> initial)
    : options_(std::move(options)), events_((fs::path(options_.run_dir) / "events.jsonl").string()) {
  if (options_.run_dir.empty()) throw ConfigError("service needs a run directory");
  options_.config.Validate();
  if (options_.keep_snapshots == 0) throw ConfigError("keep_snapshots must be >= 1");
  fs::create_directories(fs::path(options_.run_dir) / "uploads");
  fs::create_directories(fs::path(options_.run_dir) / "snapshots");
  state_path_ = (fs::path(options_.run_dir) / "state.json").string();
  queue_path_ = (fs::path(options_.run_dir) / "feedback.jsonl").string();

  for (const auto& t : options_.tasks)
    for (const auto* split : {&t.train, &t.val, &t.test})
      for (const auto& ex : *split) known_images_[ex.image_id] = &ex;
  if (!options_.tasks.empty())
    for (int cid : options_.config.task_order)
      if (std::none_of(options_.tasks.begin(), options_.tasks.end(), [&](const Task& t) { return t.cluster_id == cid; }))
        throw ConfigError("task_order names unknown cluster " + std::to_string(cid));

  learner_ = initial ? std::shared_ptr<const Learner>(std::move(initial)) : MakeLearner(options_.config.learner);
  if (options_.config.memory_enabled) memory_.emplace(options_.config.memory);
  LoadState();
}

void FeedbackService::LoadState() {
  std::uint64_t trained_through = 0;
  const std::string state_text = ReadOptional(state_path_);
  if (!state_text.empty()) {
    try {
      const auto st = json::parse(state_text);
      update_count_ = st.at("update_count").get<std::uint64_t>();
      task_index_ = st.at("task_index").get<std::size_t>();
      seen_clusters_ = st.at("seen_clusters").get<std::vector<int>>();
      trained_through = st.at("trained_through").get<std::uint64_t>();
      last_timestamp_ = st.at("last_timestamp").get<std::int64_t>();
      learner_snapshots_ = st.at("learner_snapshots").get<std::vector<std::string>>();
      memory_snapshots_ = st.at("memory_snapshots").get<std::vector<std::string>>();
      for (const auto& h : st.at("history")) history_.push_back(h.dump());
    } catch (const json::exception& e) {
      throw ParseError("corrupt service state " + state_path_ + ": " + e.what());
    }
    const fs::path dir(options_.run_dir);
    if (!learner_snapshots_.empty()) {
      auto l = MakeLearner(options_.config.learner);
      l->Restore(ReadFile((dir / learner_snapshots_.back()).string()));
      learner_ = std::move(l);
    }
    if (!memory_snapshots_.empty())
      memory_ = EpisodicMemory::Restore((dir / memory_snapshots_.back()).string());
  }
  next_feedback_id_ = trained_through + 1;

  const std::string queue_text = ReadOptional(queue_path_);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < queue_text.size()) {
    std::size_t end = queue_text.find('\n', start);
    if (end == std::string::npos) end = queue_text.size();
    const std::string line = queue_text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (Trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      // A torn final append from a crash is dropped; anything earlier is corruption.
      if (start >= queue_text.size()) {
        LogWarning("dropping incomplete final record of " + queue_path_);
        break;
      }
      throw ParseError(queue_path_ + ":" + std::to_string(line_no) + ": malformed feedback record");
    }
    if (rec.value("op", "") != "queued") continue;
    FeedbackInstance fb;
    fb.feedback_id = rec.at("feedback_id").get<std::uint64_t>();
    fb.feature_id = rec.value("feature_id", "");
    fb.image_id = rec.value("image_id", "");
    fb.caption = rec.at("caption").get<std::string>();
    fb.received_at_ms = rec.at("received_at").get<std::int64_t>();
    next_feedback_id_ = std::max(next_feedback_id_, fb.feedback_id + 1);
    last_timestamp_ = std::max(last_timestamp_, fb.received_at_ms);
    if (fb.feedback_id > trained_through) queue_.push_back(std::move(fb));
  }
}

std::int64_t FeedbackService::NextTimestamp() {
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  last_timestamp_ = std::max<std::int64_t>(now, last_timestamp_ + 1);
  return last_timestamp_;
}

void FeedbackService::AppendQueueRecord(const std::string& record) {
  std::ofstream out(queue_path_, std::ios::app | std::ios::binary);
  out << record << "\n";
  out.flush();
  if (!out) throw IoError("cannot append to " + queue_path_);
}

std::shared_ptr<const Learner> FeedbackService::learner() const {
  std::lock_guard<std::mutex> lock(mu_);
  return learner_;
}

std::size_t FeedbackService::queue_length() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.size();
}

std::vector<FeedbackInstance> FeedbackService::queue() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_;
}

CaptionReply FeedbackService::Caption(std::string_view image_bytes) {
  const auto* data = reinterpret_cast<const std::uint8_t*>(image_bytes.data());
  auto img = std::make_shared<const ImageBuffer>(DecodeImage({data, image_bytes.size()}));
  auto model = learner();
  if (!model->trained()) throw StateError("untrained learner");
  CaptionReply reply;
  reply.feature_id = Sha256Hex(image_bytes);
  reply.caption = Join(model->Generate(model->Extract(*img)), " ");

  const fs::path stored = fs::path(options_.run_dir) / "uploads" / reply.feature_id;
  std::error_code ec;
  if (!fs::exists(stored, ec)) WriteFileAtomic(stored.string(), image_bytes);
  std::lock_guard<std::mutex> lock(mu_);
  uploads_[reply.feature_id] = std::move(img);
  return reply;
}

std::shared_ptr<const ImageBuffer> FeedbackService::ImageFor(const FeedbackInstance& fb) {
  if (!fb.image_id.empty()) {
    auto it = known_images_.find(fb.image_id);
    if (it == known_images_.end()) throw NotFound("unknown image_id '" + fb.image_id + "'");
    return it->second->image;
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = uploads_.find(fb.feature_id);
    if (it != uploads_.end()) return it->second;
  }
  const fs::path stored = fs::path(options_.run_dir) / "uploads" / fb.feature_id;
  std::error_code ec;
  if (fb.feature_id.empty() || fb.feature_id.find('/') != std::string::npos || !fs::exists(stored, ec))
    throw NotFound("unknown feature_id '" + fb.feature_id + "'");
  const std::string bytes = ReadFile(stored.string());
  auto img = std::make_shared<const ImageBuffer>(
      DecodeImage({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()}));
  std::lock_guard<std::mutex> lock(mu_);
  uploads_[fb.feature_id] = img;
  return img;
}

std::size_t FeedbackService::Feedback(const std::string& feature_id, const std::string& image_id,
                                      const std::string& caption) {
  if (feature_id.empty() == image_id.empty())
    throw InvalidArgument("feedback needs exactly one of feature_id and image_id");
  const std::string text = Trim(caption);
  if (text.empty() || WordTokens(text).empty()) throw InvalidArgument("corrected caption is empty");
  FeedbackInstance fb;
  fb.feature_id = feature_id;
  fb.image_id = image_id;
  fb.caption = text;
  ImageFor(fb);

  std::size_t length = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    fb.feedback_id = next_feedback_id_++;
    fb.received_at_ms = NextTimestamp();
    json rec = {{"op", "queued"}, {"feedback_id", fb.feedback_id}, {"caption", fb.caption},
                {"received_at", fb.received_at_ms}};
    if (!fb.feature_id.empty()) rec["feature_id"] = fb.feature_id;
    if (!fb.image_id.empty()) rec["image_id"] = fb.image_id;
    AppendQueueRecord(rec.dump());
    queue_.push_back(std::move(fb));
    length = queue_.size();
  }
  if (options_.auto_flush > 0 && length >= options_.auto_flush) {
    try {
      Flush();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kBusy) throw;
    }
    length = queue_length();
  }
  return length;
}

std::string FeedbackService::AppendHistory(const std::string& kind, std::uint64_t update_id,
                                           std::optional<int> cluster) {
  json entry = {{"index", history_.size()}, {"kind", kind}, {"update_id", update_id},
                {"timestamp", NextTimestamp()}};
  if (cluster) entry["cluster"] = *cluster;
  history_.push_back(entry.dump());
  return history_.back();
}

void FeedbackService::CommitState(std::unique_ptr<Learner> learner, std::optional<EpisodicMemory> memory) {
  const fs::path dir(options_.run_dir);
  const std::string lname = "snapshots/learner-" + std::to_string(update_count_) + ".txt";
  WriteFileAtomic((dir / lname).string(), learner->Snapshot());
  learner_snapshots_.push_back(lname);
  if (memory) {
    const std::string mname = "snapshots/memory-" + std::to_string(update_count_) + ".txt";
    memory->Snapshot((dir / mname).string());
    memory_snapshots_.push_back(mname);
  }
  std::vector<std::string> retired;
  for (auto* list : {&learner_snapshots_, &memory_snapshots_})
    while (list->size() > options_.keep_snapshots) {
      retired.push_back(list->front());
      list->erase(list->begin());
    }

  json history = json::array();
  for (const auto& h : history_) history.push_back(json::parse(h));
  const std::uint64_t trained_through = next_feedback_id_ - 1 - queue_.size();
  json st = {{"update_count", update_count_},          {"task_index", task_index_},
             {"seen_clusters", seen_clusters_},        {"trained_through", trained_through},
             {"last_timestamp", last_timestamp_},      {"learner_snapshots", learner_snapshots_},
             {"memory_snapshots", memory_snapshots_},  {"history", history}};
  WriteFileAtomic(state_path_, st.dump(1) + "\n");

  learner_ = std::shared_ptr<const Learner>(std::move(learner));
  memory_ = std::move(memory);
  for (const auto& r : retired) {
    std::error_code ec;
    fs::remove(dir / r, ec);
  }
}

namespace {

json EvaluateSnapshot(const TrainSession& session, const std::vector<Task>& tasks, const std::vector<int>& seen,
                      MicroMode micro) {
  std::vector<ClusterPairs> clusters;
  for (const auto& t : tasks) {
    if (!seen.empty() && std::find(seen.begin(), seen.end(), t.cluster_id) == seen.end()) continue;
    if (t.test.empty()) continue;
    clusters.push_back({std::to_string(t.cluster_id), session.Predict(t.test)});
  }
  if (clusters.empty()) return nullptr;
  return json::parse(ReportToJson(Evaluate(clusters, micro)));
}

}  // namespace

FlushReply FeedbackService::Flush() {
  WriterSlot slot(in_flight_);
  return FlushLocked();
}

FlushReply FeedbackService::FlushLocked() {
  std::vector<FeedbackInstance> batch;
  std::shared_ptr<const Learner> base;
  std::optional<EpisodicMemory> memory;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (queue_.empty()) throw StateError("feedback queue is empty");
    batch = queue_;
    base = learner_;
    memory = memory_;
  }
  if (update_hook_) update_hook_();

  Task task;
  task.cluster_id = 0;
  for (const auto& fb : batch)
    task.train.push_back({fb.image_id.empty() ? fb.feature_id : fb.image_id, ImageFor(fb),
                          {CaptionRecord::FromText(fb.caption)}});

  TrainSession session(options_.config, base->Clone(), &events_);
  session.set_memory(memory);
  const TaskLog tlog = session.AdaptTask(task);
  FlushReply reply;
  reply.samples_trained = tlog.epochs.empty() ? 0 : tlog.epochs.front().samples_observed;
  json report = options_.tasks.empty() ? json(nullptr)
                                       : EvaluateSnapshot(session, options_.tasks, seen_clusters_, options_.config.micro);

  std::lock_guard<std::mutex> lock(mu_);
  reply.update_id = ++update_count_;
  queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(batch.size()));
  if (!report.is_null()) {
    auto entry = json::parse(AppendHistory("flush", reply.update_id, std::nullopt));
    entry["report"] = report;
    history_.back() = entry.dump();
  }
  std::optional<EpisodicMemory> new_memory;
  if (session.memory()) new_memory = *session.memory();
  CommitState(session.learner().Clone(), std::move(new_memory));
  for (const auto& fb : batch) {
    AppendQueueRecord(json{{"op", "trained"}, {"feedback_id", fb.feedback_id}, {"update_id", reply.update_id}}.dump());
    events_.Append(json{{"type", "feedback_trained"}, {"feedback_id", fb.feedback_id},
                        {"update_id", reply.update_id}}
                       .dump());
  }
  events_.Append(json{{"type", "update"}, {"update_id", reply.update_id}, {"items", batch.size()},
                      {"samples_trained", reply.samples_trained}}
                     .dump());
  return reply;
}

std::string FeedbackService::Advance() {
  WriterSlot slot(in_flight_);
  const Task* task = nullptr;
  std::shared_ptr<const Learner> base;
  std::optional<EpisodicMemory> memory;
  std::vector<int> seen;
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto& order = options_.config.task_order;
    if (options_.tasks.empty() || task_index_ >= order.size()) throw StateError("no further tasks");
    for (const auto& t : options_.tasks)
      if (t.cluster_id == order[task_index_]) task = &t;
    base = learner_;
    memory = memory_;
    seen = seen_clusters_;
  }
  if (update_hook_) update_hook_();

  TrainSession session(options_.config, base->Clone(), &events_);
  session.set_memory(memory);
  session.AdaptTask(*task);
  seen.push_back(task->cluster_id);
  const json report = EvaluateSnapshot(session, options_.tasks, seen, options_.config.micro);

  std::lock_guard<std::mutex> lock(mu_);
  const std::uint64_t update_id = ++update_count_;
  ++task_index_;
  seen_clusters_ = seen;
  auto entry = json::parse(AppendHistory("advance", update_id, task->cluster_id));
  entry["report"] = report;
  history_.back() = entry.dump();
  std::optional<EpisodicMemory> new_memory;
  if (session.memory()) new_memory = *session.memory();
  CommitState(session.learner().Clone(), std::move(new_memory));
  events_.Append(json{{"type", "advance"}, {"update_id", update_id}, {"cluster", task->cluster_id}}.dump());
  return history_.back();
}

std::string FeedbackService::HistoryJson() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::string out = "[";
  for (std::size_t i = 0; i < history_.size(); ++i) out += (i ? "," : "") + history_[i];
  return out + "]";
}

std::string FeedbackService::StateJson() const {
  std::lock_guard<std::mutex> lock(mu_);
  json st = {{"learner_snapshot", learner_snapshots_.empty() ? json(nullptr) : json(learner_snapshots_.back())},
             {"memory_snapshot", memory_snapshots_.empty() ? json(nullptr) : json(memory_snapshots_.back())},
             {"learner_trained", learner_->trained()},
             {"queue_length", queue_.size()},
             {"history_length", history_.size()},
             {"update_count", update_count_},
             {"task_index", task_index_},
             {"tasks_total", options_.tasks.empty() ? 0 : options_.config.task_order.size()},
             {"seen_clusters", seen_clusters_},
             {"memory_entries", memory_ ? memory_->size() : 0},
             {"update_in_flight", in_flight_.load()},
             {"auto_flush", options_.auto_flush}};
  return st.dump();
}

struct ServiceServer::Impl {
  FeedbackService& service;
  httplib::Server server;
  explicit Impl(FeedbackService& s) : service(s) {}
};

namespace {

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void Guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    Reply(res, HttpStatusFor(e.code()), {{"error", e.what()}});
  } catch (const json::exception& e) {
    Reply(res, 400, {{"error", std::string("malformed JSON body: ") + e.what()}});
  } catch (const std::exception& e) {
    Reply(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

ServiceServer::ServiceServer(FeedbackService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  FeedbackService& svc = impl_->service;
  // The browser console is served from another origin.
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  srv.Post("/caption", [&svc](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      std::string bytes = req.body;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw ParseError("multipart upload needs an 'image' part");
        bytes = req.get_file_value("image").content;
      }
      const auto r = svc.Caption(bytes);
      Reply(res, 200, {{"caption", r.caption}, {"feature_id", r.feature_id}});
    });
  });
  srv.Post("/feedback", [&svc](const httplib::Request& req, httplib::Response& res) {
    Guarded(res, [&] {
      const auto body = json::parse(req.body);
      if (!body.is_object()) throw ParseError("feedback body must be a JSON object");
      const auto n = svc.Feedback(body.value("feature_id", ""), body.value("image_id", ""),
                                  body.value("corrected_caption", ""));
      Reply(res, 200, {{"queue_length", n}});
    });
  });
  srv.Post("/updates/flush", [&svc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] {
      const auto r = svc.Flush();
      Reply(res, 200, {{"update_id", r.update_id}, {"samples_trained", r.samples_trained}});
    });
  });
  srv.Post("/tasks/advance", [&svc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] { Reply(res, 200, json::parse(svc.Advance())); });
  });
  srv.Get("/metrics/history", [&svc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] { res.set_content(svc.HistoryJson(), "application/json"); });
  });
  srv.Get("/session/state", [&svc](const httplib::Request&, httplib::Response& res) {
    Guarded(res, [&] { res.set_content(svc.StateJson(), "application/json"); });
  });
}

ServiceServer::~ServiceServer() { Stop(); }

int ServiceServer::Bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int p = srv.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!srv.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ServiceServer::Run() { impl_->server.listen_after_bind(); }

void ServiceServer::WaitUntilReady() { impl_->server.wait_until_ready(); }

void ServiceServer::Stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace capadapt
