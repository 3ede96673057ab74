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

#ifndef CAPADAPT_SERVICE_HPP_
#define CAPADAPT_SERVICE_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "learner.hpp"
#include "memory.hpp"
#include "trainer.hpp"

namespace capadapt {

std::string Sha256Hex(std::string_view bytes);

struct FeedbackInstance {
  std::uint64_t feedback_id = 0;
  std::string feature_id;  // content hash of an uploaded image, or empty
  std::string image_id;    // known corpus image, or empty
  std::string caption;
  std::int64_t received_at_ms = 0;
  bool trained = false;
};

struct CaptionReply {
  std::string caption;
  std::string feature_id;
};

struct FlushReply {
  std::uint64_t update_id = 0;
  std::size_t samples_trained = 0;  // expanded samples in one epoch
};

struct ServiceOptions {
  std::string run_dir;
  // Queue length that triggers an update on its own; 0 disables auto-flush.
  std::size_t auto_flush = 32;
  RunConfig config;
  // Simulated stream for /tasks/advance and the evaluation snapshots.
  std::vector<Task> tasks;
  // Snapshots of each kind kept on disk.
  std::size_t keep_snapshots = 2;
};

// Interactive caption/feedback/update loop over one run directory.
// Failures are Error exceptions: kParse (undecodable upload), kState
// (untrained learner, empty queue, no further tasks), kNotFound,
// kInvalidArgument (empty caption) and kBusy (update in flight).
class FeedbackService {
 public:
  // Resumes from run_dir/state.json when present; otherwise starts from
  // `initial` (which may be untrained).
  FeedbackService(ServiceOptions options, std::unique_ptr<Learner> initial);

  CaptionReply Caption(std::string_view image_bytes);
  // Exactly one of feature_id / image_id must be set.
  std::size_t Feedback(const std::string& feature_id, const std::string& image_id, const std::string& caption);
  FlushReply Flush();
  // Adapts the next configured cluster and appends a history snapshot.
  std::string Advance();

  std::string HistoryJson() const;
  std::string StateJson() const;
  std::size_t queue_length() const;
  std::vector<FeedbackInstance> queue() const;
  std::shared_ptr<const Learner> learner() const;

  // Called while an update holds the writer slot (tests use it to overlap
  // a second request).
  void set_update_hook(std::function<void()> hook) { update_hook_ = std::move(hook); }

 private:
  class WriterSlot;

  std::shared_ptr<const ImageBuffer> ImageFor(const FeedbackInstance& fb);
  void AppendQueueRecord(const std::string& record);
  void LoadState();
  void CommitState(std::unique_ptr<Learner> learner, std::optional<EpisodicMemory> memory);
  std::string AppendHistory(const std::string& kind, std::uint64_t update_id, std::optional<int> cluster);
  std::int64_t NextTimestamp();
  FlushReply FlushLocked();

  ServiceOptions options_;
  std::string state_path_, queue_path_;
  EventLog events_;
  mutable std::mutex mu_;  // guards everything below
  std::shared_ptr<const Learner> learner_;
  std::optional<EpisodicMemory> memory_;
  std::vector<FeedbackInstance> queue_;
  std::vector<std::string> history_;  // JSON objects
  std::map<std::string, std::shared_ptr<const ImageBuffer>> uploads_;
  std::map<std::string, const Example*> known_images_;
  std::uint64_t next_feedback_id_ = 1;
  std::uint64_t update_count_ = 0;
  std::size_t task_index_ = 0;
  std::vector<int> seen_clusters_;
  std::int64_t last_timestamp_ = 0;
  std::vector<std::string> learner_snapshots_, memory_snapshots_;
  std::atomic<bool> in_flight_{false};
  std::function<void()> update_hook_;
};

// HTTP front end. Status codes: 400 undecodable image, 404 unknown id,
// 409 untrained learner / empty queue / no further tasks, 422 empty
// caption, 423 update in flight.
class ServiceServer {
 public:
  explicit ServiceServer(FeedbackService& service);
  ~ServiceServer();
  // Binds and returns the port (0 picks a free one).
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Run();
  // Returns once Run() accepts connections.
  void WaitUntilReady();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int HttpStatusFor(ErrorCode code);

}  // namespace capadapt

#endif  // CAPADAPT_SERVICE_HPP_
