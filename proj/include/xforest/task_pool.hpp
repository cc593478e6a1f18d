// Copyright 2026 The xforest Authors.
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

// Spawn-sync task execution over a fixed set of threads.
//
//   TaskGroup g(pool);
//   for (...) g.spawn([&] { ... });
//   g.wait();   // runs queued tasks while waiting, so nesting cannot starve
//
// Groups may be nested arbitrarily (a task may open its own group).

#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace xforest {

class TaskPool {
 public:
  // `threads` counts the caller: threads - 1 background workers are started.
  explicit TaskPool(std::size_t threads);
  ~TaskPool();

  TaskPool(const TaskPool&) = delete;
  TaskPool& operator=(const TaskPool&) = delete;

  std::size_t threads() const { return workers_.size() + 1; }

 private:
  friend class TaskGroup;

  void push(std::function<void()> task);
  void worker_loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stop_ = false;
  std::vector<std::thread> workers_;
};

class TaskGroup {
 public:
  // A null or single-threaded pool runs spawned tasks inline.
  explicit TaskGroup(TaskPool* pool) : pool_(pool) {}
  ~TaskGroup();

  TaskGroup(const TaskGroup&) = delete;
  TaskGroup& operator=(const TaskGroup&) = delete;

  void spawn(std::function<void()> fn);
  // Blocks until every spawned task finished; rethrows the first exception.
  void wait();

 private:
  TaskPool* pool_;
  std::size_t pending_ = 0;  // guarded by pool_->mu_
  std::exception_ptr error_;
};

}  // namespace xforest
