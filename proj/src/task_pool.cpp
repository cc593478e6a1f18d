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

#include "xforest/task_pool.hpp"

namespace xforest {

TaskPool::TaskPool(std::size_t threads) {
  for (std::size_t i = 1; i < threads; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

TaskPool::~TaskPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void TaskPool::push(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(task));
  }
  cv_.notify_all();
}

void TaskPool::worker_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
    if (queue_.empty()) return;
    auto task = std::move(queue_.back());
    queue_.pop_back();
    lock.unlock();
    task();
    lock.lock();
  }
}

TaskGroup::~TaskGroup() {
  if (pool_ != nullptr) {
    std::unique_lock lock(pool_->mu_);
    pool_->cv_.wait(lock, [this] { return pending_ == 0; });
  }
}

void TaskGroup::spawn(std::function<void()> fn) {
  if (pool_ == nullptr || pool_->threads() == 1) {
    try {
      fn();
    } catch (...) {
      if (!error_) error_ = std::current_exception();
    }
    return;
  }
  {
    std::lock_guard lock(pool_->mu_);
    ++pending_;
  }
  pool_->push([this, pool = pool_, fn = std::move(fn)] {
    std::exception_ptr err;
    try {
      fn();
    } catch (...) {
      err = std::current_exception();
    }
    {
      std::lock_guard lock(pool->mu_);
      if (err && !error_) error_ = err;
      --pending_;
    }
    // The group may be gone once pending_ hit zero; touch only the pool.
    pool->cv_.notify_all();
  });
}

void TaskGroup::wait() {
  if (pool_ != nullptr && pool_->threads() > 1) {
    std::unique_lock lock(pool_->mu_);
    while (pending_ > 0) {
      if (!pool_->queue_.empty()) {
        auto task = std::move(pool_->queue_.back());
        pool_->queue_.pop_back();
        lock.unlock();
        task();
        lock.lock();
        continue;
      }
      pool_->cv_.wait(lock, [this] {
        return pending_ == 0 || !pool_->queue_.empty();
      });
    }
  }
  if (error_) {
    auto err = error_;
    error_ = nullptr;
    std::rethrow_exception(err);
  }
}

}  // namespace xforest
