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

#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace dj {

/// Multi-producer multi-consumer FIFO with a capacity bound. push() blocks
/// while full; pop() blocks while empty and returns nullopt after close().
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    bool push(T value) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) {
            return false;
        }
        items_.push_back(std::move(value));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) {
            return std::nullopt;
        }
        T value = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return value;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }

private:
    mutable std::mutex mu_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

/// Fixed-size pool. Tasks receive the index of the worker running them so
/// callers can keep per-worker scratch state.
class ThreadPool {
public:
    explicit ThreadPool(std::size_t workers);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    std::size_t size() const { return threads_.size(); }
    std::size_t pending() const;

    template <typename F>
    auto submit(F&& fn) -> std::future<std::invoke_result_t<F, std::size_t>> {
        using R = std::invoke_result_t<F, std::size_t>;
        auto task = std::make_shared<std::packaged_task<R(std::size_t)>>(std::forward<F>(fn));
        auto fut = task->get_future();
        enqueue([task](std::size_t worker) { (*task)(worker); });
        return fut;
    }

private:
    void enqueue(std::function<void(std::size_t)> job);
    void worker_loop(std::size_t index);

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void(std::size_t)>> jobs_;
    std::vector<std::thread> threads_;
    bool stopping_ = false;
};

} // namespace dj
