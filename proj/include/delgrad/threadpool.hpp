#pragma once
#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace delgrad {

// Persistent pool for parallel_for over an index range. The calling thread
// participates, so ThreadPool(1) runs everything inline and a pool is safe
// to use in reference (single-threaded) mode. Work items pull indices from a
// shared atomic counter; any ordered reduction must happen after the call.
class ThreadPool {
 public:
  explicit ThreadPool(int threads)
  {
    const int extra = std::max(0, threads - 1);
    for (int i = 0; i < extra; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ~ThreadPool()
  {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (std::thread& t : workers_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int width() const { return static_cast<int>(workers_.size()) + 1; }

  void parallel_for(int n, const std::function<void(int)>& fn)
  {
    if (n <= 0) return;
    if (workers_.empty() || n == 1) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(m_);
      fn_ = &fn;
      limit_ = n;
      next_.store(0, std::memory_order_relaxed);
      ++generation_;
    }
    cv_.notify_all();
    for (;;) {
      const int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      fn(i);
    }
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [&] { return running_ == 0; });
    fn_ = nullptr;
  }

 private:
  void worker_loop()
  {
    uint64_t seen = 0;
    std::unique_lock<std::mutex> lk(m_);
    for (;;) {
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      const std::function<void(int)>* fn = fn_;
      const int limit = limit_;
      if (!fn) continue;
      ++running_;
      lk.unlock();
      for (;;) {
        const int i = next_.fetch_add(1, std::memory_order_relaxed);
        if (i >= limit) break;
        (*fn)(i);
      }
      lk.lock();
      if (--running_ == 0) done_cv_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int limit_ = 0;
  std::atomic<int> next_{0};
  uint64_t generation_ = 0;
  int running_ = 0;
  bool stop_ = false;
};

}  // namespace delgrad
