#pragma once

#include <algorithm>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gsmap {

/// Fork-join pool with static work partitioning. parallel_for splits [0, n)
/// into one contiguous chunk per worker, so a fixed thread count always
/// yields the same item-to-thread assignment.
class ThreadPool {
public:
    explicit ThreadPool(int threads = 0) {
        int n = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
        n_threads_ = std::max(1, n);
        for (int i = 1; i < n_threads_; ++i)
            workers_.emplace_back([this, i] { worker_loop(i); });
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_start_.notify_all();
        for (auto& t : workers_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int thread_count() const { return n_threads_; }

    /// fn(thread_index, begin, end) over a static partition of [0, n).
    /// Thread 0 is the calling thread.
    void parallel_for(size_t n, const std::function<void(int, size_t, size_t)>& fn) {
        if (n == 0) return;
        const int used = static_cast<int>(std::min<size_t>(n_threads_, n));
        if (used == 1) {
            fn(0, 0, n);
            return;
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            job_ = &fn;
            job_n_ = n;
            job_used_ = used;
            pending_ = n_threads_ - 1; // every worker acknowledges the generation
            ++generation_;
        }
        cv_start_.notify_all();
        run_chunk(0, fn, n, used);
        std::unique_lock<std::mutex> lock(mutex_);
        cv_done_.wait(lock, [this] { return pending_ == 0; });
        job_ = nullptr;
    }

private:
    static void run_chunk(int idx, const std::function<void(int, size_t, size_t)>& fn,
                          size_t n, int used) {
        const size_t chunk = (n + used - 1) / used;
        const size_t begin = std::min(n, chunk * static_cast<size_t>(idx));
        const size_t end = std::min(n, begin + chunk);
        if (begin < end) fn(idx, begin, end);
    }

    void worker_loop(int idx) {
        uint64_t seen = 0;
        for (;;) {
            const std::function<void(int, size_t, size_t)>* job = nullptr;
            size_t n = 0;
            int used = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                job = job_;
                n = job_n_;
                used = job_used_;
            }
            if (idx < used && job) run_chunk(idx, *job, n, used);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (--pending_ == 0) cv_done_.notify_all();
            }
        }
    }

    int n_threads_ = 1;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    const std::function<void(int, size_t, size_t)>* job_ = nullptr;
    size_t job_n_ = 0;
    int job_used_ = 0;
    int pending_ = 0;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

} // namespace gsmap
