#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace app {

// Runs work(i) for every index in `todo` on up to `jobs` threads. done(i, r)
// is called on the calling thread only, so it may touch shared state freely.
template <class Result, class Work, class Done>
void run_pool(const std::vector<std::size_t>& todo, int jobs, Work work, Done done) {
    if (todo.empty()) return;
    const std::size_t workers = std::clamp<std::size_t>(jobs < 1 ? 1 : jobs, 1, todo.size());
    if (workers == 1) {
        for (std::size_t i : todo) done(i, work(i));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::pair<std::size_t, Result>> ready;

    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < todo.size();) {
                Result r = work(todo[k]);
                {
                    std::lock_guard lock(m);
                    ready.emplace_back(todo[k], std::move(r));
                }
                cv.notify_one();
            }
        });
    }
    for (std::size_t received = 0; received < todo.size();) {
        std::unique_lock lock(m);
        cv.wait(lock, [&] { return !ready.empty(); });
        auto item = std::move(ready.front());
        ready.pop_front();
        lock.unlock();
        done(item.first, std::move(item.second));
        ++received;
    }
}

}  // namespace app
