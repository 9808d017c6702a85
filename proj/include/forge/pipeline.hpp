#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace forge {

struct PipelineStats {
  std::size_t items = 0;
  std::size_t peak_in_flight = 0;
};

// read -> transform (worker pool) -> sink, with at most `max_in_flight` items
// between the reader and the sink. The sink sees results in input order and
// may stop the pipeline by returning false.
//
//   Source:    std::optional<In>()   (nullopt = end of stream)
//   Transform: Out(In&&)             (called concurrently)
//   Sink:      bool(Out&&)
template <typename In, typename Out, typename Source, typename Transform, typename Sink>
PipelineStats run_ordered_pipeline(Source&& source, Transform&& transform, Sink&& sink, unsigned workers,
                                   std::size_t max_in_flight) {
  workers = workers == 0 ? 1 : workers;
  max_in_flight = max_in_flight == 0 ? 1 : max_in_flight;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::pair<std::size_t, In>> inbox;
  std::map<std::size_t, Out> done;
  std::size_t in_flight = 0;
  bool input_closed = false;
  bool stop = false;
  std::exception_ptr error;
  PipelineStats stats;

  auto worker = [&] {
    for (;;) {
      std::pair<std::size_t, In> job;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return !inbox.empty() || input_closed || stop; });
        if (stop || (inbox.empty() && input_closed)) return;
        job = std::move(inbox.front());
        inbox.pop_front();
      }
      std::optional<Out> out;
      try {
        out.emplace(transform(std::move(job.second)));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
        cv.notify_all();
        return;
      }
      {
        std::lock_guard lock(mu);
        done.emplace(job.first, std::move(*out));
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);

  std::size_t next_in = 0;
  std::size_t next_out = 0;
  bool source_done = false;
  try {
    for (;;) {
      // Drain whatever is ready, in order.
      {
        std::unique_lock lock(mu);
        while (!stop) {
          auto it = done.find(next_out);
          if (it == done.end()) break;
          Out value = std::move(it->second);
          done.erase(it);
          --in_flight;
          lock.unlock();
          bool more = sink(std::move(value));
          lock.lock();
          ++next_out;
          cv.notify_all();
          if (!more) {
            stop = true;
            cv.notify_all();
          }
        }
        if (stop) break;
        if (source_done && next_out == next_in) break;
        if (source_done || in_flight >= max_in_flight) {
          cv.wait(lock, [&] { return stop || done.count(next_out) > 0; });
          continue;
        }
      }
      std::optional<In> item = source();
      std::lock_guard lock(mu);
      if (!item) {
        source_done = true;
        input_closed = true;
        cv.notify_all();
        continue;
      }
      inbox.emplace_back(next_in++, std::move(*item));
      ++in_flight;
      ++stats.items;
      if (in_flight > stats.peak_in_flight) stats.peak_in_flight = in_flight;
      cv.notify_all();
    }
  } catch (...) {
    std::lock_guard lock(mu);
    if (!error) error = std::current_exception();
    stop = true;
  }
  {
    std::lock_guard lock(mu);
    stop = true;
    input_closed = true;
  }
  cv.notify_all();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return stats;
}

}  // namespace forge
