#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "sensorcdn/common.hpp"

namespace sensorcdn {

struct Event {
  Seconds time = 0;
  std::uint64_t seq = 0;
  std::function<void()> action;
};

/// Single-threaded discrete-event loop. Events fire in (time, seq) order;
/// seq is the insertion counter, so same-time events keep insertion order.
class EventEngine {
 public:
  Seconds now() const { return now_; }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t dispatched() const { return dispatched_; }

  std::uint64_t schedule(Seconds time, std::function<void()> action) {
    if (time < now_) {
      throw ScheduleError("cannot schedule at " + format_fixed(time, 6) + ", clock is at " +
                          format_fixed(now_, 6));
    }
    const auto seq = next_seq_++;
    queue_.push(Event{time, seq, std::move(action)});
    return seq;
  }

  /// Dispatches every event with time <= t, then sets the clock to t.
  void run_until(Seconds t) {
    while (!queue_.empty() && queue_.top().time <= t) step();
    if (t > now_) now_ = t;
  }

  /// Dispatches until the queue drains.
  void run() {
    while (!queue_.empty()) step();
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void step() {
    Event e = queue_.top();
    queue_.pop();
    now_ = e.time;
    ++dispatched_;
    if (e.action) e.action();
  }

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Seconds now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
};

}  // namespace sensorcdn
