#include "t2ieval/throttle.hpp"

#include <stdexcept>
#include <thread>

namespace t2ieval {

void SystemClock::sleep_for(Seconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

std::shared_ptr<Clock> system_clock() {
  static auto clock = std::make_shared<SystemClock>();
  return clock;
}

RateLimiter::RateLimiter(int requests_per_minute, std::shared_ptr<Clock> clock)
    : requests_per_minute_(requests_per_minute), clock_(std::move(clock)) {
  if (requests_per_minute_ < 1) throw std::invalid_argument("requests_per_minute must be positive");
}

Seconds RateLimiter::acquire() {
  std::lock_guard lock(mutex_);
  const auto window = std::chrono::duration_cast<Clock::time_point::duration>(Seconds(60.0));
  const auto start = clock_->now();
  auto now = start;
  while (true) {
    while (!recent_.empty() && recent_.front() + window <= now) recent_.pop_front();
    if (recent_.size() < std::size_t(requests_per_minute_)) break;
    clock_->sleep_for(recent_.front() + window - now);
    now = clock_->now();
  }
  recent_.push_back(now);
  return now - start;
}

}  // namespace t2ieval
