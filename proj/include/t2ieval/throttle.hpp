#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <utility>

namespace t2ieval {

using Seconds = std::chrono::duration<double>;

/// Time source used for rate limiting and retry backoff.
class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(Seconds d) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(Seconds d) override;
};

std::shared_ptr<Clock> system_clock();

/// Sliding one-minute window: at most `requests_per_minute` acquisitions
/// in any 60 s span. acquire() blocks (via the clock) until a slot frees
/// and returns how long it waited.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, std::shared_ptr<Clock> clock);

  Seconds acquire();
  Seconds interval() const { return Seconds(60.0 / requests_per_minute_); }

 private:
  int requests_per_minute_;
  std::shared_ptr<Clock> clock_;
  std::mutex mutex_;
  std::deque<Clock::time_point> recent_;
};

/// Counting gate bounding concurrent requests to one endpoint.
class InFlightGate {
 public:
  explicit InFlightGate(int limit) : available_(limit < 1 ? 1 : limit) {}

  class Permit {
   public:
    explicit Permit(InFlightGate& gate) : gate_(&gate) {}
    Permit(Permit&& other) noexcept : gate_(std::exchange(other.gate_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (gate_ != nullptr) gate_->release();
    }

   private:
    InFlightGate* gate_;
  };

  Permit acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
    return Permit(*this);
  }

 private:
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++available_;
    }
    cv_.notify_one();
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

}  // namespace t2ieval
