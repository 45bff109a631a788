#pragma once

#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace t2ieval {

// Thread-safe collector for non-fatal conditions (clamped values, dropped
// regions, duplicate tags). Functions that may warn take a nullable pointer.
class Warnings {
 public:
  void add(std::string message) {
    std::lock_guard lock(mutex_);
    messages_.push_back(std::move(message));
  }

  std::vector<std::string> snapshot() const {
    std::lock_guard lock(mutex_);
    return messages_;
  }

  std::vector<std::string> drain() {
    std::lock_guard lock(mutex_);
    return std::exchange(messages_, {});
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return messages_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> messages_;
};

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->add(std::move(message));
}

}  // namespace t2ieval
