#ifndef MSFV_DIAGNOSTICS_HPP
#define MSFV_DIAGNOSTICS_HPP

#include <mutex>
#include <string>
#include <vector>

namespace msfv {

/// Per-run log of recoverable events (profile fallbacks, clamping).
class Diagnostics {
public:
  void note(std::string event) {
    std::lock_guard lock(mutex_);
    events_.push_back(std::move(event));
  }
  std::vector<std::string> events() const {
    std::lock_guard lock(mutex_);
    return events_;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return events_.size();
  }

private:
  mutable std::mutex mutex_;
  std::vector<std::string> events_;
};

inline void note(Diagnostics* d, std::string event) {
  if (d) d->note(std::move(event));
}

} // namespace msfv

#endif // MSFV_DIAGNOSTICS_HPP
