#pragma once

#include <atomic>
#include <cstdint>
#include <ctime>
#include <memory>

namespace wlcg {

/// Injected time source. All token lifetimes are epoch seconds, so the
/// interface deals in int64 seconds rather than chrono time points.
class Clock {
  public:
    virtual ~Clock() = default;
    virtual int64_t now() const = 0;
};

class SystemClock final : public Clock {
  public:
    int64_t now() const override { return static_cast<int64_t>(::time(nullptr)); }
};

/// Settable clock for tests and scenario runs. Shareable between threads.
class ManualClock final : public Clock {
  public:
    explicit ManualClock(int64_t start = 1700000000) : now_(start) {}
    int64_t now() const override { return now_.load(); }
    void set(int64_t t) { now_.store(t); }
    void advance(int64_t seconds) { now_.fetch_add(seconds); }

  private:
    std::atomic<int64_t> now_;
};

using ClockPtr = std::shared_ptr<const Clock>;

inline ClockPtr system_clock() { return std::make_shared<SystemClock>(); }

} // namespace wlcg
