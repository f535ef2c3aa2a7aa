#pragma once

#include "stagewise/error.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

namespace stagewise {

using clock = std::chrono::steady_clock;
using seconds = std::chrono::duration<double>;

/// An optional point in time after which cooperative work must stop.
/// Learners call check() between coarse work units (per tree, per epoch, per node batch).
class Deadline {
  public:
    Deadline() = default;
    explicit Deadline(clock::time_point at) : at_(at) {}

    static Deadline none() { return {}; }
    static Deadline after(seconds budget) {
        return Deadline(clock::now() + std::chrono::duration_cast<clock::duration>(budget));
    }

    [[nodiscard]] bool bounded() const { return at_.has_value(); }
    [[nodiscard]] std::optional<clock::time_point> at() const { return at_; }

    [[nodiscard]] bool expired() const { return at_ && clock::now() >= *at_; }

    void check() const {
        if (expired()) {
            throw timeout_error{};
        }
    }

    /// Remaining time, or nullopt when unbounded. Never negative.
    [[nodiscard]] std::optional<seconds> remaining() const {
        if (!at_) {
            return std::nullopt;
        }
        return std::max(seconds{0}, std::chrono::duration_cast<seconds>(*at_ - clock::now()));
    }

    /// The earlier of the two deadlines.
    [[nodiscard]] Deadline clip(const Deadline &other) const {
        if (!at_) {
            return other;
        }
        if (!other.at_) {
            return *this;
        }
        return Deadline(std::min(*at_, *other.at_));
    }

  private:
    std::optional<clock::time_point> at_;
};

}  // namespace stagewise
