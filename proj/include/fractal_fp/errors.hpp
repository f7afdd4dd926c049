#pragma once

#include <stdexcept>
#include <string>

namespace ffp {

/// Input violates an operation's contract (bad range, malformed generator,
/// mismatched tables). The CLI maps this to exit code 2.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical guard tripped: stability bound, boundary escape, resolution
/// limit. The CLI maps this to exit code 3.
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point handed to curve inversion is farther than the geometric tolerance
/// from every chord.
class OffCurveError : public PreconditionError {
 public:
  OffCurveError(const std::string& what, double nearest)
      : PreconditionError(what), nearest_distance_(nearest) {}

  double nearest_distance() const noexcept { return nearest_distance_; }

 private:
  double nearest_distance_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace ffp
