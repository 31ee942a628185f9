#pragma once

#include <stdexcept>
#include <string>

namespace oocrr {

/// Raised when a caller breaks an operation's preconditions (bad shapes,
/// out-of-range block ids, invalid configuration). Maps to CLI exit code 2.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Filesystem / transfer failures. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SvdConvergenceError : public std::runtime_error {
 public:
  SvdConvergenceError(int sweeps, const std::string& where)
      : std::runtime_error("one-sided Jacobi did not converge after " + std::to_string(sweeps) +
                           " sweeps" + (where.empty() ? "" : " (" + where + ")")),
        sweeps_(sweeps) {}

  int sweeps() const noexcept { return sweeps_; }

 private:
  int sweeps_;
};

#define OOCRR_REQUIRE(cond, msg)                       \
  do {                                                 \
    if (!(cond)) throw ::oocrr::ContractError(msg);    \
  } while (0)

}  // namespace oocrr
