#pragma once

#include <stdexcept>
#include <string>

namespace hdpbsid {

/// Raised by every library operation on a violated precondition or a
/// numerical failure. `stage()` names the pipeline step when one applies.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  Error(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace hdpbsid
