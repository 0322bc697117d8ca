#pragma once
// Error taxonomy. Every analytic failure carries a stable machine-readable
// code (used verbatim by the CLI) plus a human-readable detail message.

#include <stdexcept>
#include <string>

namespace upg {

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool ok, const std::string& code, const std::string& detail) {
  if (!ok) fail(code, detail);
}

}  // namespace upg
