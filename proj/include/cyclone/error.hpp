#pragma once

#include <concepts>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cyclone {

enum class Errc {
  dimension,
  contract,
  degenerate,
  insufficient_length,
  alignment,
  gap,
  non_finite,
  frozen_drift,
  io,
  config,
  missing_artifact,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries a machine-readable kind so the
// CLI can print a single parsable line.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

// Builds the message only on failure; for checks on hot paths.
template <std::invocable MakeMessage>
inline void require(bool condition, Errc code, MakeMessage&& make_message) {
  if (!condition) throw Error(code, std::string(make_message()));
}

}  // namespace cyclone
