#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace partacc {

/// Failure categories raised by the library. The CLI maps these onto its
/// exit-code contract, so the set is kept small and stable.
enum class errc {
  invalid_argument,
  out_of_safe_range,
  use_point_mass,
  use_log_scale,
  below_range,
  out_of_calibration_range,
  dimension_mismatch,
  unidentifiable,
  underdetermined,
  training_diverged,
  parse_error,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::invalid_argument: return "invalid-argument";
    case errc::out_of_safe_range: return "out-of-safe-range";
    case errc::use_point_mass: return "use-point-mass";
    case errc::use_log_scale: return "use-log-scale";
    case errc::below_range: return "below-range";
    case errc::out_of_calibration_range: return "out-of-calibration-range";
    case errc::dimension_mismatch: return "dimension-mismatch";
    case errc::unidentifiable: return "unidentifiable";
    case errc::underdetermined: return "underdetermined";
    case errc::training_diverged: return "training-diverged";
    case errc::parse_error: return "parse-error";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace partacc
