#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfaoa {

enum class errc {
  invalid_instance,
  dimension_mismatch,
  symmetry_already_broken,
  symmetric_input,
  invalid_schedule,
  numeric_contamination,
  pole_singularity,
  canonical_form,
  singular_transfer,
  budget_exceeded,
  degenerate_data,
  oracle_required,
  io,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::invalid_instance: return "invalid-instance";
    case errc::dimension_mismatch: return "dimension-mismatch";
    case errc::symmetry_already_broken: return "symmetry-already-broken";
    case errc::symmetric_input: return "z2-symmetric-input";
    case errc::invalid_schedule: return "invalid-schedule";
    case errc::numeric_contamination: return "numeric-contamination";
    case errc::pole_singularity: return "pole-singularity";
    case errc::canonical_form: return "canonical-form";
    case errc::singular_transfer: return "singular-transfer";
    case errc::budget_exceeded: return "budget-exceeded";
    case errc::degenerate_data: return "degenerate-data";
    case errc::oracle_required: return "oracle-required";
    case errc::io: return "io";
  }
  return "unknown";
}

/// Domain error raised by every mfaoa routine. `code()` identifies the
/// contract that was violated; the CLI maps all of these to exit code 1.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace mfaoa
