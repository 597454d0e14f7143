#pragma once

#include <stdexcept>
#include <string>

namespace magloc {

enum class errc {
  dimension,
  degenerate_input,
  invalid_window,
  degenerate_spectrum,
  schema_mismatch,
  configuration,
  data,
  parse,
  unknown_label,
  leakage,
  divergence,
  version,
  too_short,
  infeasible,
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::dimension: return "dimension";
    case errc::degenerate_input: return "degenerate-input";
    case errc::invalid_window: return "invalid-window";
    case errc::degenerate_spectrum: return "degenerate-spectrum";
    case errc::schema_mismatch: return "schema-mismatch";
    case errc::configuration: return "configuration";
    case errc::data: return "data";
    case errc::parse: return "parse";
    case errc::unknown_label: return "unknown-label";
    case errc::leakage: return "leakage";
    case errc::divergence: return "divergence";
    case errc::version: return "version";
    case errc::too_short: return "too-short";
    case errc::infeasible: return "infeasible";
  }
  return "unknown";
}

// Process exit categories used by the command-line tool.
enum class exit_category : int { ok = 0, internal = 1, config = 2, data = 3, numeric = 4 };

inline exit_category category_of(errc code) {
  switch (code) {
    case errc::configuration:
    case errc::invalid_window:
    case errc::infeasible:
      return exit_category::config;
    case errc::data:
    case errc::parse:
    case errc::unknown_label:
    case errc::version:
    case errc::too_short:
    case errc::schema_mismatch:
    case errc::dimension:
      return exit_category::data;
    case errc::degenerate_input:
    case errc::degenerate_spectrum:
    case errc::divergence:
      return exit_category::numeric;
    case errc::leakage:
      return exit_category::internal;
  }
  return exit_category::internal;
}

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace magloc
