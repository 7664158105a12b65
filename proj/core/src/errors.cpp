#include "autolabel/errors.hpp"

namespace autolabel {

std::string_view to_string(errc code) {
  switch (code) {
    case errc::token_count: return "token_count";
    case errc::non_numeric: return "non_numeric";
    case errc::value_range: return "value_range";
    case errc::schema: return "schema";
    case errc::duplicate_id: return "duplicate_id";
    case errc::unknown_image: return "unknown_image";
    case errc::io: return "io";
    case errc::predictor_failed: return "predictor_failed";
    case errc::zero_baseline: return "zero_baseline";
    case errc::config: return "config";
  }
  return "unknown";
}

Error::Error(errc code, std::string message, int line, int detail)
    : std::runtime_error(std::move(message)), code_(code), line_(line), detail_(detail) {}

}  // namespace autolabel
