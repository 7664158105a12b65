#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace autolabel {

enum class errc {
  token_count,
  non_numeric,
  value_range,
  schema,
  duplicate_id,
  unknown_image,
  io,
  predictor_failed,
  zero_baseline,
  config,
};

std::string_view to_string(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, std::string message, int line = 0, int detail = 0);

  errc code() const { return code_; }
  // 1-based input line for parse errors; also carries the failing iteration
  // index for predictor failures. 0 when not applicable.
  int line() const { return line_; }
  // Predictor exit code for errc::predictor_failed, token position for
  // errc::non_numeric; 0 otherwise.
  int detail() const { return detail_; }

 private:
  errc code_;
  int line_;
  int detail_;
};

}  // namespace autolabel
