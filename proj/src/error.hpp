#pragma once

#include <stdexcept>
#include <string>

namespace stereo {

enum class Errc {
  io,
  format,
  invalid_argument,
  degenerate_input,
  config,
  internal,
};

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

}  // namespace stereo
