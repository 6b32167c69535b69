#pragma once

#include <stdexcept>
#include <string>

namespace xnorbin {

// Every failure raised by the library derives from Error and carries a
// stable kind name so callers (and the CLI) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define XNORBIN_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

XNORBIN_DEFINE_ERROR(InvalidBipolar);
XNORBIN_DEFINE_ERROR(ShapeError);
XNORBIN_DEFINE_ERROR(InvalidBatchNorm);
XNORBIN_DEFINE_ERROR(ParseError);
XNORBIN_DEFINE_ERROR(SchemaError);
XNORBIN_DEFINE_ERROR(ValidationError);
XNORBIN_DEFINE_ERROR(IoError);
XNORBIN_DEFINE_ERROR(ConfigMismatch);
XNORBIN_DEFINE_ERROR(AddressFault);

#undef XNORBIN_DEFINE_ERROR

}  // namespace xnorbin
