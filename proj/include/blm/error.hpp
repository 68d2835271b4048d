#pragma once

#include <stdexcept>
#include <string>

namespace blm {

// Error categories map onto CLI exit codes: usage/config → 2, data/IO → 3,
// numeric → 4.
enum class ErrorCategory { usage, config, data, io, format, integrity, lookup, validation, shape, numeric };

const char* category_name(ErrorCategory c);
int exit_code_for(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define BLM_DEFINE_ERROR(Name, Cat)                                     \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorCategory::Cat, what) {} \
  };

BLM_DEFINE_ERROR(UsageError, usage)
BLM_DEFINE_ERROR(ConfigError, config)
BLM_DEFINE_ERROR(DataError, data)
BLM_DEFINE_ERROR(IoError, io)
BLM_DEFINE_ERROR(FormatError, format)
BLM_DEFINE_ERROR(IntegrityError, integrity)
BLM_DEFINE_ERROR(LookupError, lookup)
BLM_DEFINE_ERROR(ValidationError, validation)
BLM_DEFINE_ERROR(ShapeError, shape)
BLM_DEFINE_ERROR(NumericError, numeric)

#undef BLM_DEFINE_ERROR

}  // namespace blm
