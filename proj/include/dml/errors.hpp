#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dml {

/// Base of every error raised by the library. `category()` is a stable,
/// machine-parseable token used by the CLI on its single-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string_view category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  const std::string& category() const noexcept { return category_; }

  /// Throws a copy of this error, of the same dynamic type, whose message is
  /// prefixed with `context`.
  [[noreturn]] virtual void rethrow_with_context(const std::string& context) const {
    throw Error(category_, context + what());
  }

 private:
  std::string category_;
};

#define DML_DEFINE_ERROR(Name, token)                                 \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(token, what) {}    \
    [[noreturn]] void rethrow_with_context(                           \
        const std::string& context) const override {                  \
      throw Name(context + what());                                   \
    }                                                                 \
  };

DML_DEFINE_ERROR(ZeroNormError, "zero_norm")
DML_DEFINE_ERROR(EmptyInputError, "empty_input")
DML_DEFINE_ERROR(DimensionMismatchError, "dimension_mismatch")
DML_DEFINE_ERROR(SingleClassError, "single_class")
DML_DEFINE_ERROR(InsufficientTupleError, "insufficient_tuple")
DML_DEFINE_ERROR(InvalidSpecError, "invalid_spec")
DML_DEFINE_ERROR(IndexOutOfRangeError, "index_out_of_range")
DML_DEFINE_ERROR(InvalidBatchSpecError, "invalid_batch_spec")
DML_DEFINE_ERROR(NonFiniteGradientError, "non_finite_gradient")
DML_DEFINE_ERROR(KTooLargeError, "k_too_large")
DML_DEFINE_ERROR(EmptyGalleryError, "empty_gallery")
DML_DEFINE_ERROR(UnknownKeyError, "unknown_key")
DML_DEFINE_ERROR(ConfigTypeError, "type_error")
DML_DEFINE_ERROR(MissingRequiredError, "missing_required")
DML_DEFINE_ERROR(ConfigSyntaxError, "config_syntax")
DML_DEFINE_ERROR(IoError, "io_error")
DML_DEFINE_ERROR(CheckpointFormatError, "checkpoint_format")

#undef DML_DEFINE_ERROR

}  // namespace dml
