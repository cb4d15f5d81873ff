// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mtlf {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MTLF_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

MTLF_DEFINE_ERROR(DimensionError);   // incompatible shapes
MTLF_DEFINE_ERROR(NumericError);     // NaN / Inf produced or consumed
MTLF_DEFINE_ERROR(ParameterError);   // invalid scalar argument
MTLF_DEFINE_ERROR(LabelError);       // label index out of range
MTLF_DEFINE_ERROR(ContractError);    // API misuse (wrong kind, non-scalar loss, ...)
MTLF_DEFINE_ERROR(OptimizerError);   // missing gradient, unregistered parameter
MTLF_DEFINE_ERROR(IngestionError);   // empty or unreadable corpus
MTLF_DEFINE_ERROR(ParseError);       // malformed record or document
MTLF_DEFINE_ERROR(RangeError);       // regression label outside declared range
MTLF_DEFINE_ERROR(ConfigError);      // invalid configuration
MTLF_DEFINE_ERROR(EncodingError);    // token id / sequence length out of range
MTLF_DEFINE_ERROR(RegistryError);    // duplicate or unknown task
MTLF_DEFINE_ERROR(DataError);        // empty or too-small training data
MTLF_DEFINE_ERROR(FormatError);      // checkpoint / results format mismatch
MTLF_DEFINE_ERROR(CorruptionError);  // checkpoint contents inconsistent with manifest

#undef MTLF_DEFINE_ERROR

}  // namespace mtlf
