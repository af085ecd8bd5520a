#pragma once

#include <stdexcept>
#include <string>

namespace srmtl {

// Base of all library errors. ValidationError covers bad inputs and
// configuration (CLI exit code 1); NumericError covers failures arising
// during computation (CLI exit code 2).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

#define SRMTL_DEFINE_ERROR(NAME, BASE) \
  struct NAME : BASE {                 \
    using BASE::BASE;                  \
  }

// dataio
SRMTL_DEFINE_ERROR(MissingFile, ValidationError);
SRMTL_DEFINE_ERROR(SchemaViolation, ValidationError);
SRMTL_DEFINE_ERROR(ShapeMismatch, ValidationError);
SRMTL_DEFINE_ERROR(NonFiniteSample, ValidationError);
SRMTL_DEFINE_ERROR(InvalidConfig, ValidationError);

// signal
SRMTL_DEFINE_ERROR(InvalidBand, ValidationError);
SRMTL_DEFINE_ERROR(UnstableFilter, NumericError);
SRMTL_DEFINE_ERROR(SampleRateMismatch, ValidationError);

// csp
SRMTL_DEFINE_ERROR(EmptyClass, ValidationError);
SRMTL_DEFINE_ERROR(DimensionMismatch, ValidationError);
SRMTL_DEFINE_ERROR(SingularCovariance, NumericError);
SRMTL_DEFINE_ERROR(DegenerateVariance, NumericError);

// mtl
SRMTL_DEFINE_ERROR(NoProgress, NumericError);
SRMTL_DEFINE_ERROR(EmptySelection, NumericError);

// classify
SRMTL_DEFINE_ERROR(SingleClass, ValidationError);
SRMTL_DEFINE_ERROR(NoConvergence, NumericError);
SRMTL_DEFINE_ERROR(IndexOutOfRange, ValidationError);

// pipeline
SRMTL_DEFINE_ERROR(ZeroVariance, NumericError);

#undef SRMTL_DEFINE_ERROR

}  // namespace srmtl
