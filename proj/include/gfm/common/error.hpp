#pragma once

#include <stdexcept>
#include <string>

namespace gfm {

// Every domain failure derives from Error so the CLI can map it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GFM_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

GFM_DEFINE_ERROR(FormatError);
GFM_DEFINE_ERROR(CorruptionError);
GFM_DEFINE_ERROR(ShapeError);
GFM_DEFINE_ERROR(ArgumentError);
GFM_DEFINE_ERROR(EmptyInputError);
GFM_DEFINE_ERROR(IoError);
GFM_DEFINE_ERROR(IndexError);
GFM_DEFINE_ERROR(ParseError);
GFM_DEFINE_ERROR(StateError);
GFM_DEFINE_ERROR(DegenerateInputError);
GFM_DEFINE_ERROR(NumericError);
GFM_DEFINE_ERROR(ConfigError);
GFM_DEFINE_ERROR(StageError);
GFM_DEFINE_ERROR(LabelError);
GFM_DEFINE_ERROR(CompatibilityError);
GFM_DEFINE_ERROR(MissingSourceError);

#undef GFM_DEFINE_ERROR

}  // namespace gfm
