#pragma once

#include <stdexcept>
#include <string>

namespace othx {

// Base for all othx errors. Subclasses exist so callers can catch by kind.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define OTHX_DEFINE_ERROR(Name)                              \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& msg) : Error(msg) {}    \
  }

// othello engine / dataset I/O
OTHX_DEFINE_ERROR(IllegalMove);
OTHX_DEFINE_ERROR(ParseError);
OTHX_DEFINE_ERROR(IllegalGame);

// sequence model / training
OTHX_DEFINE_ERROR(ConfigError);
OTHX_DEFINE_ERROR(DataError);
OTHX_DEFINE_ERROR(LengthError);
OTHX_DEFINE_ERROR(LayerError);

// representation alignment
OTHX_DEFINE_ERROR(DegenerateRow);
OTHX_DEFINE_ERROR(RankError);
OTHX_DEFINE_ERROR(EmptyDictionary);
OTHX_DEFINE_ERROR(CollapseError);

// visualization
OTHX_DEFINE_ERROR(DimError);
OTHX_DEFINE_ERROR(IllegalPrefix);
OTHX_DEFINE_ERROR(IoError);

// orchestration
OTHX_DEFINE_ERROR(ManifestError);
OTHX_DEFINE_ERROR(MissingArtifact);

#undef OTHX_DEFINE_ERROR

}  // namespace othx
