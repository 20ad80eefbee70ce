#pragma once

#include <stdexcept>
#include <string>

namespace protomem {

enum class ErrorKind {
  InvalidInput,       // bad values/dimensions handed to an operation
  DegenerateInput,    // geometrically ill-posed input (e.g. parallel 6D pair)
  AmbiguousAverage,   // quaternion moment matrix with non-unique top eigenvalue
  LoadError,          // file parse or invariant failure, message names the field
  CenterUpdate,       // cluster center update failed, message names cluster/joint
  DegenerateSelection,// blended prototype produced an undecodable pose block
  FitDiverged,        // non-finite loss during descent
  Alignment,          // Procrustes on a degenerate configuration
  Io                  // filesystem/stream failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace protomem
