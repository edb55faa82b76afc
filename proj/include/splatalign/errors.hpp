#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splatalign {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RotationNearPi : public Error {
 public:
  RotationNearPi() : Error("rotation angle too close to pi for a stable log") {}
};

class SpecInvalid : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyActiveSet : public Error {
 public:
  EmptyActiveSet() : Error("active image set is empty") {}
};

class EmptyMetaImage : public Error {
 public:
  EmptyMetaImage() : Error("meta-image has no images") {}
};

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(long iteration = -1)
      : Error("non-finite gradient" +
              (iteration >= 0 ? " at iteration " + std::to_string(iteration)
                              : std::string())),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

class DecoderShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NoTargets : public Error {
 public:
  NoTargets() : Error("distillation needs at least one posed target") {}
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

// File format errors carry the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class BadMagic : public Error {
 public:
  BadMagic() : Error("bad FMAP magic") {}
};

class VersionUnsupported : public Error {
 public:
  explicit VersionUnsupported(int version)
      : Error("unsupported FMAP version " + std::to_string(version)) {}
};

class TruncatedPayload : public Error {
 public:
  TruncatedPayload(std::size_t expected, std::size_t actual)
      : Error("truncated payload: expected " + std::to_string(expected) +
              " bytes, got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Text parsers report 1-based line numbers.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class UnsupportedCameraModel : public Error {
 public:
  explicit UnsupportedCameraModel(const std::string& model)
      : Error("unsupported camera model " + model), model_(model) {}
  const std::string& model() const { return model_; }

 private:
  std::string model_;
};

class UnknownCameraId : public Error {
 public:
  explicit UnknownCameraId(long id)
      : Error("unknown camera id " + std::to_string(id)) {}
};

}  // namespace splatalign
