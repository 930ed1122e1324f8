#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace causeweave {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed JSON. offset() is the byte position reported by the parser.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, std::size_t offset)
      : Error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Well-formed input that breaks a data invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string conversation_id, std::string field,
                  const std::string &detail)
      : Error("conversation '" + conversation_id + "', field '" + field +
              "': " + detail),
        conversation_id_(std::move(conversation_id)),
        field_(std::move(field)) {}

  const std::string &conversation_id() const { return conversation_id_; }
  const std::string &field() const { return field_; }

 private:
  std::string conversation_id_;
  std::string field_;
};

// Corrupt or mismatched file contents (embedding stores, checkpoints,
// answer files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Tensor or vector dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A char span that cannot be mapped onto any token.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

}  // namespace causeweave
