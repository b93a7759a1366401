#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ipakit {

/// Base class for every error raised on malformed input data or violated
/// preconditions. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A character (code point) of an IPA string matched no table symbol.
class UnknownSymbol : public DataError {
 public:
  UnknownSymbol(std::size_t position, std::string character)
      : DataError("unknown IPA symbol '" + character + "' at position " +
                  std::to_string(position)),
        position_(position),
        character_(std::move(character)) {}

  /// Code point offset into the original (unnormalized) input.
  std::size_t position() const noexcept { return position_; }
  const std::string& character() const noexcept { return character_; }

 private:
  std::size_t position_;
  std::string character_;
};

}  // namespace ipakit
