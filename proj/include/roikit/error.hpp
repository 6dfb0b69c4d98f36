#ifndef ROIKIT_ERROR_HPP
#define ROIKIT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roikit {

/// Proposal does not overlap the feature map after snapping to cells.
class EmptyRoiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-variance input to a correlation score.
class UndefinedScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationFailedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based; 0 means the error is not tied
/// to a particular line (e.g. a truncated binary file).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace roikit

#endif  // ROIKIT_ERROR_HPP
