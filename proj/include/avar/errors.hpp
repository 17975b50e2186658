#ifndef AVAR_ERRORS_HPP
#define AVAR_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace avar {

// Error categories, mapped by the CLI to exit codes:
// InvalidInput -> 2, Statistical -> 3, Numerical -> 4.
enum class ErrorKind { InvalidInput, Statistical, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& code() const { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

// One violated model invariant. row/col are -1 when not applicable.
struct ValidationIssue {
  std::string code;
  int row = -1;
  int col = -1;
  double value = 0.0;
  std::string message;
};

// Carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(ErrorKind::InvalidInput,
              issues.empty() ? std::string("Validation") : issues.front().code,
              join_messages(issues)),
        issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  static std::string join_messages(const std::vector<ValidationIssue>& issues);
  std::vector<ValidationIssue> issues_;
};

}  // namespace avar

#endif
