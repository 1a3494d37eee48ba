#ifndef TUBENET_ERRORS_HPP
#define TUBENET_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tubenet {

/// Malformed scenario/demand/map document. `where` is a field path such as
/// `obstacles[3].lowest_alt` or a `line N` locator.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// A well-formed document that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string entity, const std::string& what)
      : std::runtime_error(entity.empty() ? what : entity + ": " + what),
        entity_(std::move(entity)) {}
  const std::string& entity() const noexcept { return entity_; }

 private:
  std::string entity_;
};

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a route's path cells are already taken in an overlay.
class RouteConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-route search failure: open set exhausted or endpoints unusable.
class NoPathError : public std::runtime_error {
 public:
  enum class Reason { Exhausted, InvalidEndpoint };
  NoPathError(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No sequence produced a network that is complete and passes the risk check.
/// `details` holds one line per sequence.
class InfeasibleNetworkError : public std::runtime_error {
 public:
  InfeasibleNetworkError(const std::string& what, std::vector<std::string> details)
      : std::runtime_error(what), details_(std::move(details)) {}
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  std::vector<std::string> details_;
};

}  // namespace tubenet

#endif  // TUBENET_ERRORS_HPP
