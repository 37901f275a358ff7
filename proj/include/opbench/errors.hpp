#pragma once

#include <stdexcept>
#include <string>

namespace opbench {

// Every failure raised by the suite derives from Error so callers can catch
// the whole family at task boundaries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class DegenerateReferenceError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class SolverError : public Error { using Error::Error; };
class IngestionError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };
class UsageError : public Error { using Error::Error; };

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int last_finite_epoch)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}
  int last_finite_epoch() const { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

class DuplicateRecordError : public Error {
 public:
  DuplicateRecordError(const std::string& what, std::size_t existing_line)
      : Error(what), existing_line_(existing_line) {}
  std::size_t existing_line() const { return existing_line_; }

 private:
  std::size_t existing_line_;
};

}  // namespace opbench
