#pragma once

#include <stdexcept>
#include <string>

namespace migh {

/// Process exit codes, one per error class.
enum class ExitCode : int {
  Ok = 0,
  Parse = 2,
  Registry = 3,
  Precondition = 4,
  Conservation = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Line 0 marks a whole-table structural problem found after reading.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ExitCode::Parse, line ? "line " + std::to_string(line) + ": " + reason : reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NegativeCount : public ParseError {
 public:
  explicit NegativeCount(std::size_t line) : ParseError(line, "negative count") {}
};

class TotalMismatch : public Error {
 public:
  TotalMismatch(const std::string& destination, const std::string& origin, double declared,
                double computed)
      : Error(ExitCode::Parse, "total mismatch at (" + destination + ", " + origin +
                                   "): declared " + std::to_string(declared) + ", computed " +
                                   std::to_string(computed)) {}
};

class RegistryError : public Error {
 public:
  explicit RegistryError(const std::string& what) : Error(ExitCode::Registry, what) {}
};

class UnknownName : public RegistryError {
 public:
  explicit UnknownName(const std::string& raw)
      : RegistryError("unknown name: '" + raw + "'"), raw_(raw) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class UnknownIndex : public RegistryError {
 public:
  UnknownIndex(int index, int decade)
      : RegistryError("unknown index " + std::to_string(index) + " in decade " +
                      std::to_string(decade)) {}
};

class UnmappableEntity : public RegistryError {
 public:
  explicit UnmappableEntity(const std::string& id)
      : RegistryError("entity has no index in target map: " + id), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ExitCode::Precondition, what) {}
};

class ConservationError : public Error {
 public:
  explicit ConservationError(const std::string& what) : Error(ExitCode::Conservation, what) {}
};

}  // namespace migh
