#pragma once

#include <stdexcept>
#include <string>

namespace cars {

// Error taxonomy used across the library. Structural errors mean two objects
// that must agree (genome vs. space, objective vectors of different arity)
// do not; usage errors mean an API was called out of protocol.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class StructuralError : public Error {
  public:
    explicit StructuralError(const std::string& msg) : Error("structural error: " + msg) {}
};

class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

class DataError : public Error {
  public:
    explicit DataError(const std::string& msg) : Error("data error: " + msg) {}
};

class UsageError : public Error {
  public:
    explicit UsageError(const std::string& msg) : Error("usage error: " + msg) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

class CorruptFileError : public Error {
  public:
    explicit CorruptFileError(const std::string& msg) : Error("corrupt file: " + msg) {}
};

} // namespace cars
