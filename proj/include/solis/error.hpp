#pragma once

#include <stdexcept>
#include <string>

namespace solis {

// Base of every error raised by the library. Each subclass maps onto one
// CLI exit code (see tools/solis_cli.cpp).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (exit code 2).
class ConfigError : public Error {
  public:
    using Error::Error;
};

// API misuse: mismatched widths, empty inputs, foreign graph nodes.
class UsageError : public Error {
  public:
    using Error::Error;
};

// NaN/Inf during evaluation, integration or training (exit code 3).
class NumericError : public Error {
  public:
    using Error::Error;
};

// A quantity requested outside its mathematical domain.
class DomainError : public Error {
  public:
    using Error::Error;
};

class RankDeficiencyError : public Error {
  public:
    using Error::Error;
};

// Malformed dataset / checkpoint / config file.
class ParseError : public Error {
  public:
    using Error::Error;
};

// Checkpoint and dataset were produced by incompatible configs (exit code 4).
class ArtifactMismatchError : public Error {
  public:
    using Error::Error;
};

}  // namespace solis
