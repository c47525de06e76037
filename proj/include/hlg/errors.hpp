#pragma once

#include <stdexcept>
#include <string>

namespace hlg {

/// Bad input shape or parameter combination (dimension mismatch, unknown preset, ...).
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (non-positive dilation, ...).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// The structure form restricted to the active rank does not bracket-generate the center.
class HormanderError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hlg
