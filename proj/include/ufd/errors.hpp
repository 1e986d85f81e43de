#pragma once

#include <stdexcept>
#include <string>

namespace ufd {

// Exit-code classes used by the CLI. Library code throws the typed
// exceptions below; the CLI maps them onto these codes.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    data_error = 3,
    solver_error = 4,
    plant_error = 5,
};

/// Malformed input file or unparseable field.
class ParseError : public std::runtime_error {
  public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally valid input that violates a model invariant
/// (non-radial topology, phase mismatch, bad bounds). The message
/// names the offending element.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad run configuration (out-of-domain alpha, nonsense horizon, ...).
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Conic or step-program solver failure.
class SolverError : public std::runtime_error {
  public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Plant load flow failed to converge (or detected voltage collapse).
class PlantError : public std::runtime_error {
  public:
    explicit PlantError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ufd
