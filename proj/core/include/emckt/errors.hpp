#pragma once

#include <stdexcept>
#include <string>

namespace emckt {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an operation's arguments was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Run configuration, netlist, device file, or archive metadata is unusable.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Text input (netlist, config, mesh file) failed to parse.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, int line)
        : ConfigError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& what) : ConfigError(what), line_(-1) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Mesh connectivity is not a valid manifold tetrahedralization.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// An iterative linear or nonlinear solve failed to reach its tolerance.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    explicit SolverFailure(const std::string& what) : Error(what), residual_(0.0) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Archive bytes are corrupt or carry an unsupported version.
class ArchiveError : public Error {
public:
    using Error::Error;
};

/// A replay was asked for more steps than the archive holds.
class HorizonError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace emckt
