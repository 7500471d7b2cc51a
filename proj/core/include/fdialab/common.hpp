#pragma once

#include <stdexcept>
#include <string>

namespace fdialab {

/// Malformed input text (case files, CSV, configs). CLI exit code 3.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally invalid network model (duplicate slack, dangling branch, ...).
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Graph-level defects: disconnected network, isolated node.
class TopologyError : public std::runtime_error {
public:
    explicit TopologyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Solver divergence, singular systems, NaN loss. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid or inconsistent configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dataset/shape contract violations at API boundaries.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace fdialab
