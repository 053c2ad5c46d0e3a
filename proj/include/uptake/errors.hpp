#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uptake {

/// Base class for every error raised by the library. `code()` is a short
/// machine-readable tag used by the CLI in its `ERROR[<code>]:` prefix.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

    /// True for failures of the numerics (blowup, stiffness, ...) as opposed
    /// to bad input. Drives the CLI exit status.
    virtual bool numerical() const noexcept { return false; }

private:
    std::string code_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class NumericalBlowup : public Error {
public:
    NumericalBlowup(std::size_t node, double time, const std::string& what)
        : Error("blowup", what), node_(node), time_(time) {}

    std::size_t node() const noexcept { return node_; }
    double time() const noexcept { return time_; }
    bool numerical() const noexcept override { return true; }

private:
    std::size_t node_;
    double time_;
};

class StiffnessError : public Error {
public:
    StiffnessError(double time, const std::string& what) : Error("stiffness", what), time_(time) {}
    double time() const noexcept { return time_; }
    bool numerical() const noexcept override { return true; }

private:
    double time_;
};

class AlignmentError : public Error {
public:
    explicit AlignmentError(const std::string& what) : Error("alignment", what) {}
};

class DegenerateReference : public Error {
public:
    explicit DegenerateReference(const std::string& what) : Error("degenerate-reference", what) {}
    bool numerical() const noexcept override { return true; }
};

class IdentifiabilityError : public Error {
public:
    explicit IdentifiabilityError(const std::string& what) : Error("identifiability", what) {}
    bool numerical() const noexcept override { return true; }
};

class EstimationFailed : public Error {
public:
    explicit EstimationFailed(const std::string& what) : Error("estimation-failed", what) {}
    bool numerical() const noexcept override { return true; }
};

/// Configuration parse or schema error. `field` names the offending key
/// (dotted path) when known.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config", what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Observation CSV ingestion error; `row` is the 1-based line number in the file.
class IngestionError : public Error {
public:
    IngestionError(std::size_t row, const std::string& what) : Error("ingestion", what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace uptake
