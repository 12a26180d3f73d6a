#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adacvar {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
    invalid_input = 1,
    infeasible_constraint = 2,
    empty_distribution = 3,
    config = 4,
    numeric = 5,
    parse = 6,
    unsupported = 7,
    io = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorCode::invalid_input, what) {}
};

class InfeasibleConstraint : public Error {
public:
    explicit InfeasibleConstraint(const std::string& what)
        : Error(ErrorCode::infeasible_constraint, what) {}
};

class EmptyDistribution : public Error {
public:
    explicit EmptyDistribution(const std::string& what)
        : Error(ErrorCode::empty_distribution, what) {}
};

/// Configuration problem; `field` is a JSON-pointer-like path ("/sampler/gamma").
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(ErrorCode::config, field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Non-finite parameters or losses detected during training.
class NumericError : public Error {
public:
    NumericError(std::size_t step, const std::string& what)
        : Error(ErrorCode::numeric, "step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

enum class ParseFailure { empty_file, empty_dataset, ragged_row, bad_cell, bad_schema };

/// CSV / JSON ingestion failure with 1-based row and column (0 when not applicable).
class ParseError : public Error {
public:
    ParseError(ParseFailure kind, std::size_t row, std::size_t column, const std::string& what)
        : Error(ErrorCode::parse, "row " + std::to_string(row) + ", column " +
                                      std::to_string(column) + ": " + what),
          kind_(kind),
          row_(row),
          column_(column) {}

    ParseFailure kind() const noexcept { return kind_; }
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    ParseFailure kind_;
    std::size_t row_;
    std::size_t column_;
};

class Unsupported : public Error {
public:
    explicit Unsupported(const std::string& what) : Error(ErrorCode::unsupported, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

}  // namespace adacvar
