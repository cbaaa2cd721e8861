#pragma once

#include <stdexcept>
#include <string>

namespace remtime {

/// Base class of every error raised by the library. The module name is
/// prefixed to the message so CLI output stays attributable.
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes do not fit the primitive they are fed to.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input file is missing a required column.
class SchemaError : public Error {
public:
    SchemaError(const std::string& module, const std::string& column, const std::string& message)
        : Error(module, message), column_(column) {}

    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

/// A single input row could not be parsed.
class RowError : public Error {
public:
    RowError(const std::string& module, std::size_t line, const std::string& message)
        : Error(module, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyLogError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

/// Categorical index outside the embedding table.
class EncodingError : public Error {
public:
    using Error::Error;
};

/// Invalid hyper-parameter value.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergedError : public Error {
public:
    DivergedError(std::size_t epoch, std::size_t batch, const std::string& message)
        : Error("training", "diverged at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch) + ": " + message),
          epoch_(epoch), batch_(batch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Reading or writing an artifact failed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace remtime
