#pragma once

#include <stdexcept>
#include <string>

namespace lensdeg {

/// Base of every error thrown by the library. The category decides the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Category { config, numeric, io };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

/// Malformed input text, with the offending line.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error(Category::config, "line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A domain invariant does not hold (bad prescription, mismatched dimensions, ...).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(Category::config, what) {}
};

/// Numeric failure: TIR on a required ray, degenerate bundle, no MTF crossing, ...
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(Category::numeric, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

}  // namespace lensdeg
