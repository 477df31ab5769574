#pragma once

#include <stdexcept>
#include <string>

namespace czl {

/// Shape or layout mismatch between inputs (lattices, dimensions, file contents).
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller-side precondition that the operation checks but does not repair.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace czl
