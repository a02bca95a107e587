#pragma once

#include <stdexcept>
#include <string>

namespace provobda {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input could not be tokenized or does not match the grammar.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int col)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(col) + ")"),
          line_(line),
          col_(col) {}

    int line() const { return line_; }
    int column() const { return col_; }

private:
    int line_;
    int col_;
};

// A predicate is used with two different arities, or a mapping/data row
// disagrees with the inferred schema.
class ArityMismatch : public Error {
public:
    using Error::Error;
};

class UnknownPredicate : public Error {
public:
    using Error::Error;
};

// mono_remove was asked to delete a variable with no occurrence left.
class VariableAbsent : public Error {
public:
    using Error::Error;
};

// The target polynomial handed to the query translation has math-equal
// monomials; the translation is only defined for pairwise distinct ones.
class DuplicateMonomials : public Error {
public:
    using Error::Error;
};

// Operation requires a standard query (distinct provenance variables,
// no ground monomials in provenance positions).
class NotStandard : public Error {
public:
    using Error::Error;
};

// A configured resource bound (rewriting size, iteration count, chase
// tuples) was exceeded.
class CapExceeded : public Error {
public:
    using Error::Error;
};

// Operation is undefined for the requested semiring mode.
class ModeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace provobda
