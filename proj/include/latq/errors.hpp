#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latq {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The lattice basis (or calibration matrix) is numerically rank deficient.
// `index` is the first column whose Gram-Schmidt length fell below the
// relative rank tolerance.
class RankDeficient : public Error {
public:
    RankDeficient(std::size_t index, const std::string& what)
        : Error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class SingularDiagonal : public Error {
public:
    explicit SingularDiagonal(std::size_t index)
        : Error("triangular matrix has a (near) zero diagonal entry at " + std::to_string(index)),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class NotPositiveDefinite : public Error {
public:
    explicit NotPositiveDefinite(std::size_t index)
        : Error("matrix is not positive definite: non-positive pivot at " + std::to_string(index)),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class DimensionTooLarge : public Error {
public:
    DimensionTooLarge(std::size_t n, std::size_t limit)
        : Error("dimension " + std::to_string(n) + " exceeds enumeration limit " +
                std::to_string(limit)) {}
};

class IntegerOverflow : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t col, const std::string& token)
        : Error("parse error at line " + std::to_string(line) + ", field " + std::to_string(col) +
                ": '" + token + "'"),
          line_(line), col_(col), token_(token) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t col() const noexcept { return col_; }
    const std::string& token() const noexcept { return token_; }

private:
    std::size_t line_, col_;
    std::string token_;
};

class RaggedRows : public Error {
public:
    explicit RaggedRows(std::size_t line)
        : Error("ragged rows: line " + std::to_string(line) + " has a different field count"),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace latq
