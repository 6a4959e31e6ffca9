#pragma once

#include <stdexcept>
#include <string>

namespace polymass {

//! Base class for all polymass errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

//! Syntax or semantic error while parsing an expression or a definition file.
//! `offset` is the byte offset into the source; `line`/`column` are 1-based
//! and only meaningful for line-oriented files (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, int line = 0,
             int column = 0)
      : Error(what), offset(offset), line(line), column(column) {}
  std::size_t offset;
  int line;
  int column;
};

//! Evaluation outside an expression's domain (sqrt of a negative number,
//! log of a nonpositive one, ...). Carries the offending subexpression.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpression)
      : Error(what + " in subexpression: " + subexpression),
        subexpression(std::move(subexpression)) {}
  std::string subexpression;
};

//! Geometric failure: non-positive-definite metric, degenerate tangents,
//! degenerate normals, and the like.
class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(what) {}
};

//! Quadrature failure (NaN integrand, invalid plan).
class QuadratureError : public Error {
 public:
  explicit QuadratureError(const std::string& what) : Error(what) {}
};

}  // namespace polymass
