// Exception hierarchy. Every error the library raises derives from Error;
// the two broad families below let callers (notably the CLI) distinguish
// bad input data from numerical breakdown without enumerating leaf types.
#pragma once

#include <stdexcept>
#include <string>

namespace lrgc {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Problems rooted in the supplied data (degenerate columns, schema
// mismatches, out-of-support queries).
class DataError : public Error {
public:
  using Error::Error;
};

// Problems arising during numerical work on otherwise valid inputs.
class NumericalError : public Error {
public:
  using Error::Error;
};

class DegenerateColumn : public DataError {
public:
  using DataError::DataError;
};

// g_inverse on a continuous column hit empirical CDF 0: the query lies
// below every training observation and the latent value would be -inf.
class NonFiniteLatent : public DataError {
public:
  using DataError::DataError;
};

class UnknownLevel : public DataError {
public:
  using DataError::DataError;
};

class EmptyColumn : public DataError {
public:
  using DataError::DataError;
};

class NoObservations : public DataError {
public:
  using DataError::DataError;
};

class EmptySet : public DataError {
public:
  using DataError::DataError;
};

class ParseError : public DataError {
public:
  using DataError::DataError;
};

class SchemaMismatch : public DataError {
public:
  using DataError::DataError;
};

class EmptyInterval : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class SingularSystem : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ZeroRow : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class UndefinedReliability : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ZeroDenominator : public NumericalError {
public:
  using NumericalError::NumericalError;
};

// Requested factor rank is impossible for the data shape. The CLI treats
// this as a usage error, so it sits outside the data/numerical families.
class BadRank : public Error {
public:
  using Error::Error;
};

}  // namespace lrgc
