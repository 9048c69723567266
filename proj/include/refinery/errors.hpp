#pragma once

#include <stdexcept>
#include <string>

namespace refinery {

// Root of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define REFINERY_DEFINE_ERROR(Name, Base) \
  class Name : public Base {              \
   public:                                \
    using Base::Base;                     \
  }

// query_model
REFINERY_DEFINE_ERROR(SyntaxError, Error);
REFINERY_DEFINE_ERROR(NoRefinablePredicates, Error);
REFINERY_DEFINE_ERROR(ArityMismatch, Error);
REFINERY_DEFINE_ERROR(KindMismatch, Error);

// catalog
REFINERY_DEFINE_ERROR(FileNotFound, Error);
REFINERY_DEFINE_ERROR(SchemaError, Error);
REFINERY_DEFINE_ERROR(TypeInferenceError, Error);
REFINERY_DEFINE_ERROR(UnknownTable, Error);
REFINERY_DEFINE_ERROR(UnknownColumn, Error);

// subspace
REFINERY_DEFINE_ERROR(ProbeFailure, Error);
REFINERY_DEFINE_ERROR(EmptyRange, Error);

// objectives
REFINERY_DEFINE_ERROR(SpecError, Error);
REFINERY_DEFINE_ERROR(EvalError, Error);
REFINERY_DEFINE_ERROR(MissingResults, Error);
REFINERY_DEFINE_ERROR(DegenerateDenominator, Error);

// history
REFINERY_DEFINE_ERROR(UnknownSubspace, Error);

// proposal
REFINERY_DEFINE_ERROR(StrategyExhausted, Error);
REFINERY_DEFINE_ERROR(ParseError, Error);

// engine / bench
REFINERY_DEFINE_ERROR(InstanceError, Error);

#undef REFINERY_DEFINE_ERROR

class ExecError : public Error {
 public:
  ExecError(const std::string& message, std::string sql)
      : Error(message + " [sql: " + sql + "]"), sql_(std::move(sql)) {}

  const std::string& sql() const noexcept { return sql_; }

 private:
  std::string sql_;
};

class WireError : public Error {
 public:
  WireError(const std::string& message, int status = 0)
      : Error(message), status_(status) {}

  // HTTP status, 0 when the request never produced a response.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace refinery
