#pragma once

#include <stdexcept>
#include <string>

namespace m2mpool {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Requested failure budget lies at or below the retransmission floor p_e^L.
class InfeasibleTarget : public DomainError {
 public:
  using DomainError::DomainError;
};

// Pool does not fit the LTE grid (report wider than the M2M band, or pool longer than the RI).
class InfeasibleGeometry : public DomainError {
 public:
  using DomainError::DomainError;
};

// Closed-form moments exist only for unit Poisson load or one report per RI.
class UnsupportedAnalytic : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateComparison : public DomainError {
 public:
  using DomainError::DomainError;
};

class IndeterminateEstimate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace m2mpool
