#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccbf {

// Base for every error raised by the library. Simulation code catches these
// and turns them into run outcomes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IntegrationDiverged : public Error {
 public:
  IntegrationDiverged(double t, const std::string& what)
      : Error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

class DifferentiationError : public Error {
 public:
  DifferentiationError(std::size_t component, const std::string& what)
      : Error(what), component_(component) {}
  std::size_t component() const { return component_; }

 private:
  std::size_t component_;
};

class SingularSystem : public Error {
 public:
  SingularSystem(double pivot, const std::string& what)
      : Error(what), pivot_(pivot) {}
  double pivot() const { return pivot_; }

 private:
  double pivot_;
};

// The QP has no point satisfying the box and all rows. `conflicting_rows`
// is an irreducible subset of the general rows that is infeasible together
// with the box.
class Infeasible : public Error {
 public:
  Infeasible(std::vector<std::size_t> conflicting_rows, const std::string& what)
      : Error(what), rows_(std::move(conflicting_rows)) {}
  const std::vector<std::size_t>& conflicting_rows() const { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

// A barrier constraint was evaluated at or beyond its boundary.
class LeftFeasibleRegion : public Error {
 public:
  LeftFeasibleRegion(std::size_t index, double value, const std::string& what)
      : Error(what), index_(index), value_(value) {}
  std::size_t index() const { return index_; }
  double value() const { return value_; }

 private:
  std::size_t index_;
  double value_;
};

// Hessian of a barrier objective dropped below the convexity floor.
class ConvexityError : public Error {
 public:
  ConvexityError(double min_eig, const std::string& what)
      : Error(what), min_eig_(min_eig) {}
  double min_eigenvalue() const { return min_eig_; }

 private:
  double min_eig_;
};

class AdaptationFailure : public Error {
 public:
  using Error::Error;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccbf
