#pragma once

#include <stdexcept>
#include <string>

namespace oneshot {

// Each error family carries the process exit code the CLI reports for it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int code, std::string kind)
      : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}
  int exit_code() const noexcept { return code_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  int code_;
  std::string kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(w, 1, "invalid_argument") {}
};

struct InvalidInstance : Error {
  explicit InvalidInstance(const std::string& w) : Error(w, 1, "invalid_instance") {}
};

struct RateInfeasible : Error {
  explicit RateInfeasible(const std::string& w) : Error(w, 2, "rate_infeasible") {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(w, 3, "numerical_error") {}
};

struct SolverFailure : Error {
  SolverFailure(const std::string& w, double primal, double dual)
      : Error(w + " (primal residual " + std::to_string(primal) + ", dual residual " + std::to_string(dual) + ")", 3,
              "solver_failure"),
        primal_residual(primal),
        dual_residual(dual) {}
  double primal_residual;
  double dual_residual;
};

struct RetryBudgetExhausted : Error {
  explicit RetryBudgetExhausted(const std::string& w) : Error(w, 4, "retry_budget_exhausted") {}
};

struct Cancelled : Error {
  Cancelled() : Error("operation cancelled", 3, "cancelled") {}
};

}  // namespace oneshot
