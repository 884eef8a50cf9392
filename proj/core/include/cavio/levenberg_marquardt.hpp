#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace cavio {

struct LmOptions {
    int max_iterations = 500;
    double gradient_tol = 1e-8;  // on max |J^T W r|
    double step_tol = 1e-10;     // on |dx| relative to |x|
    double fd_step = 1e-6;       // relative forward-difference step
    double initial_damping = 1.0;  // relative to diag(J^T W J)
};

enum class LmStop { Gradient, Step, MaxIterations };

const char* to_string(LmStop s);

using ResidualFunction = std::function<void(const std::vector<double>& x, std::vector<double>& r)>;

// Weighted least squares: minimize sum_i w_i r_i(x)^2 subject to box bounds.
struct LmProblem {
    std::size_t residual_count = 0;
    std::vector<double> x0;
    std::vector<double> lower;    // empty = unbounded
    std::vector<double> upper;    // empty = unbounded
    std::vector<double> weights;  // empty = unit weights
    std::vector<std::string> names;
    ResidualFunction residuals;
};

struct LmResult {
    std::vector<double> x;
    double objective = 0.0;  // sum w r^2 at x
    int iterations = 0;
    bool converged = false;
    LmStop stop = LmStop::MaxIterations;
    std::vector<double> history;   // objective after each accepted step, starting value first
    std::vector<double> jacobian;  // m x p, row-major, at x
    std::vector<double> residuals; // r(x)
};

// Throws NonFiniteResidualError when any residual evaluates to NaN/inf.
LmResult lm_minimize(const LmProblem& problem, const LmOptions& options = {});

// Forward differences, step h_j = fd_step * max(|x_j|, 1). Row-major m x p.
std::vector<double> forward_jacobian(const ResidualFunction& f, const std::vector<double>& x,
                                     std::size_t m, double fd_step = 1e-6);
std::vector<double> central_jacobian(const ResidualFunction& f, const std::vector<double>& x,
                                     std::size_t m, double fd_step = 1e-6);

// s^2 (J^T W J)^{-1} with s^2 = sum w r^2 / (m - p). Throws
// RankDeficiencyError naming the parameters of the null direction.
std::vector<double> lm_covariance(const std::vector<double>& jacobian,
                                  const std::vector<double>& weights, double objective,
                                  std::size_t m, const std::vector<std::string>& names);

}  // namespace cavio
