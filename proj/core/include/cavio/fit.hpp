#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cavio/levenberg_marquardt.hpp"
#include "cavio/model.hpp"

namespace cavio {

enum class ParameterKind { GammaInt, GammaExt, Frequency };

struct ParameterTarget {
    ParameterKind kind = ParameterKind::GammaInt;
    std::size_t mode = 0;
    int port = -1;  // GammaExt only: 0, 1, or -1 for both ports
};

// One estimated quantity. Several targets form a tie group sharing the value.
struct FreeParameter {
    std::string name;
    std::vector<ParameterTarget> targets;
    double lower = 0.0;
    double upper = 0.0;
    bool log_scale = true;  // optimize ln(value); requires lower > 0, else the offset from the start value
};

struct FitProblem {
    SystemModel model;  // fixed values and the initial guess
    FieldPoint field{0.0};
    std::vector<double> f_ghz;
    std::vector<double> observed_db;  // |S[out][in]| in dB
    std::vector<double> weights;      // empty = unit weights
    std::vector<FreeParameter> parameters;
    int out_port = 1;
    int in_port = 0;
    LmOptions lm{};
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> estimates;
    std::vector<double> covariance;  // p x p, row-major, natural units
    std::vector<double> std_errors;
    double residual_norm = 0.0;  // sqrt(sum w r^2)
    int iterations = 0;
    bool converged = false;
    LmStop stop = LmStop::MaxIterations;
    std::vector<double> history;  // objective per accepted step
    SystemModel model;            // model at the estimates

    double cov(std::size_t a, std::size_t b) const { return covariance[a * names.size() + b]; }
};

// Tied gamma_ext (both ports) and gamma_int for every cavity mode, MHz.
std::vector<FreeParameter> dissipation_parameters(const SystemModel& model, double lower = 1e-4,
                                                  double upper = 1e4);

// Current value of a parameter in `model` (first target of the group).
double parameter_value(const SystemModel& model, const FreeParameter& p);
SystemModel apply_parameters(const SystemModel& model, const std::vector<FreeParameter>& params,
                             const std::vector<double>& values);

// 20 log10 |S[out][in]| over a frequency list.
std::vector<double> transmission_db(const SystemModel& model, FieldPoint field,
                                    const std::vector<double>& f_ghz, int out_port = 1,
                                    int in_port = 0);

// Weighted dB-residual fit with covariance-based uncertainties.
FitResult levenberg_marquardt(const FitProblem& problem);

// Residual Jacobian (row-major m x p) at natural `values`, in the optimizer's internal
// coordinates: forward differences as used by the fit, or central differences.
std::vector<double> fit_jacobian(const FitProblem& problem, const std::vector<double>& values,
                                 bool central = false);

// sqrt(sum w (model_dB - obs_dB)^2) of `model` against the problem data.
double residual_norm(const FitProblem& problem, const SystemModel& model);

enum class Trend { Increasing, Decreasing, Flat, Mixed, Insufficient };
const char* to_string(Trend t);

struct ParameterTrend {
    std::string name;
    std::vector<double> values;  // NaN where the fit failed
    double mean = 0.0;
    double relative_spread = 0.0;  // (max - min) / |mean|
    Trend trend = Trend::Insufficient;
};

struct BatchEntry {
    std::string label;
    std::optional<FitResult> result;
    std::string error;  // set when the fit failed
};

struct BatchResult {
    std::vector<BatchEntry> entries;
    std::vector<ParameterTrend> trends;
    // Residual of each scenario re-evaluated with the across-scenario mean of
    // the shared parameters, next to its own fitted residual.
    std::vector<double> mean_model_residual;
    std::vector<double> fitted_residual;
};

struct BatchOptions {
    unsigned threads = 1;
    double flat_tolerance = 1e-3;
    std::vector<std::string> shared;  // parameters replaced by their mean; empty = all
};

BatchResult batch_fit(const std::vector<FitProblem>& problems, const std::vector<std::string>& labels,
                      const BatchOptions& options = {});

}  // namespace cavio
