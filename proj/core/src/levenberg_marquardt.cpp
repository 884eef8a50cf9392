#include "cavio/levenberg_marquardt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "cavio/error.hpp"

namespace cavio {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void evaluate(const ResidualFunction& f, const std::vector<double>& x, std::vector<double>& r) {
    f(x, r);
    for (std::size_t i = 0; i < r.size(); ++i)
        if (!std::isfinite(r[i])) {
            std::ostringstream os;
            os << "non-finite residual at sample " << i;
            throw NonFiniteResidualError(os.str(), i);
        }
}

double weighted_ss(const std::vector<double>& r, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * r[i] * r[i];
    return s;
}

void clamp(std::vector<double>& x, const LmProblem& p) {
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!p.lower.empty()) x[j] = std::max(x[j], p.lower[j]);
        if (!p.upper.empty()) x[j] = std::min(x[j], p.upper[j]);
    }
}

MatrixXd as_matrix(const std::vector<double>& jac, std::size_t m, std::size_t p) {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        jac.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
}

std::string param_name(const std::vector<std::string>& names, std::size_t j) {
    return j < names.size() ? names[j] : "x" + std::to_string(j);
}

}  // namespace

const char* to_string(LmStop s) {
    switch (s) {
        case LmStop::Gradient: return "gradient";
        case LmStop::Step: return "step";
        case LmStop::MaxIterations: return "max-iterations";
    }
    return "unknown";
}

std::vector<double> forward_jacobian(const ResidualFunction& f, const std::vector<double>& x,
                                     std::size_t m, double fd_step) {
    const std::size_t p = x.size();
    std::vector<double> r0(m), r1(m), jac(m * p);
    evaluate(f, x, r0);
    std::vector<double> xs = x;
    for (std::size_t j = 0; j < p; ++j) {
        const double h = fd_step * std::max(std::abs(x[j]), 1.0);
        xs[j] = x[j] + h;
        evaluate(f, xs, r1);
        const double dx = xs[j] - x[j];
        for (std::size_t i = 0; i < m; ++i) jac[i * p + j] = (r1[i] - r0[i]) / dx;
        xs[j] = x[j];
    }
    return jac;
}

std::vector<double> central_jacobian(const ResidualFunction& f, const std::vector<double>& x,
                                     std::size_t m, double fd_step) {
    const std::size_t p = x.size();
    std::vector<double> rp(m), rm(m), jac(m * p);
    std::vector<double> xs = x;
    for (std::size_t j = 0; j < p; ++j) {
        const double h = fd_step * std::max(std::abs(x[j]), 1.0);
        xs[j] = x[j] + h;
        evaluate(f, xs, rp);
        xs[j] = x[j] - h;
        evaluate(f, xs, rm);
        for (std::size_t i = 0; i < m; ++i) jac[i * p + j] = (rp[i] - rm[i]) / (2.0 * h);
        xs[j] = x[j];
    }
    return jac;
}

LmResult lm_minimize(const LmProblem& problem, const LmOptions& opt) {
    const std::size_t p = problem.x0.size();
    const std::size_t m = problem.residual_count;
    if (p == 0) throw ValidationError("least squares: no free parameters");
    if (m == 0) throw ValidationError("least squares: no residuals");
    if (!problem.residuals) throw ValidationError("least squares: residual function missing");
    if ((!problem.lower.empty() && problem.lower.size() != p) ||
        (!problem.upper.empty() && problem.upper.size() != p))
        throw ValidationError("least squares: bounds do not match the parameter count");
    if (!problem.weights.empty() && problem.weights.size() != m)
        throw ValidationError("least squares: weights do not match the residual count");
    for (std::size_t j = 0; j < p; ++j) {
        const double lo = problem.lower.empty() ? -HUGE_VAL : problem.lower[j];
        const double hi = problem.upper.empty() ? HUGE_VAL : problem.upper[j];
        if (!(lo < hi)) throw ValidationError("least squares: lower bound must be < upper bound");
        if (!(problem.x0[j] >= lo && problem.x0[j] <= hi))
            throw ValidationError("least squares: initial value of " + param_name(problem.names, j) +
                                  " lies outside its bounds");
    }
    std::vector<double> w = problem.weights.empty() ? std::vector<double>(m, 1.0) : problem.weights;
    for (double wi : w)
        if (!(wi >= 0.0) || !std::isfinite(wi)) throw ValidationError("least squares: weights must be >= 0");
    const VectorXd wv = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(m));

    LmResult res;
    res.x = problem.x0;
    res.residuals.resize(m);
    evaluate(problem.residuals, res.x, res.residuals);
    res.objective = weighted_ss(res.residuals, w);
    res.history.push_back(res.objective);

    auto linearize = [&](MatrixXd& hess, VectorXd& grad) {
        res.jacobian = forward_jacobian(problem.residuals, res.x, m, opt.fd_step);
        const MatrixXd j = as_matrix(res.jacobian, m, p);
        const VectorXd r = Eigen::Map<const VectorXd>(res.residuals.data(), static_cast<Eigen::Index>(m));
        hess = j.transpose() * wv.asDiagonal() * j;
        grad = j.transpose() * (wv.asDiagonal() * r);
    };

    MatrixXd hess;
    VectorXd grad;
    linearize(hess, grad);
    double mu = opt.initial_damping;
    double nu = 2.0;
    std::vector<double> trial(p), r_trial(m);

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        if (grad.lpNorm<Eigen::Infinity>() < opt.gradient_tol) {
            res.stop = LmStop::Gradient;
            res.converged = true;
            return res;
        }
        VectorXd diag = hess.diagonal();
        for (Eigen::Index k = 0; k < diag.size(); ++k) diag(k) = std::max(diag(k), 1e-300);
        MatrixXd damped = hess;
        damped.diagonal() += mu * diag;
        const VectorXd step = damped.ldlt().solve(-grad);

        double xnorm = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
            trial[k] = res.x[k] + step(static_cast<Eigen::Index>(k));
            xnorm += res.x[k] * res.x[k];
        }
        clamp(trial, problem);
        double snorm = 0.0;
        for (std::size_t k = 0; k < p; ++k) snorm += (trial[k] - res.x[k]) * (trial[k] - res.x[k]);
        if (!step.allFinite() || std::sqrt(snorm) <= opt.step_tol * (std::sqrt(xnorm) + opt.step_tol)) {
            res.stop = LmStop::Step;
            res.converged = true;
            return res;
        }

        evaluate(problem.residuals, trial, r_trial);
        const double obj_trial = weighted_ss(r_trial, w);
        VectorXd dx(static_cast<Eigen::Index>(p));
        for (std::size_t k = 0; k < p; ++k) dx(static_cast<Eigen::Index>(k)) = trial[k] - res.x[k];
        const double predicted = -(2.0 * dx.dot(grad) + dx.dot(hess * dx));
        const double rho = predicted > 0.0 ? (res.objective - obj_trial) / predicted : -1.0;

        if (rho > 0.0 && obj_trial <= res.objective) {
            res.x = trial;
            res.residuals = r_trial;
            res.objective = obj_trial;
            res.history.push_back(obj_trial);
            linearize(hess, grad);
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
        }
    }
    res.stop = LmStop::MaxIterations;
    res.converged = false;
    return res;
}

std::vector<double> lm_covariance(const std::vector<double>& jacobian,
                                  const std::vector<double>& weights, double objective,
                                  std::size_t m, const std::vector<std::string>& names) {
    if (m == 0 || jacobian.size() % m != 0) throw ValidationError("covariance: bad Jacobian shape");
    const std::size_t p = jacobian.size() / m;
    if (m <= p) throw ValidationError("covariance: need more residuals than parameters");
    const MatrixXd j = as_matrix(jacobian, m, p);
    const VectorXd w = weights.empty() ? VectorXd::Ones(static_cast<Eigen::Index>(m))
                                       : VectorXd(Eigen::Map<const VectorXd>(weights.data(),
                                                                             static_cast<Eigen::Index>(m)));
    const MatrixXd h = j.transpose() * w.asDiagonal() * j;

    // Work on the unit-diagonal form so the rank test is scale-free.
    VectorXd d(static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < d.size(); ++k) {
        if (!(h(k, k) > 0.0))
            throw RankDeficiencyError("parameter " + param_name(names, static_cast<std::size_t>(k)) +
                                      " does not influence the residuals");
        d(k) = 1.0 / std::sqrt(h(k, k));
    }
    const MatrixXd corr = d.asDiagonal() * h * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(corr);
    const VectorXd ev = es.eigenvalues();
    if (ev(0) <= 1e-12 * ev(ev.size() - 1)) {
        const VectorXd v = es.eigenvectors().col(0);
        std::ostringstream os;
        os << "J^T W J is singular; unidentifiable combination:";
        for (Eigen::Index k = 0; k < v.size(); ++k)
            if (std::abs(v(k)) > 0.1)
                os << ' ' << (v(k) >= 0 ? '+' : '-') << std::abs(v(k)) << '*'
                   << param_name(names, static_cast<std::size_t>(k));
        throw RankDeficiencyError(os.str());
    }
    const double s2 = objective / static_cast<double>(m - p);
    MatrixXd inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    MatrixXd cov = s2 * (d.asDiagonal() * inv * d.asDiagonal());
    cov = 0.5 * (cov + cov.transpose()).eval();
    std::vector<double> out(p * p);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b)
            out[a * p + b] = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return out;
}

}  // namespace cavio
