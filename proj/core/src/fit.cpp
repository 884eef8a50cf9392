#include "cavio/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cavio/error.hpp"
#include "cavio/parallel.hpp"
#include "cavio/scattering.hpp"

namespace cavio {
namespace {

double& target_ref(std::vector<CavityMode>& modes, const ParameterTarget& t, int port) {
    auto& m = modes[t.mode];
    switch (t.kind) {
        case ParameterKind::GammaInt: return m.gamma_int_mhz;
        case ParameterKind::GammaExt: return m.gamma_ext_mhz[port];
        case ParameterKind::Frequency: return m.f_ghz;
    }
    throw ValidationError("unknown parameter kind");
}

void check_parameters(const SystemModel& model, const std::vector<FreeParameter>& params) {
    if (params.empty()) throw ValidationError("fit: at least one free parameter is required");
    for (const auto& p : params) {
        if (p.targets.empty()) throw ValidationError("fit: parameter " + p.name + " has no targets");
        if (!(p.lower < p.upper)) throw ValidationError("fit: parameter " + p.name + " needs lower < upper");
        if (p.log_scale && !(p.lower > 0.0))
            throw ValidationError("fit: log-scaled parameter " + p.name + " needs lower > 0");
        for (const auto& t : p.targets) {
            if (t.mode >= model.cavity_count())
                throw ValidationError("fit: parameter " + p.name + " targets a missing cavity mode");
            if (t.kind == ParameterKind::GammaExt && (t.port < -1 || t.port > 1))
                throw ValidationError("fit: parameter " + p.name + " has an invalid port");
        }
    }
}

// Rates are optimized as logarithms; linear parameters (e.g. frequencies) as offsets from
// their start value, so the relative difference step scales with the fit range.
struct Coordinates {
    const std::vector<FreeParameter>& params;
    std::vector<double> origin;

    Coordinates(const SystemModel& model, const std::vector<FreeParameter>& p) : params(p) {
        for (const auto& fp : p) origin.push_back(fp.log_scale ? 0.0 : parameter_value(model, fp));
    }
    double internal(std::size_t k, double v) const { return params[k].log_scale ? std::log(v) : v - origin[k]; }
    double natural(std::size_t k, double x) const { return params[k].log_scale ? std::exp(x) : x + origin[k]; }
    std::vector<double> natural(const std::vector<double>& x) const {
        std::vector<double> v(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) v[k] = natural(k, x[k]);
        return v;
    }
};

ResidualFunction dB_residuals(const FitProblem& pr, const Coordinates& coords) {
    return [&pr, &coords](const std::vector<double>& x, std::vector<double>& r) {
        const auto sim = transmission_db(apply_parameters(pr.model, pr.parameters, coords.natural(x)), pr.field,
                                         pr.f_ghz, pr.out_port, pr.in_port);
        for (std::size_t i = 0; i < sim.size(); ++i) r[i] = sim[i] - pr.observed_db[i];
    };
}

std::vector<double> residual_weights(const FitProblem& pr) {
    if (pr.weights.empty()) return std::vector<double>(pr.f_ghz.size(), 1.0);
    return pr.weights;
}

void check_problem(const FitProblem& pr) {
    if (pr.f_ghz.empty()) throw ValidationError("fit: no observed samples");
    if (pr.f_ghz.size() != pr.observed_db.size())
        throw ValidationError("fit: frequency and observation lengths differ");
    if (!pr.weights.empty() && pr.weights.size() != pr.f_ghz.size())
        throw ValidationError("fit: weight count does not match the samples");
    for (double v : pr.observed_db)
        if (!std::isfinite(v)) throw ValidationError("fit: observed data must be finite");
    check_parameters(pr.model, pr.parameters);
}

}  // namespace

std::vector<FreeParameter> dissipation_parameters(const SystemModel& model, double lower, double upper) {
    std::vector<FreeParameter> out;
    for (std::size_t u = 0; u < model.cavity_count(); ++u) {
        out.push_back({"gamma_ext[" + std::to_string(u) + "]",
                       {{ParameterKind::GammaExt, u, -1}}, lower, upper, true});
        out.push_back({"gamma_int[" + std::to_string(u) + "]",
                       {{ParameterKind::GammaInt, u, -1}}, lower, upper, true});
    }
    return out;
}

double parameter_value(const SystemModel& model, const FreeParameter& p) {
    check_parameters(model, {p});
    auto modes = model.cavity_modes();
    const auto& t = p.targets.front();
    return target_ref(modes, t, t.port < 0 ? 0 : t.port);
}

SystemModel apply_parameters(const SystemModel& model, const std::vector<FreeParameter>& params,
                             const std::vector<double>& values) {
    if (values.size() != params.size()) throw ValidationError("fit: value count mismatch");
    auto modes = model.cavity_modes();
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (const auto& t : params[k].targets) {
            if (t.kind == ParameterKind::GammaExt && t.port < 0) {
                target_ref(modes, t, 0) = values[k];
                target_ref(modes, t, 1) = values[k];
            } else {
                target_ref(modes, t, t.port < 0 ? 0 : t.port) = values[k];
            }
        }
    }
    return model.with_cavity_modes(std::move(modes));
}

std::vector<double> transmission_db(const SystemModel& model, FieldPoint field,
                                    const std::vector<double>& f_ghz, int out_port, int in_port) {
    if ((out_port != 0 && out_port != 1) || (in_port != 0 && in_port != 1))
        throw ValidationError("port index must be 0 or 1");
    const ScatteringEngine eng(model, field);
    std::vector<double> out(f_ghz.size());
    for (std::size_t i = 0; i < f_ghz.size(); ++i)
        out[i] = 20.0 * std::log10(std::abs(eng.evaluate(f_ghz[i]).s[out_port][in_port]));
    return out;
}

std::vector<double> fit_jacobian(const FitProblem& pr, const std::vector<double>& values, bool central) {
    check_problem(pr);
    if (values.size() != pr.parameters.size()) throw ValidationError("fit: value count mismatch");
    const Coordinates coords(pr.model, pr.parameters);
    std::vector<double> x(values.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = coords.internal(k, values[k]);
    const auto res = dB_residuals(pr, coords);
    return central ? central_jacobian(res, x, pr.f_ghz.size()) : forward_jacobian(res, x, pr.f_ghz.size());
}

double residual_norm(const FitProblem& pr, const SystemModel& model) {
    check_problem(pr);
    const auto w = residual_weights(pr);
    const auto sim = transmission_db(model, pr.field, pr.f_ghz, pr.out_port, pr.in_port);
    double s = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) s += w[i] * (sim[i] - pr.observed_db[i]) * (sim[i] - pr.observed_db[i]);
    return std::sqrt(s);
}

FitResult levenberg_marquardt(const FitProblem& pr) {
    check_problem(pr);
    const auto& params = pr.parameters;
    const std::size_t p = params.size();

    const Coordinates coords(pr.model, params);
    LmProblem lm;
    lm.residual_count = pr.f_ghz.size();
    lm.weights = pr.weights;
    for (std::size_t k = 0; k < p; ++k) {
        const auto& fp = params[k];
        const double v = parameter_value(pr.model, fp);
        if (!(v >= fp.lower && v <= fp.upper))
            throw ValidationError("fit: initial value of " + fp.name + " lies outside its bounds");
        lm.x0.push_back(coords.internal(k, v));
        lm.lower.push_back(coords.internal(k, fp.lower));
        lm.upper.push_back(coords.internal(k, fp.upper));
        lm.names.push_back(fp.name);
    }
    lm.residuals = dB_residuals(pr, coords);

    const LmResult res = lm_minimize(lm, pr.lm);
    const std::vector<double> est = coords.natural(res.x);

    // Covariance in internal coordinates, mapped through d(natural)/d(internal).
    auto cov = lm_covariance(res.jacobian, pr.weights, res.objective, lm.residual_count, lm.names);
    std::vector<double> scale(p);
    for (std::size_t k = 0; k < p; ++k) scale[k] = params[k].log_scale ? est[k] : 1.0;
    std::vector<double> se(p);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) cov[a * p + b] *= scale[a] * scale[b];
    }
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a + 1; b < p; ++b) {
            const double s = 0.5 * (cov[a * p + b] + cov[b * p + a]);
            cov[a * p + b] = cov[b * p + a] = s;
        }
    for (std::size_t a = 0; a < p; ++a) se[a] = std::sqrt(std::max(cov[a * p + a], 0.0));

    return FitResult{lm.names,        est,
                     std::move(cov),  std::move(se),
                     std::sqrt(res.objective), res.iterations,
                     res.converged,   res.stop,
                     res.history,     apply_parameters(pr.model, params, est)};
}

const char* to_string(Trend t) {
    switch (t) {
        case Trend::Increasing: return "increasing";
        case Trend::Decreasing: return "decreasing";
        case Trend::Flat: return "flat";
        case Trend::Mixed: return "mixed";
        case Trend::Insufficient: return "insufficient";
    }
    return "unknown";
}

BatchResult batch_fit(const std::vector<FitProblem>& problems, const std::vector<std::string>& labels,
                      const BatchOptions& opt) {
    if (problems.empty()) throw ValidationError("batch fit: no problems given");
    if (labels.size() != problems.size()) throw ValidationError("batch fit: one label per problem required");
    std::vector<std::string> names;
    for (const auto& fp : problems.front().parameters) names.push_back(fp.name);
    for (const auto& pr : problems) {
        std::vector<std::string> n;
        for (const auto& fp : pr.parameters) n.push_back(fp.name);
        if (n != names) throw ValidationError("batch fit: all problems must share one parameter list");
    }
    for (const auto& s : opt.shared)
        if (std::find(names.begin(), names.end(), s) == names.end())
            throw ValidationError("batch fit: unknown shared parameter " + s);

    BatchResult out;
    out.entries.resize(problems.size());
    parallel_for(problems.size(), opt.threads, [&](std::size_t i) {
        auto& e = out.entries[i];
        e.label = labels[i];
        try {
            e.result = levenberg_marquardt(problems[i]);
        } catch (const Error& ex) {
            e.error = ex.what();
        }
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t p = names.size();
    std::vector<double> means(p, nan);
    for (std::size_t k = 0; k < p; ++k) {
        ParameterTrend t;
        t.name = names[k];
        std::vector<double> ok;
        for (const auto& e : out.entries) {
            const double v = e.result ? e.result->estimates[k] : nan;
            t.values.push_back(v);
            if (e.result) ok.push_back(v);
        }
        if (!ok.empty()) {
            t.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
            const auto [lo, hi] = std::minmax_element(ok.begin(), ok.end());
            t.relative_spread = t.mean != 0.0 ? (*hi - *lo) / std::abs(t.mean) : 0.0;
            means[k] = t.mean;
        }
        if (ok.size() < 2) {
            t.trend = Trend::Insufficient;
        } else if (t.relative_spread <= opt.flat_tolerance) {
            t.trend = Trend::Flat;
        } else {
            bool inc = true, dec = true;
            for (std::size_t j = 1; j < ok.size(); ++j) {
                inc = inc && ok[j] > ok[j - 1];
                dec = dec && ok[j] < ok[j - 1];
            }
            t.trend = inc ? Trend::Increasing : dec ? Trend::Decreasing : Trend::Mixed;
        }
        out.trends.push_back(std::move(t));
    }

    for (std::size_t i = 0; i < problems.size(); ++i) {
        const auto& e = out.entries[i];
        if (!e.result) {
            out.mean_model_residual.push_back(nan);
            out.fitted_residual.push_back(nan);
            continue;
        }
        std::vector<double> vals = e.result->estimates;
        for (std::size_t k = 0; k < p; ++k) {
            const bool shared = opt.shared.empty() ||
                                std::find(opt.shared.begin(), opt.shared.end(), names[k]) != opt.shared.end();
            if (shared) vals[k] = means[k];
        }
        try {
            out.mean_model_residual.push_back(
                residual_norm(problems[i], apply_parameters(problems[i].model, problems[i].parameters, vals)));
        } catch (const Error&) {
            out.mean_model_residual.push_back(nan);
        }
        out.fitted_residual.push_back(e.result->residual_norm);
    }
    return out;
}

}  // namespace cavio
