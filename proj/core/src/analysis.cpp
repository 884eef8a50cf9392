#include "cavio/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "cavio/error.hpp"
#include "cavio/levenberg_marquardt.hpp"
#include "cavio/linear_solve.hpp"
#include "cavio/parallel.hpp"
#include "cavio/scattering.hpp"
#include "cavio/units.hpp"

namespace cavio {
namespace {

using units::kPi;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_window(FrequencyWindow w) {
    if (!(w.lo < w.hi)) throw ValidationError("frequency window: lo must be < hi");
}

std::size_t nearest_index(const std::vector<double>& x, double v) {
    const auto it = std::lower_bound(x.begin(), x.end(), v);
    if (it == x.begin()) return 0;
    if (it == x.end()) return x.size() - 1;
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    return (v - x[i - 1] <= x[i] - v) ? i - 1 : i;
}

double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
    const double a = (x1 - x0) * (y1 - y2);
    const double b = (x1 - x2) * (y1 - y0);
    const double den = a - b;
    if (!std::isfinite(den) || den == 0.0) return x1;
    const double x = x1 - 0.5 * ((x1 - x0) * a - (x1 - x2) * b) / den;
    if (!std::isfinite(x)) return x1;
    return std::clamp(x, x0, x2);
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? c : d;
}

}  // namespace

// ---------------------------------------------------------------- dips

std::vector<double> find_antiresonances(const std::vector<double>& f, const std::vector<double>& m,
                                        FrequencyWindow window, const DipOptions& opt) {
    check_window(window);
    if (f.size() != m.size()) throw ValidationError("find_antiresonances: trace lengths differ");
    if (f.size() < 3) throw ValidationError("find_antiresonances: need at least 3 samples");
    const double slack = 1e-9 * std::max(1.0, std::abs(f.back()));
    if (window.lo < f.front() - slack || window.hi > f.back() + slack)
        throw ValidationError("find_antiresonances: window lies outside the trace");

    std::vector<double> out;
    const std::size_t n = f.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (f[i] < window.lo || f[i] > window.hi) continue;
        if (std::isnan(m[i]) || std::isnan(m[i - 1]) || std::isnan(m[i + 1])) continue;
        if (!(m[i] < m[i - 1] && m[i] <= m[i + 1])) continue;
        double left = m[i], right = m[i];
        for (std::size_t j = i; j-- > 0;) {
            if (std::isnan(m[j])) continue;
            if (m[j] < m[i]) break;
            left = std::max(left, m[j]);
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::isnan(m[j])) continue;
            if (m[j] < m[i]) break;
            right = std::max(right, m[j]);
        }
        if (std::min(left, right) - m[i] < opt.prominence_db) continue;
        out.push_back(parabola_vertex(f[i - 1], m[i - 1], f[i], m[i], f[i + 1], m[i + 1]));
    }
    return out;
}

// ---------------------------------------------------------- phase jumps

std::string_view to_string(JumpDirection d) { return d == JumpDirection::Left ? "left" : "right"; }

PhaseJump classify_phase_jump(const std::vector<double>& f, const std::vector<double>& phase_in,
                              double f0, const PhaseJumpOptions& opt) {
    if (f.size() != phase_in.size() || f.size() < 3)
        throw ValidationError("classify_phase_jump: need matching traces of >= 3 samples");
    if (!(f0 >= f.front() && f0 <= f.back()))
        throw ValidationError("classify_phase_jump: feature frequency lies outside the trace");
    // Re-unwrapping is idempotent and undoes any 2 pi re-wrapping of the input.
    const auto phase = unwrap_phase(phase_in);

    std::size_t best = f.size();
    double steepest = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        const double mid = 0.5 * (f[i] + f[i + 1]);
        if (std::abs(mid - f0) > opt.search_radius_ghz) continue;
        const double d = std::abs(phase[i + 1] - phase[i]);
        if (std::isfinite(d) && d > steepest) {
            steepest = d;
            best = i;
        }
    }
    if (best == f.size()) throw TrackingError("classify_phase_jump: no samples within the search radius");
    const double fj = 0.5 * (f[best] + f[best + 1]);
    const double before = phase[nearest_index(f, fj - opt.flank_ghz)];
    const double after = phase[nearest_index(f, fj + opt.flank_ghz)];
    const double mag = std::abs(after - before);
    if (!(mag > 0.5 * kPi && mag < 1.5 * kPi)) {
        std::ostringstream os;
        os << "classify_phase_jump: no pi-scale transition near " << f0 << " GHz (change " << mag
           << " rad)";
        throw TrackingError(os.str());
    }
    const double ref = opt.zero_level.value_or(phase.front());
    const long half_turns = std::lround((before - ref) / kPi);
    const bool odd = (half_turns % 2) != 0;
    return PhaseJump{fj, odd ? JumpDirection::Right : JumpDirection::Left, mag, before, after};
}

Trace phase_trace(const SystemModel& model, FieldPoint field, double f_lo, double f_hi, double step,
                  int out_port, int in_port) {
    if (!(step > 0.0) || !(f_lo < f_hi)) throw ValidationError("phase_trace: bad frequency range");
    const auto n = static_cast<std::size_t>(std::floor((f_hi - f_lo) / step + 1e-9)) + 1;
    const ScatteringEngine eng(model, field);
    Trace t{linspace(f_lo, f_lo + step * static_cast<double>(n - 1), n), {}};
    std::vector<double> wrapped(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = eng.try_evaluate(t.f_ghz[i]);
        wrapped[i] = p.singular ? std::numeric_limits<double>::quiet_NaN() : std::arg(p.s[out_port][in_port]);
    }
    t.values = unwrap_phase(wrapped);
    return t;
}

Trace magnitude_trace(const SystemModel& model, FieldPoint field, double f_lo, double f_hi, double step,
                      int out_port, int in_port) {
    if (!(step > 0.0) || !(f_lo < f_hi)) throw ValidationError("magnitude_trace: bad frequency range");
    const auto n = static_cast<std::size_t>(std::floor((f_hi - f_lo) / step + 1e-9)) + 1;
    const ScatteringEngine eng(model, field);
    Trace t{linspace(f_lo, f_lo + step * static_cast<double>(n - 1), n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = eng.try_evaluate(t.f_ghz[i]);
        t.values[i] = p.singular ? std::numeric_limits<double>::quiet_NaN()
                                 : 20.0 * std::log10(std::abs(p.s[out_port][in_port]));
    }
    return t;
}

// --------------------------------------------------------- excursion

double bare_antiresonance(const SystemModel& model, FrequencyWindow window) {
    check_window(window);
    const auto zeros = transmission_zeros(model.without_magnons(), FieldPoint(0.0));
    double best = kInf, f_ar = 0.0;
    for (auto z : zeros) {
        if (z.real() < window.lo || z.real() > window.hi) continue;
        if (std::abs(z.imag()) < best) {
            best = std::abs(z.imag());
            f_ar = z.real();
        }
    }
    if (!std::isfinite(best)) throw TrackingError("no antiresonance of the bare cavity inside the window");
    return f_ar;
}

ExcursionResult antiresonance_excursion(const SystemModel& model, const ExcursionOptions& opt) {
    check_window(opt.f_window);
    if (!(opt.h_window.lo < opt.h_window.hi) || opt.h_window.lo < 0.0)
        throw ValidationError("field window: need 0 <= lo < hi");
    if (opt.field_samples < 5) throw ValidationError("excursion: need at least 5 field samples");
    if (model.magnon_count() > 1)
        throw ValidationError("excursion: defined for a single magnon mode");

    ExcursionResult res;
    res.f_ar_bare_ghz = bare_antiresonance(model, opt.f_window);
    if (model.magnon_count() == 0) return res;

    const double gyro = model.magnons().front().gyro_ghz_per_t;
    res.half_sweep_mhz = 0.5 * gyro * (opt.h_window.hi - opt.h_window.lo) * 1e3;
    const auto hs = linspace(opt.h_window.lo, opt.h_window.hi, opt.field_samples);
    const std::complex<double> far(res.f_ar_bare_ghz, 0.0);

    for (double h : hs) {
        ZeroPairSample s;
        s.h_tesla = h;
        std::vector<std::complex<double>> near;
        for (auto z : transmission_zeros(model, FieldPoint(h)))
            if (z.real() >= opt.f_window.lo && z.real() <= opt.f_window.hi) near.push_back(z);
        if (near.size() >= 2) {
            std::partial_sort(near.begin(), near.begin() + 2, near.end(),
                              [&](auto a, auto b) { return std::abs(a - far) < std::abs(b - far); });
            s.tracked = true;
            s.lower = near[0].real() <= near[1].real() ? near[0] : near[1];
            s.upper = near[0].real() <= near[1].real() ? near[1] : near[0];
        }
        res.samples.push_back(s);
    }

    std::vector<double> x;
    std::vector<std::complex<double>> q;
    const double hc = 0.5 * (opt.h_window.lo + opt.h_window.hi);
    const double hh = 0.5 * (opt.h_window.hi - opt.h_window.lo);
    const ZeroPairSample* prev = nullptr;
    const double max_jump = 3.0 * gyro * (hs[1] - hs[0]);
    for (const auto& s : res.samples) {
        if (!s.tracked) {
            ++res.failed_samples;
            continue;
        }
        if (prev && (std::abs(s.lower.real() - prev->lower.real()) > max_jump ||
                     std::abs(s.upper.real() - prev->upper.real()) > max_jump))
            res.discontinuities.push_back(s.h_tesla);
        prev = &s;
        const auto d = 0.5 * (s.upper - s.lower);
        x.push_back((s.h_tesla - hc) / hh);
        q.push_back(d * d * 1e6);  // MHz^2
    }
    if (static_cast<double>(res.failed_samples) >
        opt.max_failure_fraction * static_cast<double>(res.samples.size())) {
        std::ostringstream os;
        os << "antiresonance lost at " << res.failed_samples << " of " << res.samples.size()
           << " field samples";
        throw TrackingError(os.str());
    }

    // Least-squares quadratic through the normal equations.
    ComplexMatrix ata(3, 3), atq(3, 1);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double row[3] = {x[k] * x[k], x[k], 1.0};
        for (int a = 0; a < 3; ++a) {
            atq(a, 0) += row[a] * q[k];
            for (int b = 0; b < 3; ++b) ata(a, b) += row[a] * row[b];
        }
    }
    const ComplexMatrix coef = solve_linear(ata, atq);
    const Complex a = coef(0, 0), b = coef(1, 0), c = coef(2, 0);
    if (std::abs(a) == 0.0) throw NumericalError("excursion: degenerate zero-pair curvature");
    res.g2_mhz2 = c - b * b / (4.0 * a);
    double rmax = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        rmax = std::max(rmax, std::abs(a * x[k] * x[k] + b * x[k] + c - q[k]));
    res.fit_residual_mhz2 = rmax;

    res.signed_pull_mhz = res.g2_mhz2.real() / res.half_sweep_mhz;
    res.excursion_mhz = std::abs(res.signed_pull_mhz);
    const auto root = std::sqrt(res.g2_mhz2);
    res.crossing_gap_mhz = 2.0 * std::abs(root.real());
    res.crossing_width_mhz = 2.0 * std::abs(root.imag());
    return res;
}

// ------------------------------------------------------------ regime

std::string_view to_string(ModeTag t) {
    return t == ModeTag::AttractiveToAR ? "attractive-to-ar" : "repulsive-to-ar";
}

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::Attraction: return "attraction";
        case Regime::Repulsion: return "repulsion";
        case Regime::Uncoupled: return "uncoupled";
    }
    return "unknown";
}

double regime_threshold(const SystemModel& model, double f_ar_ghz, const RegimeOptions& opt) {
    double step = opt.grid_step_mhz;
    if (!(step > 0.0)) step = (opt.excursion.f_window.hi - opt.excursion.f_window.lo) * 1e3 / 1000.0;
    double km = 0.0;
    for (const auto& m : model.magnons()) km = std::max(km, magnon_decay(m, f_ar_ghz));
    return std::max(2.0 * km, 2.0 * step);
}

RegimeReport classify_regime(const SystemModel& model, const RegimeOptions& opt) {
    const ExcursionResult ex = antiresonance_excursion(model, opt.excursion);
    RegimeReport rep;
    rep.f_ar_ghz = ex.f_ar_bare_ghz;
    rep.excursion_mhz = ex.excursion_mhz;
    rep.signed_pull_mhz = ex.signed_pull_mhz;
    rep.crossing_gap_mhz = ex.crossing_gap_mhz;
    rep.crossing_width_mhz = ex.crossing_width_mhz;
    rep.g2_mhz2 = ex.g2_mhz2;
    rep.threshold_mhz = regime_threshold(model, rep.f_ar_ghz, opt);
    if (rep.excursion_mhz < rep.threshold_mhz)
        rep.overall = Regime::Uncoupled;
    else
        rep.overall = rep.crossing_gap_mhz > rep.crossing_width_mhz ? Regime::Repulsion : Regime::Attraction;

    if (opt.phase_tags) {
        const auto bare = model.without_magnons();
        double fmin = kInf, fmax = 0.0, lw = kInf;
        for (const auto& m : bare.cavity_modes()) {
            fmin = std::min(fmin, m.f_ghz);
            fmax = std::max(fmax, m.f_ghz);
            lw = std::min(lw, m.gamma_int_mhz + m.gamma_ext_mhz[0] + m.gamma_ext_mhz[1]);
        }
        const double step = std::min(1e-3, lw * 1e-3 / 5.0);
        const double lo = std::max(0.05, std::min(fmin, rep.f_ar_ghz) - 1.0);
        const double hi = std::max(fmax, rep.f_ar_ghz) + 1.0;
        const Trace tr = phase_trace(bare, FieldPoint(0.0), lo, hi, step);
        rep.ar_jump = classify_phase_jump(tr.f_ghz, tr.values, rep.f_ar_ghz, opt.jump);
        for (const auto& m : bare.cavity_modes()) {
            const auto j = classify_phase_jump(tr.f_ghz, tr.values, m.f_ghz, opt.jump);
            rep.mode_jumps.push_back(j);
            rep.tags.push_back(j.direction == rep.ar_jump->direction ? ModeTag::AttractiveToAR
                                                                     : ModeTag::RepulsiveToAR);
        }
    }
    return rep;
}

// ------------------------------------------------------- suppression

SystemModel two_coupling_model(const SystemModel& tmpl, std::size_t u, double g_u, std::size_t w, double g_w) {
    if (u >= tmpl.cavity_count() || w >= tmpl.cavity_count())
        throw ValidationError("suppression: mode index out of range");
    if (u == w) throw ValidationError("suppression: varied and reference modes must differ");
    if (tmpl.magnon_count() == 0) throw ValidationError("suppression: template has no magnon");
    auto mags = tmpl.magnons();
    for (auto& m : mags) {
        for (std::size_t k = 0; k < m.couplings.size(); ++k) {
            if (k == u)
                m.couplings[k].g_mhz = g_u;
            else if (k == w)
                m.couplings[k].g_mhz = g_w;
            else
                m.couplings[k].g_mhz = 0.0;
        }
    }
    return tmpl.with_magnons(std::move(mags));
}

SuppressionResult suppression_ratio(const SystemModel& tmpl, std::size_t u, std::size_t w,
                                    const SuppressionOptions& opt) {
    if (!(opt.ratio_lo > 0.0 && opt.ratio_lo < opt.ratio_hi))
        throw ValidationError("suppression: need 0 < ratio_lo < ratio_hi");
    if (opt.scan_points < 3) throw ValidationError("suppression: need at least 3 scan points");
    if (!(opt.g_ref_mhz > 0.0)) throw ValidationError("suppression: reference coupling must be > 0");
    two_coupling_model(tmpl, u, 0.0, w, opt.g_ref_mhz);  // validates indices

    auto excursion_at = [&](double log_ratio) {
        try {
            const auto m = two_coupling_model(tmpl, u, std::exp(log_ratio) * opt.g_ref_mhz, w, opt.g_ref_mhz);
            return antiresonance_excursion(m, opt.excursion).excursion_mhz;
        } catch (const TrackingError&) {
            return kInf;
        }
    };

    const double a = std::log(opt.ratio_lo), b = std::log(opt.ratio_hi);
    const auto xs = linspace(a, b, opt.scan_points);
    std::vector<double> es(xs.size());
    parallel_for(xs.size(), opt.threads, [&](std::size_t i) { es[i] = excursion_at(xs[i]); });

    SuppressionResult res;
    res.varied = u;
    res.reference = w;
    res.g_ref_mhz = opt.g_ref_mhz;
    const std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(es[i])) continue;
        const double l = i > 0 ? es[i - 1] : kInf;
        const double r = i + 1 < n ? es[i + 1] : kInf;
        if (!(es[i] <= l && es[i] <= r && (es[i] < l || es[i] < r))) continue;
        const double lo = xs[i > 0 ? i - 1 : 0];
        const double hi = xs[i + 1 < n ? i + 1 : n - 1];
        const double xm = golden_section(excursion_at, lo, hi, opt.log_tolerance);
        res.minima.push_back({std::exp(xm), excursion_at(xm)});
    }
    if (res.minima.empty()) throw TrackingError("suppression: excursion could not be evaluated on the scan");
    const auto best = std::min_element(res.minima.begin(), res.minima.end(),
                                       [](const auto& p, const auto& q) { return p.excursion_mhz < q.excursion_mhz; });
    res.ratio = best->ratio;
    res.residual_excursion_mhz = best->excursion_mhz;
    return res;
}

InfluenceRatio influence_ratio(const SystemModel& tmpl, std::size_t a, std::size_t b, std::size_t ref,
                               const SuppressionOptions& opt) {
    InfluenceRatio out;
    out.a_vs_reference = suppression_ratio(tmpl, a, ref, opt);
    out.b_vs_reference = suppression_ratio(tmpl, b, ref, opt);
    out.coupling_reading = out.a_vs_reference.ratio / out.b_vs_reference.ratio;
    const auto alone = [&](std::size_t k) {
        return antiresonance_excursion(two_coupling_model(tmpl, k, opt.g_ref_mhz, ref, 0.0), opt.excursion)
            .excursion_mhz;
    };
    const double ea = alone(a);
    out.excursion_reading = ea > 0.0 ? alone(b) / ea : kInf;
    return out;
}

// ------------------------------------------------ effective coupling

EffectiveCoupling effective_ar_coupling(const SpectrumMap& map, const EffectiveCouplingOptions& opt) {
    const auto& g = map.grid();
    if (g.nf() < 3) throw ValidationError("effective coupling: need at least 3 frequency samples");
    const FrequencyWindow win = opt.f_window.value_or(FrequencyWindow{g.f_ghz.front(), g.f_ghz.back()});
    const Layer mag = map.mag_db(1, 0);

    std::vector<double> hs, lo, hi;
    for (std::size_t ih = 0; ih < g.nh(); ++ih) {
        const auto dips = find_antiresonances(g.f_ghz, mag.row(ih), win, opt.dips);
        if (dips.size() != 2) continue;
        hs.push_back(g.h_tesla[ih]);
        lo.push_back(dips[0]);
        hi.push_back(dips[1]);
    }
    EffectiveCoupling res;
    res.rows_used = hs.size();
    if (hs.empty()) return res;  // a single branch: no splitting
    if (hs.size() < opt.min_rows) throw TrackingError("effective coupling: too few rows with two branches");

    std::size_t kmin = 0;
    for (std::size_t k = 1; k < hs.size(); ++k)
        if (hi[k] - lo[k] < hi[kmin] - lo[kmin]) kmin = k;
    res.half_min_separation_mhz = 0.5 * (hi[kmin] - lo[kmin]) * 1e3;

    const std::size_t m = hs.size();
    LmProblem pr;
    pr.residual_count = 2 * m;
    pr.x0 = {0.5 * (lo[kmin] + hi[kmin]), 0.5 * (hi[kmin] - lo[kmin]), opt.slope_guess_ghz_per_t, hs[kmin]};
    pr.names = {"f_ar", "g", "slope", "h0"};
    pr.residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
        for (std::size_t k = 0; k < m; ++k) {
            const double fm = p[2] * (hs[k] - p[3]) + p[0];
            const double c = 0.5 * (fm + p[0]);
            const double d = 0.5 * (fm - p[0]);
            const double s = std::sqrt(d * d + p[1] * p[1]);
            r[k] = c - s - lo[k];
            r[m + k] = c + s - hi[k];
        }
    };
    const LmResult fit = lm_minimize(pr);
    const auto cov = lm_covariance(fit.jacobian, {}, fit.objective, pr.residual_count, pr.names);
    res.split = true;
    res.f_ar_ghz = fit.x[0];
    res.g_mhz = std::abs(fit.x[1]) * 1e3;
    res.sigma_mhz = std::sqrt(std::max(cov[1 * 4 + 1], 0.0)) * 1e3;
    res.slope_ghz_per_t = fit.x[2];
    res.h0_tesla = fit.x[3];
    return res;
}

}  // namespace cavio
