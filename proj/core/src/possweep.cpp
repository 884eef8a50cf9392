#include "cavio/possweep.hpp"

#include <algorithm>
#include <cmath>

// Boost 1.74's pchip calls isnan unqualified on a double; make it visible.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <functional>
#include <limits>

#include "cavio/error.hpp"
#include "cavio/parallel.hpp"
#include "cavio/sweep.hpp"

namespace cavio {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kPullFloor = 1e-6;

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

// Shape-preserving three-point end slope (as in Fritsch-Butland PCHIP codes).
double edge_slope(double h0, double h1, double m0, double m1) {
    double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (sgn(d) != sgn(m0))
        d = 0.0;
    else if (sgn(m0) != sgn(m1) && std::abs(d) > 3.0 * std::abs(m0))
        d = 3.0 * m0;
    return d;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double xq) {
    const std::size_t n = x.size();
    if (n < 4) {
        const auto it = std::upper_bound(x.begin(), x.end(), xq);
        const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, n - 1);
        const double t = (xq - x[k - 1]) / (x[k] - x[k - 1]);
        return y[k - 1] + t * (y[k] - y[k - 1]);
    }
    const double left = edge_slope(x[1] - x[0], x[2] - x[1], (y[1] - y[0]) / (x[1] - x[0]),
                                   (y[2] - y[1]) / (x[2] - x[1]));
    const double right = edge_slope(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3],
                                    (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]),
                                    (y[n - 2] - y[n - 3]) / (x[n - 2] - x[n - 3]));
    boost::math::interpolators::pchip<std::vector<double>> p(std::vector<double>(x), std::vector<double>(y),
                                                             left, right);
    return p(xq);
}

std::vector<double> column(const PositionTable& t, std::size_t u, double PositionMode::*field) {
    std::vector<double> v;
    for (const auto& r : t.rows()) v.push_back(r.modes[u].*field);
    return v;
}

Regime sign_regime(double pull) { return pull > 0.0 ? Regime::Repulsion : Regime::Attraction; }

}  // namespace

PositionTable::PositionTable(std::vector<PositionRow> rows) : rows_(std::move(rows)) {
    if (rows_.size() < 2) throw ValidationError("position table: need at least two rows");
    const std::size_t n = rows_.front().modes.size();
    if (n == 0) throw ValidationError("position table: rows have no modes");
    for (const auto& r : rows_) {
        if (!std::isfinite(r.y_mm)) throw ValidationError("position table: y must be finite");
        if (r.modes.size() != n) throw ValidationError("position table: rows differ in mode count");
        for (const auto& m : r.modes) {
            if (!(m.f_ghz > 0.0) || !(m.g_mhz >= 0.0) || !std::isfinite(m.phi0_rad) ||
                !std::isfinite(m.phi1_rad) || !std::isfinite(m.theta_rad) || !std::isfinite(m.g_mhz))
                throw ValidationError("position table: invalid mode entry at y = " + std::to_string(r.y_mm));
        }
    }
    const bool inc = rows_[1].y_mm > rows_[0].y_mm;
    for (std::size_t i = 1; i < rows_.size(); ++i) {
        const bool ok = inc ? rows_[i].y_mm > rows_[i - 1].y_mm : rows_[i].y_mm < rows_[i - 1].y_mm;
        if (!ok) throw ValidationError("position table: y must be strictly monotone");
    }
    if (!inc) std::reverse(rows_.begin(), rows_.end());
}

InterpolatedPosition interpolate_position(const PositionTable& table, double y) {
    if (!(y >= table.y_min() && y <= table.y_max()))
        throw ValidationError("interpolate_position: y = " + std::to_string(y) +
                              " mm lies outside the table range (no extrapolation)");
    InterpolatedPosition out;
    out.y_mm = y;
    for (const auto& r : table.rows())
        if (r.y_mm == y) {
            out.modes = r.modes;
            out.node = true;
            return out;
        }
    std::vector<double> ys;
    for (const auto& r : table.rows()) ys.push_back(r.y_mm);
    for (std::size_t u = 0; u < table.mode_count(); ++u) {
        PositionMode m;
        m.f_ghz = interpolate(ys, column(table, u, &PositionMode::f_ghz), y);
        m.g_mhz = std::max(0.0, interpolate(ys, column(table, u, &PositionMode::g_mhz), y));
        m.phi0_rad = wrap_angle(interpolate(ys, unwrap_phase(column(table, u, &PositionMode::phi0_rad)), y));
        m.phi1_rad = wrap_angle(interpolate(ys, unwrap_phase(column(table, u, &PositionMode::phi1_rad)), y));
        m.theta_rad = wrap_angle(interpolate(ys, unwrap_phase(column(table, u, &PositionMode::theta_rad)), y));
        out.modes.push_back(m);
    }
    return out;
}

SystemModel position_model(const SystemModel& base, const InterpolatedPosition& pos) {
    if (pos.modes.size() != base.cavity_count())
        throw ValidationError("position_model: table and base model differ in mode count");
    if (base.magnon_count() != 1) throw ValidationError("position_model: base model needs exactly one magnon");
    auto cavity = base.cavity_modes();
    auto mags = base.magnons();
    for (std::size_t u = 0; u < cavity.size(); ++u) {
        cavity[u].f_ghz = pos.modes[u].f_ghz;
        cavity[u].phi_ext_rad = {pos.modes[u].phi0_rad, pos.modes[u].phi1_rad};
        mags[0].couplings[u] = {pos.modes[u].g_mhz, pos.modes[u].theta_rad};
    }
    return SystemModel(std::move(cavity), std::move(mags), base.options());
}

std::vector<ThetaFlag> theta_flags(const PositionTable& table, double limit) {
    std::vector<ThetaFlag> out;
    const auto& rows = table.rows();
    for (std::size_t u = 0; u < table.mode_count(); ++u) {
        const auto th = unwrap_phase(column(table, u, &PositionMode::theta_rad));
        for (std::size_t i = 1; i < th.size(); ++i)
            if (std::abs(th[i] - th[i - 1]) > limit)
                out.push_back({u, rows[i - 1].y_mm, rows[i].y_mm, th[i] - th[i - 1]});
    }
    return out;
}

RegimeProfile regime_profile(const PositionTable& table, const SystemModel& base, const ProfileOptions& opt) {
    if (!(opt.step_mm > 0.0)) throw ValidationError("regime_profile: step must be > 0");
    RegimeOptions ropt = opt.regime;
    ropt.excursion.h_window = {opt.field_t - opt.half_field_window_t, opt.field_t + opt.half_field_window_t};
    position_model(base, interpolate_position(table, table.y_min()));  // validates the pairing

    const double span = table.y_max() - table.y_min();
    const auto steps = static_cast<std::size_t>(std::ceil(span / opt.step_mm - 1e-9));
    RegimeProfile prof;
    for (std::size_t i = 0; i < steps; ++i) prof.y_mm.push_back(table.y_min() + opt.step_mm * static_cast<double>(i));
    prof.y_mm.push_back(table.y_max());
    const std::size_t n = prof.y_mm.size();

    prof.labels.resize(n);
    prof.signed_pull_mhz.assign(n, kNan);
    prof.errors.resize(n);
    prof.g_mhz.assign(table.mode_count(), std::vector<double>(n));
    std::vector<double> thresholds(n, kNan);

    parallel_for(n, opt.threads, [&](std::size_t i) {
        const auto pos = interpolate_position(table, prof.y_mm[i]);
        for (std::size_t u = 0; u < pos.modes.size(); ++u) prof.g_mhz[u][i] = pos.modes[u].g_mhz;
        try {
            const auto rep = classify_regime(position_model(base, pos), ropt);
            prof.labels[i] = rep.overall;
            prof.signed_pull_mhz[i] = rep.signed_pull_mhz;
            thresholds[i] = rep.threshold_mhz;
        } catch (const Error& e) {
            prof.errors[i] = e.what();
        }
    });
    for (double t : thresholds)
        if (std::isfinite(t)) {
            prof.threshold_mhz = t;
            break;
        }

    auto analyse = [&](double y) { return classify_regime(position_model(base, interpolate_position(table, y)), ropt); };
    auto bisect = [&](double a, double b, const std::function<bool(double)>& same_as_a) {
        while (b - a > opt.bisection_tol_mm) {
            const double mid = 0.5 * (a + b);
            (same_as_a(mid) ? a : b) = mid;
        }
        return 0.5 * (a + b);
    };

    // Sign changes of the pull, skipping positions where it is numerically zero.
    std::size_t last = n;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = prof.signed_pull_mhz[i];
        if (!std::isfinite(p) || std::abs(p) < kPullFloor) continue;
        if (last < n && sgn(p) != sgn(prof.signed_pull_mhz[last])) {
            const double s0 = sgn(prof.signed_pull_mhz[last]);
            const double y = bisect(prof.y_mm[last], prof.y_mm[i], [&](double yy) {
                try {
                    return sgn(analyse(yy).signed_pull_mhz) == s0;
                } catch (const Error&) {
                    return true;
                }
            });
            prof.boundaries.push_back({y, sign_regime(prof.signed_pull_mhz[last]), sign_regime(p)});
        }
        last = i;
    }

    for (std::size_t i = 1; i < n; ++i) {
        if (!prof.labels[i] || !prof.labels[i - 1] || *prof.labels[i] == *prof.labels[i - 1]) continue;
        const Regime from = *prof.labels[i - 1];
        const double y = bisect(prof.y_mm[i - 1], prof.y_mm[i], [&](double yy) {
            try {
                return analyse(yy).overall == from;
            } catch (const Error&) {
                return true;
            }
        });
        prof.label_changes.push_back({y, from, *prof.labels[i]});
    }
    prof.theta_flags = theta_flags(table, opt.theta_flag_rad);
    return prof;
}

}  // namespace cavio
