#include "cavio/sweep.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "cavio/error.hpp"
#include "cavio/format.hpp"
#include "cavio/parallel.hpp"
#include "cavio/units.hpp"

namespace cavio {
namespace {

void check_axis(const std::vector<double>& axis, const char* name) {
    if (axis.empty()) throw ValidationError(std::string("grid: ") + name + " axis is empty");
    for (std::size_t i = 0; i < axis.size(); ++i) {
        if (!std::isfinite(axis[i]))
            throw ValidationError(std::string("grid: ") + name + " axis has non-finite entries");
        if (i > 0 && !(axis[i] > axis[i - 1]))
            throw ValidationError(std::string("grid: ") + name + " axis must be strictly increasing");
    }
}

void check_port(int p) {
    if (p != 0 && p != 1) throw ValidationError("port index must be 0 or 1");
}

double to_db(Complex z) { return 20.0 * std::log10(std::abs(z)); }

}  // namespace

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
    v[n - 1] = hi;
    return v;
}

Grid Grid::linear(double f_lo, double f_hi, std::size_t nf, double h_lo, double h_hi,
                  std::size_t nh) {
    Grid g{linspace(f_lo, f_hi, nf), linspace(h_lo, h_hi, nh)};
    g.validate();
    return g;
}

Grid Grid::single_field(std::vector<double> f_ghz, double h_tesla) {
    Grid g{std::move(f_ghz), {h_tesla}};
    g.validate();
    return g;
}

void Grid::validate() const {
    check_axis(f_ghz, "frequency");
    check_axis(h_tesla, "field");
    if (!(f_ghz.front() > 0.0)) throw ValidationError("grid: frequencies must be > 0");
    if (h_tesla.front() < 0.0) throw ValidationError("grid: fields must be >= 0");
}

std::vector<double> Layer::row(std::size_t ih) const {
    return {values.begin() + static_cast<std::ptrdiff_t>(ih * nf),
            values.begin() + static_cast<std::ptrdiff_t>((ih + 1) * nf)};
}

SpectrumMap::SpectrumMap(Grid grid, std::vector<ScatteringPoint> points)
    : grid_(std::move(grid)), points_(std::move(points)) {
    grid_.validate();
    if (points_.size() != grid_.size())
        throw ValidationError("spectrum map: point count does not match the grid");
}

std::size_t SpectrumMap::singular_count() const {
    std::size_t n = 0;
    for (const auto& p : points_) n += p.singular ? 1 : 0;
    return n;
}

Layer SpectrumMap::mag_db(int out, int in) const {
    check_port(out);
    check_port(in);
    Layer l{grid_.nh(), grid_.nf(), std::vector<double>(points_.size())};
    for (std::size_t k = 0; k < points_.size(); ++k)
        l.values[k] = points_[k].singular ? std::numeric_limits<double>::quiet_NaN()
                                          : to_db(points_[k].s[out][in]);
    return l;
}

Layer SpectrumMap::phase(int out, int in) const {
    check_port(out);
    check_port(in);
    Layer l{grid_.nh(), grid_.nf(), {}};
    l.values.reserve(points_.size());
    std::vector<double> wrapped(grid_.nf());
    for (std::size_t ih = 0; ih < grid_.nh(); ++ih) {
        for (std::size_t jf = 0; jf < grid_.nf(); ++jf) {
            const auto& p = at(ih, jf);
            wrapped[jf] = p.singular ? std::numeric_limits<double>::quiet_NaN() : std::arg(p.s[out][in]);
        }
        const auto un = unwrap_phase(wrapped);
        l.values.insert(l.values.end(), un.begin(), un.end());
    }
    return l;
}

SpectrumMap run_sweep(const SystemModel& model, const Grid& grid, const SweepOptions& opt) {
    grid.validate();
    std::vector<ScatteringEngine> engines;
    engines.reserve(grid.nh());
    for (double h : grid.h_tesla) engines.emplace_back(model, FieldPoint(h));

    std::vector<ScatteringPoint> points(grid.size());
    const std::size_t nf = grid.nf();
    parallel_for(points.size(), opt.threads, [&](std::size_t k) {
        points[k] = engines[k / nf].try_evaluate(grid.f_ghz[k % nf]);
    });
    return SpectrumMap(grid, std::move(points));
}

std::vector<double> unwrap_phase(const std::vector<double>& wrapped) {
    std::vector<double> out(wrapped.size());
    double offset = 0.0;
    double prev_raw = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < wrapped.size(); ++i) {
        const double x = wrapped[i];
        if (!std::isfinite(x)) {
            out[i] = x;
            continue;
        }
        if (std::isfinite(prev_raw)) {
            const double d = x - prev_raw;
            const double dw = wrap_angle(d);
            offset += dw - d;
        }
        out[i] = x + offset;
        prev_raw = x;
    }
    return out;
}

Layer isolation(const SpectrumMap& map) {
    Layer s21 = map.mag_db(1, 0);
    const Layer s12 = map.mag_db(0, 1);
    for (std::size_t k = 0; k < s21.values.size(); ++k) s21.values[k] -= s12.values[k];
    return s21;
}

void write_map_csv(const SpectrumMap& map, std::ostream& os) {
    os << "f_GHz,mu0H_T,re_S11,im_S11,re_S12,im_S12,re_S21,im_S21,re_S22,im_S22\n";
    const auto& g = map.grid();
    for (std::size_t ih = 0; ih < g.nh(); ++ih) {
        for (std::size_t jf = 0; jf < g.nf(); ++jf) {
            const auto& p = map.at(ih, jf);
            os << format_double(g.f_ghz[jf]) << ',' << format_double(g.h_tesla[ih]);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    os << ',' << format_double(p.s[r][c].real()) << ','
                       << format_double(p.s[r][c].imag());
            os << '\n';
        }
    }
}

void write_layer_csv(const Grid& grid, const Layer& layer, const char* name, std::ostream& os) {
    if (layer.nh != grid.nh() || layer.nf != grid.nf())
        throw ValidationError("layer dimensions do not match the grid");
    os << "f_GHz,mu0H_T," << name << '\n';
    for (std::size_t ih = 0; ih < grid.nh(); ++ih)
        for (std::size_t jf = 0; jf < grid.nf(); ++jf)
            os << format_double(grid.f_ghz[jf]) << ',' << format_double(grid.h_tesla[ih]) << ','
               << format_double(layer(ih, jf)) << '\n';
}

}  // namespace cavio
