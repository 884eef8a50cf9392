#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "cavio/model.hpp"
#include "cavio/scattering.hpp"

namespace cavio {

// Frequency (GHz) x field (tesla) sampling; both axes strictly increasing.
struct Grid {
    std::vector<double> f_ghz;
    std::vector<double> h_tesla;

    static Grid linear(double f_lo, double f_hi, std::size_t nf, double h_lo, double h_hi,
                       std::size_t nh);
    static Grid single_field(std::vector<double> f_ghz, double h_tesla);

    std::size_t nf() const noexcept { return f_ghz.size(); }
    std::size_t nh() const noexcept { return h_tesla.size(); }
    std::size_t size() const noexcept { return nf() * nh(); }

    // Throws ValidationError for empty or non-monotone axes.
    void validate() const;
};

// Evenly spaced samples including both ends; n == 1 yields {lo}.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Real-valued layer over a grid, field-major: value(ih, jf).
struct Layer {
    std::size_t nh = 0;
    std::size_t nf = 0;
    std::vector<double> values;

    double operator()(std::size_t ih, std::size_t jf) const { return values[ih * nf + jf]; }
    double& operator()(std::size_t ih, std::size_t jf) { return values[ih * nf + jf]; }
    std::vector<double> row(std::size_t ih) const;
};

class SpectrumMap {
public:
    SpectrumMap(Grid grid, std::vector<ScatteringPoint> points);

    const Grid& grid() const noexcept { return grid_; }
    const ScatteringPoint& at(std::size_t ih, std::size_t jf) const {
        return points_[ih * grid_.nf() + jf];
    }
    const std::vector<ScatteringPoint>& points() const noexcept { return points_; }
    std::size_t singular_count() const;

    // 20 log10 |S[out][in]|; NaN where singular.
    Layer mag_db(int out, int in) const;
    // arg S[out][in], unwrapped along frequency for every field row.
    Layer phase(int out, int in) const;

private:
    Grid grid_;
    std::vector<ScatteringPoint> points_;
};

struct SweepOptions {
    unsigned threads = 1;  // 0 = hardware concurrency
};

SpectrumMap run_sweep(const SystemModel& model, const Grid& grid, const SweepOptions& opt = {});

// Adds 2 pi multiples so successive differences fall in (-pi, pi]. NaN
// samples are kept and skipped when choosing the next offset.
std::vector<double> unwrap_phase(const std::vector<double>& wrapped);

// mag_dB(S21) - mag_dB(S12), pointwise.
Layer isolation(const SpectrumMap& map);

// Long-format CSV of the complex S-matrix, one line per grid point.
void write_map_csv(const SpectrumMap& map, std::ostream& os);
// Long-format CSV of a layer: f_GHz, mu0H_T, <name>.
void write_layer_csv(const Grid& grid, const Layer& layer, const char* name, std::ostream& os);

}  // namespace cavio
