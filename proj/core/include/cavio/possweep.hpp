#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cavio/analysis.hpp"
#include "cavio/model.hpp"

namespace cavio {

// Per-mode parameters of one sphere position.
struct PositionMode {
    double f_ghz = 0.0;
    double g_mhz = 0.0;
    double phi0_rad = 0.0;
    double phi1_rad = 0.0;
    double theta_rad = 0.0;

    friend bool operator==(const PositionMode&, const PositionMode&) = default;
};

struct PositionRow {
    double y_mm = 0.0;
    std::vector<PositionMode> modes;

    friend bool operator==(const PositionRow&, const PositionRow&) = default;
};

// Rows are stored in increasing y regardless of input order.
class PositionTable {
public:
    explicit PositionTable(std::vector<PositionRow> rows);

    const std::vector<PositionRow>& rows() const noexcept { return rows_; }
    std::size_t mode_count() const noexcept { return rows_.front().modes.size(); }
    double y_min() const noexcept { return rows_.front().y_mm; }
    double y_max() const noexcept { return rows_.back().y_mm; }

private:
    std::vector<PositionRow> rows_;
};

struct InterpolatedPosition {
    double y_mm = 0.0;
    std::vector<PositionMode> modes;
    bool node = false;  // y coincides with a table row
};

// Monotone piecewise-cubic (PCHIP) in f, g and the phases, the phases taken
// on the unwrapped circle and wrapped back into (-pi, pi]. Table nodes are
// reproduced exactly. Fewer than four rows fall back to linear segments.
InterpolatedPosition interpolate_position(const PositionTable& table, double y_mm);

// Cavity rates and magnon settings from `base`; frequencies, port phases and
// couplings from the position.
SystemModel position_model(const SystemModel& base, const InterpolatedPosition& pos);

struct ThetaFlag {
    std::size_t mode = 0;
    double y_lo = 0.0;
    double y_hi = 0.0;
    double delta_rad = 0.0;  // unwrapped change between the two nodes
};

// Node intervals where some internal phase changes by more than `limit`.
std::vector<ThetaFlag> theta_flags(const PositionTable& table, double limit_rad = 1.0);

struct RegimeTransition {
    double y_mm = 0.0;
    Regime from = Regime::Uncoupled;
    Regime to = Regime::Uncoupled;
};

struct ProfileOptions {
    double step_mm = 0.01;
    double field_t = 0.4;
    double half_field_window_t = 0.02;
    RegimeOptions regime = [] {
        RegimeOptions r;
        r.phase_tags = false;
        return r;
    }();
    double bisection_tol_mm = 1e-4;
    double theta_flag_rad = 1.0;
    unsigned threads = 1;
};

struct RegimeProfile {
    std::vector<double> y_mm;
    std::vector<std::optional<Regime>> labels;  // empty where the analysis failed
    std::vector<double> signed_pull_mhz;        // NaN where the analysis failed
    std::vector<std::string> errors;            // per position, empty on success
    std::vector<std::vector<double>> g_mhz;     // [mode][position]
    // Where the coupling switches between repulsion and attraction (sign
    // change of the signed pull), bisected on the interpolated model.
    std::vector<RegimeTransition> boundaries;
    // Every change of the three-valued label, bisected likewise.
    std::vector<RegimeTransition> label_changes;
    std::vector<ThetaFlag> theta_flags;
    double threshold_mhz = 0.0;
};

RegimeProfile regime_profile(const PositionTable& table, const SystemModel& base,
                             const ProfileOptions& options = {});

}  // namespace cavio
