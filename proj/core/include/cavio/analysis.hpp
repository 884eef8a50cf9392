#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "cavio/model.hpp"
#include "cavio/sweep.hpp"

namespace cavio {

struct FrequencyWindow {
    double lo = 10.5;  // GHz
    double hi = 12.5;
};

struct FieldWindow {
    double lo = 0.38;  // T
    double hi = 0.42;
};

// ---------------------------------------------------------------- dips

struct DipOptions {
    double prominence_db = 3.0;
};

// Interior local minima of a dB trace inside `window` whose topographic
// prominence reaches the threshold, refined by a three-point parabola.
std::vector<double> find_antiresonances(const std::vector<double>& f_ghz,
                                        const std::vector<double>& mag_db, FrequencyWindow window,
                                        const DipOptions& options = {});

// ---------------------------------------------------------- phase jumps

enum class JumpDirection { Left, Right };
std::string_view to_string(JumpDirection d);

struct PhaseJump {
    double f_ghz = 0.0;
    JumpDirection direction = JumpDirection::Left;
    double magnitude = 0.0;  // |after - before|, rad
    double before = 0.0;
    double after = 0.0;
};

struct PhaseJumpOptions {
    double search_radius_ghz = 0.1;
    double flank_ghz = 0.15;
    // Phase level read as "0". Defaults to the first sample of the trace.
    std::optional<double> zero_level;
};

// Locates the steepest pi-scale transition within the search radius of f0.
// The pre-jump level counted in half turns from the zero level decides the
// direction: even -> Left (0 -> pi), odd -> Right (pi -> 0).
PhaseJump classify_phase_jump(const std::vector<double>& f_ghz, const std::vector<double>& phase,
                              double f0_ghz, const PhaseJumpOptions& options = {});

struct Trace {
    std::vector<double> f_ghz;
    std::vector<double> values;
};

// Unwrapped arg S[out][in] along a uniform frequency grid.
Trace phase_trace(const SystemModel& model, FieldPoint field, double f_lo, double f_hi, double step_ghz,
                  int out_port = 1, int in_port = 0);
Trace magnitude_trace(const SystemModel& model, FieldPoint field, double f_lo, double f_hi,
                      double step_ghz, int out_port = 1, int in_port = 0);

// --------------------------------------------------------- excursion

struct ExcursionOptions {
    FrequencyWindow f_window{};
    FieldWindow h_window{};
    std::size_t field_samples = 41;
    double max_failure_fraction = 0.2;
};

struct ZeroPairSample {
    double h_tesla = 0.0;
    bool tracked = false;
    std::complex<double> lower{};  // GHz, complex
    std::complex<double> upper{};
};

struct ExcursionResult {
    double f_ar_bare_ghz = 0.0;
    // Effective antiresonance-magnon coupling squared, MHz^2. Its real part
    // is positive for level repulsion, negative for attraction.
    std::complex<double> g2_mhz2{};
    double half_sweep_mhz = 0.0;  // magnon detuning at the window edge
    double signed_pull_mhz = 0.0;
    double excursion_mhz = 0.0;
    double crossing_gap_mhz = 0.0;    // real splitting at the crossing
    double crossing_width_mhz = 0.0;  // imaginary splitting at the crossing
    double fit_residual_mhz2 = 0.0;
    std::size_t failed_samples = 0;
    std::vector<double> discontinuities;  // fields where a branch jumps
    std::vector<ZeroPairSample> samples;
};

// Frequency of the transmission zero of the magnon-free model inside the
// window (the one nearest the real axis). Throws TrackingError if none.
double bare_antiresonance(const SystemModel& model, FrequencyWindow window);

// Tracks the two S21 zeros nearest the bare antiresonance across the field
// window. Near the crossing they obey (w - w_ar)(w - w_m) = G^2; fitting
// ((z+ - z-)/2)^2 as a quadratic in H yields G^2. The excursion is the pull
// |Re G^2| / half_sweep the coupling exerts on the antiresonance at the
// window edge.
ExcursionResult antiresonance_excursion(const SystemModel& model, const ExcursionOptions& options = {});

// ------------------------------------------------------------ regime

enum class ModeTag { AttractiveToAR, RepulsiveToAR };
enum class Regime { Attraction, Repulsion, Uncoupled };
std::string_view to_string(ModeTag t);
std::string_view to_string(Regime r);

struct RegimeOptions {
    ExcursionOptions excursion{};
    bool phase_tags = true;
    PhaseJumpOptions jump{};
    double grid_step_mhz = 0.0;  // 0: window width / 1000
};

struct RegimeReport {
    double f_ar_ghz = 0.0;
    std::vector<ModeTag> tags;
    std::vector<PhaseJump> mode_jumps;
    std::optional<PhaseJump> ar_jump;
    Regime overall = Regime::Uncoupled;
    double excursion_mhz = 0.0;
    double signed_pull_mhz = 0.0;
    double threshold_mhz = 0.0;
    double crossing_gap_mhz = 0.0;
    double crossing_width_mhz = 0.0;
    std::complex<double> g2_mhz2{};
};

double regime_threshold(const SystemModel& model, double f_ar_ghz, const RegimeOptions& options);

// Below threshold -> Uncoupled; otherwise Repulsion when the crossing gap
// exceeds the split width (Re G^2 > 0), Attraction when it does not.
RegimeReport classify_regime(const SystemModel& model, const RegimeOptions& options = {});

// ------------------------------------------------------- suppression

struct SuppressionOptions {
    double g_ref_mhz = 50.0;
    double ratio_lo = 0.01;
    double ratio_hi = 20.0;
    std::size_t scan_points = 121;
    double log_tolerance = 1e-7;
    unsigned threads = 1;
    ExcursionOptions excursion{};
};

struct SuppressionMinimum {
    double ratio = 0.0;
    double excursion_mhz = 0.0;
};

struct SuppressionResult {
    std::size_t varied = 0;
    std::size_t reference = 0;
    double g_ref_mhz = 0.0;
    double ratio = 0.0;
    double residual_excursion_mhz = 0.0;
    std::vector<SuppressionMinimum> minima;  // every local minimum of the scan
};

// Template with every coupling zeroed except modes u (g_u) and w (g_w).
SystemModel two_coupling_model(const SystemModel& tmpl, std::size_t u, double g_u_mhz, std::size_t w,
                               double g_w_mhz);

// Ratio g_u / g_w minimizing the excursion, by log scan + golden section.
SuppressionResult suppression_ratio(const SystemModel& tmpl, std::size_t varied, std::size_t reference,
                                    const SuppressionOptions& options = {});

// How much stronger mode b acts on the antiresonance than mode a.
struct InfluenceRatio {
    // g_a / g_b needed to cancel the same reference coupling.
    double coupling_reading = 0.0;
    // excursion(b alone) / excursion(a alone) at equal couplings g_ref.
    double excursion_reading = 0.0;
    SuppressionResult a_vs_reference;
    SuppressionResult b_vs_reference;
};

InfluenceRatio influence_ratio(const SystemModel& tmpl, std::size_t a, std::size_t b, std::size_t reference,
                               const SuppressionOptions& options = {});

// ------------------------------------------------ effective coupling

struct EffectiveCouplingOptions {
    std::optional<FrequencyWindow> f_window;  // default: the map's frequency span
    DipOptions dips{};
    double slope_guess_ghz_per_t = 28.74;
    std::size_t min_rows = 6;
};

struct EffectiveCoupling {
    double g_mhz = 0.0;
    double sigma_mhz = 0.0;
    double half_min_separation_mhz = 0.0;
    double f_ar_ghz = 0.0;
    double slope_ghz_per_t = 0.0;
    double h0_tesla = 0.0;
    std::size_t rows_used = 0;
    bool split = false;
};

// Two-level avoided-crossing fit of the rows that show exactly two dips.
EffectiveCoupling effective_ar_coupling(const SpectrumMap& map, const EffectiveCouplingOptions& options = {});

}  // namespace cavio
