#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cavio/analysis.hpp"
#include "cavio/error.hpp"
#include "cavio/scattering.hpp"
#include "oracles.hpp"

using namespace cavio;

namespace {

constexpr double kPi = std::numbers::pi;

// Smooth pi step centred on f0, from level `from` to `from + delta`.
Trace step_trace(double f0, double from, double delta) {
    Trace t;
    t.f_ghz = linspace(10.0, 12.0, 2001);
    for (double f : t.f_ghz) t.values.push_back(from + 0.5 * delta * (1.0 + std::tanh((f - f0) / 0.004)));
    return t;
}

// ((z+ - z-)/2)^2 in MHz^2 of the two zeros nearest f_ar, minimized in
// modulus over a fine field scan.
std::complex<double> min_pair_product(const SystemModel& model, double f_ar) {
    std::complex<double> best{};
    double best_abs = HUGE_VAL;
    for (double h = 0.39; h <= 0.41; h += 2e-5) {
        auto zs = transmission_zeros(model, FieldPoint(h));
        std::sort(zs.begin(), zs.end(), [&](auto a, auto b) { return std::abs(a - f_ar) < std::abs(b - f_ar); });
        const auto d = 0.5 * (zs[1] - zs[0]);
        const auto q = d * d * 1e6;
        if (std::abs(q) < best_abs) {
            best_abs = std::abs(q);
            best = q;
        }
    }
    return best;
}

// Map whose |S21| has two Lorentzian dips on the hyperbola of a two-level
// avoided crossing with coupling g.
SpectrumMap hyperbola_map(double g_ghz) {
    Grid grid = Grid::linear(10.5, 12.5, 2001, 0.37, 0.43, 61);
    std::vector<ScatteringPoint> pts;
    const double far = 11.5, slope = 28.74, h0 = 0.4, w = 0.01;
    for (double h : grid.h_tesla) {
        const double fm = slope * (h - h0) + far;
        const double c = 0.5 * (fm + far), d = 0.5 * (fm - far);
        const double s = std::sqrt(d * d + g_ghz * g_ghz);
        for (double f : grid.f_ghz) {
            ScatteringPoint p;
            p.f_ghz = f;
            double t = 1.0;
            for (double fk : {c - s, c + s}) t -= 0.95 * w * w / ((f - fk) * (f - fk) + w * w);
            p.s[1][0] = Complex(t, 0.0);
            p.s[0][1] = p.s[1][0];
            pts.push_back(p);
        }
    }
    return SpectrumMap(std::move(grid), std::move(pts));
}

}  // namespace

TEST(Antiresonances, LocatesLorentzianDip) {
    std::vector<double> f = linspace(10.0, 12.0, 2001), m;
    for (double x : f) m.push_back(20.0 * std::log10(1.0 - 0.9 / (1.0 + std::pow((x - 11.2345) / 0.02, 2))));
    const auto dips = find_antiresonances(f, m, {10.5, 12.0});
    ASSERT_EQ(dips.size(), 1u);
    EXPECT_NEAR(dips[0], 11.2345, 2e-5);
    EXPECT_TRUE(find_antiresonances(f, m, {10.5, 11.0}).empty());
    DipOptions deep;
    deep.prominence_db = 40.0;
    EXPECT_TRUE(find_antiresonances(f, m, {10.5, 12.0}, deep).empty());
    EXPECT_THROW(find_antiresonances(f, m, {9.0, 12.0}), ValidationError);
}

TEST(Antiresonances, EmptyCavityDipNear11p5) {
    const auto model = oracle::load_fixture("models/empty_cavity.json");
    const Trace t = magnitude_trace(model, FieldPoint(0.0), 10.5, 12.5, 0.001);
    const auto dips = find_antiresonances(t.f_ghz, t.values, {10.5, 12.5});
    ASSERT_EQ(dips.size(), 1u);
    EXPECT_NEAR(dips[0], 11.497, 2e-3);
    EXPECT_NEAR(bare_antiresonance(model, {10.5, 12.5}), dips[0], 5e-3);
}

TEST(PhaseJump, DirectionFromPreJumpLevel) {
    const auto up = step_trace(11.0, 0.0, kPi);
    auto j = classify_phase_jump(up.f_ghz, up.values, 11.0);
    EXPECT_EQ(j.direction, JumpDirection::Left);
    EXPECT_NEAR(j.f_ghz, 11.0, 1e-3);
    EXPECT_NEAR(j.magnitude, kPi, 1e-6);

    const auto down = step_trace(11.0, kPi, -kPi);
    PhaseJumpOptions absolute;
    absolute.zero_level = 0.0;
    EXPECT_EQ(classify_phase_jump(down.f_ghz, down.values, 11.0, absolute).direction, JumpDirection::Right);
    EXPECT_EQ(classify_phase_jump(down.f_ghz, down.values, 11.0).direction, JumpDirection::Left);
}

TEST(PhaseJump, InvariantUnderOffsetAndRewrap) {
    // A trace with two features: the second starts one half turn above the first.
    Trace t = step_trace(10.6, 0.0, kPi);
    const Trace second = step_trace(11.4, 0.0, -kPi);
    for (std::size_t k = 0; k < t.values.size(); ++k) t.values[k] += second.values[k];
    const auto base1 = classify_phase_jump(t.f_ghz, t.values, 10.6).direction;
    const auto base2 = classify_phase_jump(t.f_ghz, t.values, 11.4).direction;
    EXPECT_NE(base1, base2);
    for (double offset : {0.37, -2.0, 5.0 * kPi}) {
        Trace shifted = t;
        for (auto& v : shifted.values) v = std::remainder(v + offset, 2.0 * kPi);
        EXPECT_EQ(classify_phase_jump(shifted.f_ghz, shifted.values, 10.6).direction, base1);
        EXPECT_EQ(classify_phase_jump(shifted.f_ghz, shifted.values, 11.4).direction, base2);
    }
}

TEST(PhaseJump, RejectsNonPiTransitions) {
    const auto small = step_trace(11.0, 0.0, 0.5);
    EXPECT_THROW(classify_phase_jump(small.f_ghz, small.values, 11.0), TrackingError);
    const auto large = step_trace(11.0, 0.0, 1.8 * kPi);
    EXPECT_THROW(classify_phase_jump(large.f_ghz, large.values, 11.0), TrackingError);
    EXPECT_THROW(classify_phase_jump(small.f_ghz, small.values, 13.0), ValidationError);
}

TEST(PhaseJump, EmptyCavityPattern) {
    const auto model = oracle::load_fixture("models/empty_cavity.json");
    const auto rep = classify_regime(model);
    ASSERT_EQ(rep.mode_jumps.size(), 4u);
    ASSERT_TRUE(rep.ar_jump);
    EXPECT_EQ(rep.mode_jumps[0].direction, rep.mode_jumps[2].direction);
    EXPECT_EQ(rep.mode_jumps[1].direction, rep.mode_jumps[3].direction);
    EXPECT_NE(rep.mode_jumps[0].direction, rep.mode_jumps[1].direction);
    EXPECT_EQ(rep.ar_jump->direction, rep.mode_jumps[1].direction);
    EXPECT_EQ(rep.tags[0], ModeTag::RepulsiveToAR);
    EXPECT_EQ(rep.tags[1], ModeTag::AttractiveToAR);
    EXPECT_EQ(rep.overall, Regime::Uncoupled);
    EXPECT_EQ(rep.excursion_mhz, 0.0);
}

TEST(Excursion, RepulsiveG2MatchesDirectZeroScan) {
    for (const char* name : {"models/row_m10.00_pos1.json", "models/row_m11.40.json"}) {
        const auto model = oracle::load_fixture(name);
        const auto ex = antiresonance_excursion(model);
        const auto direct = min_pair_product(model, ex.f_ar_bare_ghz);
        EXPECT_LT(std::abs(ex.g2_mhz2 - direct), 0.01 * std::abs(ex.g2_mhz2)) << name;
        EXPECT_GT(ex.signed_pull_mhz, 0.0);
        EXPECT_GT(ex.crossing_gap_mhz, ex.crossing_width_mhz);
        EXPECT_EQ(ex.failed_samples, 0u);
        // Half of the 40 mT field window, expressed as magnon detuning.
        EXPECT_NEAR(ex.half_sweep_mhz, 20.0 * model.magnons()[0].gyro_ghz_per_t, 1e-9);
    }
}

TEST(Excursion, AttractivePositionPullsInward) {
    const auto ex = antiresonance_excursion(oracle::load_fixture("models/row_m6.00_pos3.json"));
    EXPECT_LT(ex.signed_pull_mhz, 0.0);
    EXPECT_LT(ex.crossing_gap_mhz, ex.crossing_width_mhz);
    // Frozen regression values of the metric.
    EXPECT_NEAR(ex.excursion_mhz, 41.07, 0.05);
    EXPECT_NEAR(ex.f_ar_bare_ghz, 11.4755, 1e-3);
}

TEST(Excursion, ScalesWithCouplingSquared) {
    const auto tmpl = oracle::load_fixture("models/row_m10.00_pos1.json");
    const auto small = antiresonance_excursion(two_coupling_model(tmpl, 2, 20.0, 3, 0.0));
    const auto twice = antiresonance_excursion(two_coupling_model(tmpl, 2, 40.0, 3, 0.0));
    EXPECT_NEAR(twice.excursion_mhz / small.excursion_mhz, 4.0, 0.2);
}

TEST(Excursion, RequiresSingleMagnon) {
    const auto two = oracle::load_fixture("models/two_magnon_pos3.json");
    EXPECT_THROW(antiresonance_excursion(two), ValidationError);
    ExcursionOptions bad;
    bad.field_samples = 3;
    EXPECT_THROW(antiresonance_excursion(oracle::load_fixture("models/row_m6.00_pos3.json"), bad),
                 ValidationError);
}

TEST(Regime, FixtureLabels) {
    RegimeOptions opt;
    opt.phase_tags = false;
    const auto pos1 = classify_regime(oracle::load_fixture("models/row_m10.00_pos1.json"), opt);
    const auto pos3 = classify_regime(oracle::load_fixture("models/row_m6.00_pos3.json"), opt);
    EXPECT_EQ(pos1.overall, Regime::Repulsion);
    EXPECT_EQ(pos3.overall, Regime::Attraction);
    EXPECT_DOUBLE_EQ(pos1.threshold_mhz, 20.0);
    for (const char* row : {"models/row_m8.33.json", "models/row_m5.08.json"})
        EXPECT_EQ(classify_regime(oracle::load_fixture(row), opt).overall, Regime::Uncoupled) << row;
}

TEST(Regime, ZeroCouplingIsUncoupled) {
    auto model = oracle::load_fixture("models/row_m10.00_pos1.json");
    auto mags = model.magnons();
    for (auto& c : mags[0].couplings) c.g_mhz = 0.0;
    RegimeOptions opt;
    opt.phase_tags = false;
    const auto rep = classify_regime(model.with_magnons(mags), opt);
    EXPECT_EQ(rep.overall, Regime::Uncoupled);
    EXPECT_LT(rep.excursion_mhz, 1e-6);
}

TEST(Suppression, TwoCouplingModelZeroesOthers) {
    const auto tmpl = oracle::load_fixture("models/row_m6.00_pos3.json");
    const auto m = two_coupling_model(tmpl, 3, 7.0, 2, 50.0);
    const auto& c = m.magnons()[0].couplings;
    EXPECT_EQ(c[0].g_mhz, 0.0);
    EXPECT_EQ(c[1].g_mhz, 0.0);
    EXPECT_EQ(c[2].g_mhz, 50.0);
    EXPECT_EQ(c[3].g_mhz, 7.0);
    EXPECT_EQ(c[3].theta_rad, tmpl.magnons()[0].couplings[3].theta_rad);
    EXPECT_THROW(two_coupling_model(tmpl, 2, 1.0, 2, 1.0), ValidationError);
    EXPECT_THROW(two_coupling_model(tmpl, 9, 1.0, 2, 1.0), ValidationError);
}

TEST(Suppression, MinimumCancelsTheReferencePull) {
    const auto tmpl = oracle::load_fixture("models/row_m6.00_pos3.json");
    SuppressionOptions opt;
    opt.scan_points = 41;
    opt.threads = 4;
    const auto res = suppression_ratio(tmpl, 3, 2, opt);
    const double alone =
        antiresonance_excursion(two_coupling_model(tmpl, 3, 0.0, 2, opt.g_ref_mhz)).excursion_mhz;
    EXPECT_LT(res.residual_excursion_mhz, 0.01 * alone);
    EXPECT_GT(res.ratio, 1.0);
    EXPECT_LT(res.ratio, 1.3);
    for (const auto& m : res.minima) EXPECT_GE(m.excursion_mhz, res.residual_excursion_mhz);
}

TEST(EffectiveCoupling, RecoversHyperbolaCoupling) {
    const auto fit = effective_ar_coupling(hyperbola_map(0.15));
    EXPECT_TRUE(fit.split);
    EXPECT_NEAR(fit.g_mhz, 150.0, 1.0);
    EXPECT_NEAR(fit.slope_ghz_per_t, 28.74, 0.1);
    EXPECT_NEAR(fit.f_ar_ghz, 11.5, 1e-3);
    EXPECT_NEAR(fit.h0_tesla, 0.4, 1e-4);
}

TEST(EffectiveCoupling, NoSplittingGivesZero) {
    auto model = oracle::load_fixture("models/two_magnon_pos3.json");
    auto mags = model.magnons();
    for (auto& m : mags)
        for (auto& c : m.couplings) c.g_mhz = 0.0;
    const auto map = run_sweep(model.with_magnons(mags), Grid::linear(10.5, 12.5, 801, 0.37, 0.43, 13));
    const auto fit = effective_ar_coupling(map);
    EXPECT_FALSE(fit.split);
    EXPECT_EQ(fit.g_mhz, 0.0);
}
