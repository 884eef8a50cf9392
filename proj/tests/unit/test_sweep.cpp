#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cavio/error.hpp"
#include "cavio/sweep.hpp"
#include "oracles.hpp"

using namespace cavio;

TEST(Grid, ValidatesAxes) {
    EXPECT_NO_THROW(Grid::linear(1.0, 2.0, 3, 0.0, 0.1, 2).validate());
    Grid g{{1.0, 1.0}, {0.0}};
    EXPECT_THROW(g.validate(), ValidationError);
    g = Grid{{}, {0.0}};
    EXPECT_THROW(g.validate(), ValidationError);
    g = Grid{{1.0, 2.0}, {-0.1}};
    EXPECT_THROW(g.validate(), ValidationError);
    g = Grid{{0.0, 2.0}, {0.1}};
    EXPECT_THROW(g.validate(), ValidationError);
}

TEST(Sweep, PointsMatchDirectEvaluation) {
    const auto model = oracle::load_fixture("models/row_m10.00_pos1.json");
    const Grid grid = Grid::linear(11.0, 12.0, 21, 0.38, 0.42, 5);
    const auto map = run_sweep(model, grid);
    for (std::size_t ih = 0; ih < grid.nh(); ++ih)
        for (std::size_t jf = 0; jf < grid.nf(); ++jf) {
            const auto ref = oracle::reference_s(model, grid.f_ghz[jf], grid.h_tesla[ih]);
            EXPECT_LT(std::abs(map.at(ih, jf).s21() - ref[1][0]), 1e-11);
            EXPECT_LT(std::abs(map.at(ih, jf).s12() - ref[0][1]), 1e-11);
        }
    EXPECT_EQ(map.singular_count(), 0u);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
    const auto model = oracle::load_fixture("models/row_m6.00_pos3.json");
    const Grid grid = Grid::linear(11.0, 12.0, 101, 0.38, 0.42, 23);
    const auto one = run_sweep(model, grid, {1});
    for (unsigned t : {2u, 4u, 8u}) {
        const auto many = run_sweep(model, grid, {t});
        for (std::size_t k = 0; k < one.points().size(); ++k) {
            EXPECT_EQ(one.points()[k].s, many.points()[k].s);
        }
    }
}

TEST(Sweep, EmptyCavityPhaseHasSixTransitions) {
    // One pi-scale step per cavity mode (3.78, 7.78, 15.22, 16.08 GHz) and one
    // per antiresonance (8.57, 11.50 GHz), 1 MHz sampling.
    const auto model = oracle::load_fixture("models/empty_cavity.json");
    const auto map = run_sweep(model, Grid::linear(3.0, 17.0, 14001, 0.0, 0.0, 1));
    const auto phase = map.phase(1, 0).row(0);
    EXPECT_EQ(oracle::count_transitions(phase, 2.5, 300), 6u);
}

TEST(Sweep, IsolationFlipsSignUnderPortSwap) {
    const auto model = oracle::load_fixture("models/row_m10.00_pos1.json");
    const Grid grid = Grid::linear(11.0, 12.0, 51, 0.39, 0.41, 3);
    const auto iso = isolation(run_sweep(model, grid));
    const auto swapped = isolation(run_sweep(model.port_swapped(), grid));
    ASSERT_EQ(iso.values.size(), swapped.values.size());
    for (std::size_t k = 0; k < iso.values.size(); ++k) EXPECT_NEAR(iso.values[k], -swapped.values[k], 1e-9);
}

TEST(Sweep, MagnitudeLayerIsDecibels) {
    const auto model = oracle::load_fixture("models/empty_cavity.json");
    const Grid grid = Grid::single_field({5.0, 11.0}, 0.0);
    const auto map = run_sweep(model, grid);
    const auto mag = map.mag_db(1, 0);
    EXPECT_NEAR(mag(0, 1), 20.0 * std::log10(std::abs(map.at(0, 1).s21())), 1e-12);
    EXPECT_EQ(mag.row(0).size(), 2u);
}

TEST(Sweep, SingularPointsBecomeNaN) {
    CavityMode c{5.0, 0.0, {0.0, 0.0}, {0.0, 0.0}};
    const SystemModel model({c}, {});
    const auto map = run_sweep(model, Grid::single_field({4.9, 5.0, 5.1}, 0.0));
    EXPECT_EQ(map.singular_count(), 1u);
    EXPECT_TRUE(std::isnan(map.mag_db(1, 0)(0, 1)));
}

TEST(Sweep, CsvLayout) {
    const auto model = oracle::load_fixture("models/empty_cavity.json");
    const Grid grid = Grid::linear(5.0, 6.0, 3, 0.0, 0.1, 2);
    const auto map = run_sweep(model, grid);
    std::ostringstream os;
    write_map_csv(map, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "f_GHz,mu0H_T,re_S11,im_S11,re_S12,im_S12,re_S21,im_S21,re_S22,im_S22");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 6u);

    std::ostringstream ls;
    write_layer_csv(grid, map.mag_db(1, 0), "S21_dB", ls);
    EXPECT_EQ(ls.str().substr(0, ls.str().find('\n')), "f_GHz,mu0H_T,S21_dB");
    Layer wrong{1, 1, {0.0}};
    EXPECT_THROW(write_layer_csv(grid, wrong, "x", ls), ValidationError);
}
