#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cavio/error.hpp"
#include "cavio/model.hpp"
#include "cavio/units.hpp"
#include "oracles.hpp"

using namespace cavio;

namespace {

constexpr double kPi = std::numbers::pi;

SystemModel one_mode_one_magnon(ModelOptions opt = {}) {
    CavityMode c{11.0, 10.0, {2.0, 3.0}, {0.1, -0.2}};
    MagnonMode m;
    m.k_m_mhz = 5.0;
    m.couplings = {MagnonCoupling{40.0, 0.7}};
    return SystemModel({c}, {m}, opt);
}

}  // namespace

TEST(Model, RejectsMismatchedCouplingCount) {
    CavityMode c{11.0, 10.0, {1.0, 1.0}, {0.0, 0.0}};
    MagnonMode m;
    m.couplings = {MagnonCoupling{1.0, 0.0}, MagnonCoupling{1.0, 0.0}};
    EXPECT_THROW(SystemModel({c}, {m}), ValidationError);
}

TEST(Model, RejectsInvalidParameters) {
    CavityMode good{11.0, 10.0, {1.0, 1.0}, {0.0, 0.0}};
    auto bad = good;
    bad.gamma_int_mhz = -1.0;
    EXPECT_THROW(SystemModel({bad}, {}), ValidationError);
    bad = good;
    bad.f_ghz = 0.0;
    EXPECT_THROW(SystemModel({bad}, {}), ValidationError);
    EXPECT_THROW(SystemModel({}, {}), ValidationError);
    ModelOptions opt;
    opt.xi = 1.5;
    EXPECT_THROW(SystemModel({good}, {}, opt), ValidationError);
    MagnonMode m;
    m.couplings = {MagnonCoupling{1.0, 4.0}};
    EXPECT_THROW(SystemModel({good}, {m}), ValidationError);
    m.couplings = {MagnonCoupling{-1.0, 0.0}};
    EXPECT_THROW(SystemModel({good}, {m}), ValidationError);
}

TEST(Model, SymmetricCavityChecksPortPhases) {
    ModelOptions opt;
    opt.symmetric_cavity = true;
    CavityMode c{11.0, 10.0, {1.0, 1.0}, {-1.571, 1.571}};
    EXPECT_NO_THROW(SystemModel({c}, {}, opt));
    c.phi_ext_rad = {0.0, 1.0};
    EXPECT_THROW(SystemModel({c}, {}, opt), ValidationError);
}

TEST(Model, FieldMustBeNonNegative) {
    EXPECT_THROW(FieldPoint(-0.1), ValidationError);
    EXPECT_THROW(FieldPoint(NAN), ValidationError);
    EXPECT_DOUBLE_EQ(FieldPoint(0.4).tesla(), 0.4);
}

TEST(Model, ConventionNamesRoundTrip) {
    for (auto c : {DiagonalConvention::PaperLiteral, DiagonalConvention::TotalDecay})
        EXPECT_EQ(parse_diagonal_convention(to_string(c)), c);
    for (auto c : {CouplingScale::AsPrintedMatrix, CouplingScale::HalfFromHamiltonian})
        EXPECT_EQ(parse_coupling_scale(to_string(c)), c);
    EXPECT_EQ(parse_diagonal_convention("paper-literal"), DiagonalConvention::PaperLiteral);
    EXPECT_THROW(parse_diagonal_convention("bogus"), ValidationError);
}

TEST(Model, MagnonFrequencyAndDecay) {
    MagnonMode m;
    EXPECT_NEAR(magnon_frequency(m, FieldPoint(0.4)), 11.496, 1e-12);
    // 2 alpha f_m, f_m in MHz.
    EXPECT_NEAR(magnon_decay(m, 11.496), 2.0 * 4e-4 * 11496.0, 1e-9);
    m.k_m_mhz = 10.0;
    EXPECT_DOUBLE_EQ(magnon_decay(m, 11.496), 10.0);
}

TEST(Model, InternalPhaseConvention) {
    using C = std::complex<double>;
    EXPECT_NEAR(internal_phase(C(1.0), C(0.0)), 0.0, 1e-15);
    EXPECT_NEAR(internal_phase(C(0.0), C(1.0)), kPi / 2.0, 1e-15);
    EXPECT_NEAR(internal_phase(C(-1.0), C(0.0)), kPi, 1e-15);
    EXPECT_THROW(internal_phase(C(0.0), C(0.0)), DegeneratePhaseError);
    // Ix + i Iy = 1 + i*(i) = 0.
    EXPECT_THROW(internal_phase(C(1.0), C(0.0, 1.0)), DegeneratePhaseError);
}

TEST(Model, BuildAEntries) {
    const auto model = one_mode_one_magnon();
    const ComplexMatrix a = build_A(model, FieldPoint(0.4));
    using units::ghz_to_angular;
    using units::mhz_to_angular;
    const Complex i{0.0, 1.0};
    EXPECT_NEAR(std::abs(a(0, 0) - (-i * ghz_to_angular(11.0) - mhz_to_angular(15.0) / 2.0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(a(1, 1) - (-i * ghz_to_angular(11.496) - mhz_to_angular(5.0) / 2.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(a(0, 1) - i * mhz_to_angular(40.0) * std::exp(i * 0.7)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(a(1, 0) - i * mhz_to_angular(40.0) * std::exp(-i * 0.7)), 0.0, 1e-15);
}

TEST(Model, ConventionsChangeOnlyTheirEntries) {
    ModelOptions lit;
    lit.diagonal = DiagonalConvention::PaperLiteral;
    lit.coupling_scale = CouplingScale::HalfFromHamiltonian;
    const auto total = build_A(one_mode_one_magnon(), FieldPoint(0.4));
    const auto literal = build_A(one_mode_one_magnon(lit), FieldPoint(0.4));
    EXPECT_NEAR(literal(0, 0).real(), -units::mhz_to_angular(10.0) / 2.0, 1e-15);
    EXPECT_DOUBLE_EQ(literal(0, 0).imag(), total(0, 0).imag());
    EXPECT_NEAR(std::abs(literal(0, 1) - 0.5 * total(0, 1)), 0.0, 1e-16);
    EXPECT_EQ(literal(1, 1), total(1, 1));
}

TEST(Model, BuildBAndDRelation) {
    const auto model = one_mode_one_magnon();
    const ComplexMatrix b = build_B(model);
    ASSERT_EQ(b.rows(), 2u);
    ASSERT_EQ(b.cols(), 2u);
    const Complex i{0.0, 1.0};
    EXPECT_NEAR(std::abs(b(0, 1) - std::sqrt(units::mhz_to_angular(3.0)) * std::exp(-0.2 * i)), 0.0, 1e-15);
    EXPECT_EQ(b(1, 0), Complex(0.0));
    const ComplexMatrix c = build_C(0.25);
    EXPECT_DOUBLE_EQ(c(0, 0).real(), std::sqrt(0.75));
    EXPECT_DOUBLE_EQ(c(0, 1).real(), 0.5);
    const ComplexMatrix d = build_D(c, b);
    const ComplexMatrix expect = Complex(-1.0) * (c * b.adjoint());
    EXPECT_EQ(d, expect);
    EXPECT_THROW(build_C(-0.1), ValidationError);
}

TEST(Model, PortSwapAndCopies) {
    const auto model = one_mode_one_magnon();
    const auto sw = model.port_swapped();
    EXPECT_DOUBLE_EQ(sw.cavity_modes()[0].gamma_ext_mhz[0], 3.0);
    EXPECT_DOUBLE_EQ(sw.cavity_modes()[0].phi_ext_rad[1], 0.1);
    EXPECT_EQ(sw.port_swapped(), model);
    EXPECT_EQ(model.without_magnons().magnon_count(), 0u);
    EXPECT_EQ(model.dimension(), 2u);
    ModelOptions opt;
    opt.xi = 0.1;
    EXPECT_DOUBLE_EQ(model.with_options(opt).xi(), 0.1);
}

TEST(Model, FixtureLoads) {
    const auto m = oracle::load_fixture("models/empty_cavity.json");
    EXPECT_EQ(m.cavity_count(), 4u);
    EXPECT_EQ(m.magnon_count(), 0u);
    EXPECT_DOUBLE_EQ(m.cavity_modes()[0].gamma_ext_mhz[0], 1.186);
}
