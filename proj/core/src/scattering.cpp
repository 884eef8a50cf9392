#include "cavio/scattering.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cavio/error.hpp"
#include "cavio/linear_solve.hpp"
#include "cavio/units.hpp"

namespace cavio {
namespace {

constexpr double kReportCondition = 1e12;

SMatrix nan_matrix() {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SMatrix s;
    for (auto& r : s) r.fill(Complex(nan, nan));
    return s;
}

void check_port(int p) {
    if (p != 0 && p != 1) throw ValidationError("port index must be 0 or 1");
}

}  // namespace

ScatteringEngine::ScatteringEngine(const SystemModel& model, FieldPoint field)
    : a_(build_A(model, field)),
      b_(build_B(model)),
      c_(build_C(model.xi())),
      d_(build_D(c_, b_)) {}

SMatrix ScatteringEngine::evaluate_angular(Complex omega) const {
    const std::size_t n = a_.rows();
    ComplexMatrix r(n, n);
    const Complex diag = Complex(0.0, -1.0) * omega;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) r(i, j) = (i == j ? diag : Complex{}) - a_(i, j);
    const ComplexMatrix x = LuDecomposition(std::move(r)).solve(b_);
    const ComplexMatrix s = c_ + d_ * x;
    return {{{s(0, 0), s(0, 1)}, {s(1, 0), s(1, 1)}}};
}

ScatteringPoint ScatteringEngine::evaluate(double f_ghz) const {
    if (!(f_ghz > 0.0) || !std::isfinite(f_ghz))
        throw ValidationError("scattering: probe frequency must be finite and > 0");
    const std::size_t n = a_.rows();
    ComplexMatrix r(n, n);
    const Complex diag(0.0, -units::ghz_to_angular(f_ghz));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) r(i, j) = (i == j ? diag : Complex{}) - a_(i, j);

    ScatteringPoint pt;
    pt.f_ghz = f_ghz;
    LuDecomposition lu(std::move(r));
    const ComplexMatrix s = c_ + d_ * lu.solve(b_);
    pt.s = {{{s(0, 0), s(0, 1)}, {s(1, 0), s(1, 1)}}};
    if (lu.max_pivot() > kReportCondition * lu.min_pivot()) {
        const double cond = lu.condition_estimate();
        if (cond > kReportCondition) pt.condition = cond;
    }
    return pt;
}

ScatteringPoint ScatteringEngine::try_evaluate(double f_ghz) const {
    try {
        return evaluate(f_ghz);
    } catch (const SingularSystemError&) {
        ScatteringPoint pt;
        pt.f_ghz = f_ghz;
        pt.s = nan_matrix();
        pt.singular = true;
        pt.condition = std::numeric_limits<double>::infinity();
        return pt;
    }
}

ScatteringPoint scattering(const SystemModel& model, double f_ghz, FieldPoint field) {
    return ScatteringEngine(model, field).evaluate(f_ghz);
}

std::vector<Complex> transmission_zeros(const SystemModel& model, FieldPoint field, int in_port,
                                        int out_port) {
    check_port(in_port);
    check_port(out_port);
    const ScatteringEngine eng(model, field);
    const auto& a = eng.A();
    const std::size_t n = a.rows();

    // h(l) = r + d (l - A)^{-1} c with l = -i omega.
    const Complex r = eng.C()(out_port, in_port);
    Eigen::VectorXcd c(n);
    Eigen::RowVectorXcd d(n);
    Eigen::MatrixXcd ea(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        c(i) = eng.B()(i, in_port);
        d(i) = eng.D()(out_port, i);
        for (std::size_t j = 0; j < n; ++j) ea(i, j) = a(i, j);
    }

    Eigen::MatrixXcd k;
    bool drop_origin = false;
    const double scale = std::max(c.norm() * d.norm(), std::numeric_limits<double>::min());
    if (std::abs(r) > 1e-14) {
        // Zeros are the eigenvalues of A - c d / r.
        k = ea - c * d / r;
    } else {
        const Complex dc = d * c;
        if (std::abs(dc) <= 1e-12 * scale)
            throw NumericalError(
                "transmission_zeros: direct feedthrough and first Markov parameter both vanish");
        // Projected pencil: (I - c d / (d c)) A has the zeros plus one eigenvalue at 0.
        k = (Eigen::MatrixXcd::Identity(n, n) - c * d / dc) * ea;
        drop_origin = true;
    }

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(k, false);
    if (es.info() != Eigen::Success) throw NumericalError("transmission_zeros: eigensolver failed");
    std::vector<Complex> lambdas(es.eigenvalues().data(), es.eigenvalues().data() + n);
    if (drop_origin) {
        auto it = std::min_element(lambdas.begin(), lambdas.end(),
                                   [](Complex x, Complex y) { return std::abs(x) < std::abs(y); });
        lambdas.erase(it);
    }
    std::vector<Complex> zeros;
    zeros.reserve(lambdas.size());
    for (Complex l : lambdas) zeros.push_back(Complex(0.0, 1.0) * l / units::kTwoPi);
    std::sort(zeros.begin(), zeros.end(), [](Complex x, Complex y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return zeros;
}

}  // namespace cavio
