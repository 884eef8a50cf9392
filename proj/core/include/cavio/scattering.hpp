#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "cavio/complex_matrix.hpp"
#include "cavio/model.hpp"

namespace cavio {

using SMatrix = std::array<std::array<Complex, 2>, 2>;

struct ScatteringPoint {
    double f_ghz = 0.0;
    SMatrix s{};            // s[out][in]: s[1][0] is S21
    bool singular = false;  // resolvent could not be solved; s holds NaN
    // 1-norm condition estimate of the resolvent; only set above 1e12.
    double condition = 0.0;

    Complex s11() const { return s[0][0]; }
    Complex s12() const { return s[0][1]; }
    Complex s21() const { return s[1][0]; }
    Complex s22() const { return s[1][1]; }
};

// Caches A, B, C, D for one (model, field) pair and evaluates
// S = C + D [-i w I - A]^{-1} B at arbitrary probe frequencies.
class ScatteringEngine {
public:
    ScatteringEngine(const SystemModel& model, FieldPoint field);

    // Throws SingularSystemError on a singular resolvent.
    ScatteringPoint evaluate(double f_ghz) const;
    // As evaluate(), but flags singular points instead of throwing.
    ScatteringPoint try_evaluate(double f_ghz) const;
    // Complex angular frequency (rad/ns); used for analytic continuation.
    SMatrix evaluate_angular(Complex omega) const;

    const ComplexMatrix& A() const noexcept { return a_; }
    const ComplexMatrix& B() const noexcept { return b_; }
    const ComplexMatrix& C() const noexcept { return c_; }
    const ComplexMatrix& D() const noexcept { return d_; }

private:
    ComplexMatrix a_, b_, c_, d_;
};

// One-shot evaluation of the scattering matrix at (f, field).
ScatteringPoint scattering(const SystemModel& model, double f_ghz, FieldPoint field);

// Zeros of S[out][in] in the complex frequency plane, returned as
// (omega / 2pi) with real part in GHz and imaginary part in GHz
// (negative for decaying zeros). Sorted by real part.
std::vector<Complex> transmission_zeros(const SystemModel& model, FieldPoint field,
                                        int in_port = 0, int out_port = 1);

}  // namespace cavio
