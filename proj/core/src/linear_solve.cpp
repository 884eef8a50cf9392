#include "cavio/linear_solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cavio/error.hpp"

namespace cavio {
namespace {

double norm1(const ComplexMatrix& m) {
    double best = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) sum += std::abs(m(r, c));
        best = std::max(best, sum);
    }
    return best;
}

}  // namespace

LuDecomposition::LuDecomposition(ComplexMatrix m) : lu_(std::move(m)) {
    if (!lu_.square()) throw ValidationError("solve_linear: matrix is not square");
    if (!lu_.all_finite()) throw ValidationError("solve_linear: matrix has non-finite entries");
    const std::size_t n = lu_.rows();
    norm1_ = norm1(lu_);
    const double tiny = static_cast<double>(std::max<std::size_t>(n, 1)) *
                        std::numeric_limits<double>::epsilon() * lu_.norm_inf();
    perm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    min_pivot_ = std::numeric_limits<double>::infinity();
    max_pivot_ = 0.0;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t r = k + 1; r < n; ++r) {
            const double v = std::abs(lu_(r, k));
            if (v > best) {
                best = v;
                p = r;
            }
        }
        if (best == 0.0 || best <= tiny) {
            std::ostringstream os;
            os << "singular system: pivot magnitude " << best << " at column " << k;
            throw SingularSystemError(os.str(), best);
        }
        min_pivot_ = std::min(min_pivot_, best);
        max_pivot_ = std::max(max_pivot_, best);
        if (p != k) {
            std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
            std::swap(perm_[k], perm_[p]);
        }
        const Complex pivot = lu_(k, k);
        for (std::size_t r = k + 1; r < n; ++r) {
            const Complex factor = lu_(r, k) / pivot;
            lu_(r, k) = factor;
            if (factor == Complex{}) continue;
            for (std::size_t c = k + 1; c < n; ++c) lu_(r, c) -= factor * lu_(k, c);
        }
    }
}

ComplexMatrix LuDecomposition::solve(const ComplexMatrix& rhs) const {
    const std::size_t n = lu_.rows();
    if (rhs.rows() != n) throw ValidationError("solve_linear: RHS row count does not match matrix");
    ComplexMatrix x(n, rhs.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < rhs.cols(); ++j) x(i, j) = rhs(perm_[i], j);

    for (std::size_t j = 0; j < rhs.cols(); ++j) {
        for (std::size_t i = 1; i < n; ++i) {
            Complex acc = x(i, j);
            for (std::size_t k = 0; k < i; ++k) acc -= lu_(i, k) * x(k, j);
            x(i, j) = acc;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            Complex acc = x(ii, j);
            for (std::size_t k = ii + 1; k < n; ++k) acc -= lu_(ii, k) * x(k, j);
            x(ii, j) = acc / lu_(ii, ii);
        }
    }
    return x;
}

double LuDecomposition::condition_estimate() const {
    const double ratio = max_pivot_ / min_pivot_;
    if (ratio < 1e8) return ratio;
    const ComplexMatrix inv = solve(ComplexMatrix::identity(size()));
    return norm1_ * norm1(inv);
}

ComplexMatrix solve_linear(const ComplexMatrix& m, const ComplexMatrix& rhs) {
    if (!m.square()) throw ValidationError("solve_linear: matrix is not square");
    if (rhs.rows() != m.rows()) throw ValidationError("solve_linear: RHS row count does not match matrix");
    return LuDecomposition(m).solve(rhs);
}

}  // namespace cavio
