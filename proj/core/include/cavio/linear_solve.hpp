#pragma once

#include <cstddef>
#include <vector>

#include "cavio/complex_matrix.hpp"

namespace cavio {

// LU factorization with partial pivoting, P*M = L*U.
class LuDecomposition {
public:
    // Throws SingularSystemError when a pivot falls below
    // n * eps * ||M||_inf (or is exactly zero).
    explicit LuDecomposition(ComplexMatrix m);

    ComplexMatrix solve(const ComplexMatrix& rhs) const;

    std::size_t size() const noexcept { return lu_.rows(); }
    double min_pivot() const noexcept { return min_pivot_; }
    double max_pivot() const noexcept { return max_pivot_; }

    // 1-norm condition number. Cheap pivot-ratio bound first; the exact
    // value (explicit inverse) only when that bound exceeds 1e8.
    double condition_estimate() const;

private:
    ComplexMatrix lu_;
    std::vector<std::size_t> perm_;
    double norm1_ = 0.0;
    double min_pivot_ = 0.0;
    double max_pivot_ = 0.0;
};

// Solves M * X = RHS. Never forms an explicit inverse.
ComplexMatrix solve_linear(const ComplexMatrix& m, const ComplexMatrix& rhs);

}  // namespace cavio
