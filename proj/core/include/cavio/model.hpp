#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "cavio/complex_matrix.hpp"

namespace cavio {

// One resonant cavity mode. Frequencies in GHz, rates in MHz (both /2pi).
struct CavityMode {
    double f_ghz = 0.0;
    double gamma_int_mhz = 0.0;
    std::array<double, 2> gamma_ext_mhz{0.0, 0.0};
    std::array<double, 2> phi_ext_rad{0.0, 0.0};

    friend bool operator==(const CavityMode&, const CavityMode&) = default;
};

struct MagnonCoupling {
    double g_mhz = 0.0;
    double theta_rad = 0.0;

    friend bool operator==(const MagnonCoupling&, const MagnonCoupling&) = default;
};

// Kittel-mode magnon of a sphere, with one coupling per cavity mode.
struct MagnonMode {
    double gyro_ghz_per_t = 28.74;
    double alpha = 4e-4;
    std::optional<double> k_m_mhz;
    std::vector<MagnonCoupling> couplings;

    friend bool operator==(const MagnonMode&, const MagnonMode&) = default;
};

enum class DiagonalConvention {
    PaperLiteral,  // cavity diagonal carries only the internal rate
    TotalDecay,    // internal plus both external rates
};

enum class CouplingScale {
    AsPrintedMatrix,      // i g e^{i theta}
    HalfFromHamiltonian,  // i (g/2) e^{i theta}
};

std::string_view to_string(DiagonalConvention c);
std::string_view to_string(CouplingScale c);
DiagonalConvention parse_diagonal_convention(std::string_view s);
CouplingScale parse_coupling_scale(std::string_view s);

class FieldPoint {
public:
    explicit FieldPoint(double mu0h_tesla);
    double tesla() const noexcept { return mu0h_; }

private:
    double mu0h_;
};

struct ModelOptions {
    double xi = 0.0;
    DiagonalConvention diagonal = DiagonalConvention::TotalDecay;
    CouplingScale coupling_scale = CouplingScale::AsPrintedMatrix;
    // Enforce phi_u1 - phi_u0 in {0, pi} (mod 2pi) for every mode.
    bool symmetric_cavity = false;

    friend bool operator==(const ModelOptions&, const ModelOptions&) = default;
};

// N cavity modes, M magnon modes and two ports. Immutable once built; every
// constructor path validates the invariants.
class SystemModel {
public:
    SystemModel(std::vector<CavityMode> cavity, std::vector<MagnonMode> magnons,
                ModelOptions options = {});

    const std::vector<CavityMode>& cavity_modes() const noexcept { return cavity_; }
    const std::vector<MagnonMode>& magnons() const noexcept { return magnons_; }
    const ModelOptions& options() const noexcept { return options_; }
    double xi() const noexcept { return options_.xi; }

    std::size_t cavity_count() const noexcept { return cavity_.size(); }
    std::size_t magnon_count() const noexcept { return magnons_.size(); }
    std::size_t dimension() const noexcept { return cavity_.size() + magnons_.size(); }

    SystemModel with_cavity_modes(std::vector<CavityMode> cavity) const;
    SystemModel with_magnons(std::vector<MagnonMode> magnons) const;
    SystemModel with_options(ModelOptions options) const;
    SystemModel without_magnons() const;
    // Port 0 <-> port 1 everywhere (rates and phases).
    SystemModel port_swapped() const;

    friend bool operator==(const SystemModel&, const SystemModel&) = default;

private:
    std::vector<CavityMode> cavity_;
    std::vector<MagnonMode> magnons_;
    ModelOptions options_;
};

// arg(Ix + i*Iy) in (-pi, pi]. Throws DegeneratePhaseError for (0, 0).
double internal_phase(std::complex<double> ix, std::complex<double> iy);

// Kittel sphere: f_m = gyro * mu0H, GHz.
double magnon_frequency(const MagnonMode& magnon, FieldPoint field);

// Decay rate in MHz (/2pi): the override when present, else 2*alpha*f_m.
double magnon_decay(const MagnonMode& magnon, double f_m_ghz);

// Internal-mode matrix, (N+M) x (N+M), angular units (rad/ns).
ComplexMatrix build_A(const SystemModel& model, FieldPoint field);
// Port coupling matrix, (N+M) x 2, sqrt(rad/ns).
ComplexMatrix build_B(const SystemModel& model);
// Direct port-to-port scattering, 2 x 2 (real entries).
ComplexMatrix build_C(double xi);
// D = -C B^dagger.
ComplexMatrix build_D(const ComplexMatrix& c, const ComplexMatrix& b);

// Wraps an angle into (-pi, pi].
double wrap_angle(double rad);

}  // namespace cavio
