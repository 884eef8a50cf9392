#include "cavio/model.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "cavio/error.hpp"
#include "cavio/units.hpp"

namespace cavio {
namespace {

using units::kPi;
using units::kTwoPi;

constexpr double kSymmetricPhaseTol = 5e-3;

[[noreturn]] void invalid(const std::string& msg) { throw ValidationError(msg); }

void validate(const std::vector<CavityMode>& cavity, const std::vector<MagnonMode>& magnons,
              const ModelOptions& opt) {
    if (cavity.empty()) invalid("model: at least one cavity mode is required");
    if (!(opt.xi >= 0.0 && opt.xi <= 1.0)) invalid("model: crosstalk xi must lie in [0, 1]");
    for (std::size_t u = 0; u < cavity.size(); ++u) {
        const auto& m = cavity[u];
        const auto where = "cavity mode " + std::to_string(u);
        if (!(m.f_ghz > 0.0) || !std::isfinite(m.f_ghz)) invalid(where + ": f_GHz must be > 0");
        if (!(m.gamma_int_mhz >= 0.0) || !std::isfinite(m.gamma_int_mhz))
            invalid(where + ": gamma_int must be >= 0");
        for (int p = 0; p < 2; ++p) {
            if (!(m.gamma_ext_mhz[p] >= 0.0) || !std::isfinite(m.gamma_ext_mhz[p]))
                invalid(where + ": gamma_ext must be >= 0");
            if (!std::isfinite(m.phi_ext_rad[p])) invalid(where + ": phi_ext must be finite");
        }
        if (opt.symmetric_cavity) {
            const double d = std::abs(wrap_angle(m.phi_ext_rad[1] - m.phi_ext_rad[0]));
            if (d > kSymmetricPhaseTol && std::abs(d - kPi) > kSymmetricPhaseTol)
                invalid(where + ": symmetric cavity requires phi_1 - phi_0 in {0, pi}");
        }
    }
    for (std::size_t v = 0; v < magnons.size(); ++v) {
        const auto& m = magnons[v];
        const auto where = "magnon " + std::to_string(v);
        if (!(m.gyro_ghz_per_t > 0.0)) invalid(where + ": gyro must be > 0");
        if (!(m.alpha >= 0.0)) invalid(where + ": alpha must be >= 0");
        if (m.k_m_mhz && !(*m.k_m_mhz >= 0.0)) invalid(where + ": k_m must be >= 0");
        if (m.couplings.size() != cavity.size()) {
            std::ostringstream os;
            os << where << ": has " << m.couplings.size() << " couplings but the model has "
               << cavity.size() << " cavity modes";
            invalid(os.str());
        }
        for (const auto& c : m.couplings) {
            if (!(c.g_mhz >= 0.0) || !std::isfinite(c.g_mhz)) invalid(where + ": g must be >= 0");
            if (!(c.theta_rad > -kPi - 1e-12 && c.theta_rad <= kPi + 1e-12))
                invalid(where + ": theta must lie in (-pi, pi]");
        }
    }
}

}  // namespace

std::string_view to_string(DiagonalConvention c) {
    return c == DiagonalConvention::PaperLiteral ? "paper" : "total-decay";
}

std::string_view to_string(CouplingScale c) {
    return c == CouplingScale::AsPrintedMatrix ? "as-printed" : "half-from-hamiltonian";
}

DiagonalConvention parse_diagonal_convention(std::string_view s) {
    if (s == "paper" || s == "paper-literal") return DiagonalConvention::PaperLiteral;
    if (s == "total-decay") return DiagonalConvention::TotalDecay;
    throw ValidationError("unknown diagonal convention '" + std::string(s) +
                          "' (expected paper|total-decay)");
}

CouplingScale parse_coupling_scale(std::string_view s) {
    if (s == "as-printed") return CouplingScale::AsPrintedMatrix;
    if (s == "half-from-hamiltonian") return CouplingScale::HalfFromHamiltonian;
    throw ValidationError("unknown coupling scale '" + std::string(s) +
                          "' (expected as-printed|half-from-hamiltonian)");
}

FieldPoint::FieldPoint(double mu0h_tesla) : mu0h_(mu0h_tesla) {
    if (!(mu0h_tesla >= 0.0) || !std::isfinite(mu0h_tesla))
        throw ValidationError("field: mu0H must be finite and >= 0");
}

SystemModel::SystemModel(std::vector<CavityMode> cavity, std::vector<MagnonMode> magnons,
                         ModelOptions options)
    : cavity_(std::move(cavity)), magnons_(std::move(magnons)), options_(options) {
    validate(cavity_, magnons_, options_);
}

SystemModel SystemModel::with_cavity_modes(std::vector<CavityMode> cavity) const {
    return SystemModel(std::move(cavity), magnons_, options_);
}

SystemModel SystemModel::with_magnons(std::vector<MagnonMode> magnons) const {
    return SystemModel(cavity_, std::move(magnons), options_);
}

SystemModel SystemModel::with_options(ModelOptions options) const {
    return SystemModel(cavity_, magnons_, options);
}

SystemModel SystemModel::without_magnons() const { return SystemModel(cavity_, {}, options_); }

SystemModel SystemModel::port_swapped() const {
    auto cavity = cavity_;
    for (auto& m : cavity) {
        std::swap(m.gamma_ext_mhz[0], m.gamma_ext_mhz[1]);
        std::swap(m.phi_ext_rad[0], m.phi_ext_rad[1]);
    }
    return SystemModel(std::move(cavity), magnons_, options_);
}

double wrap_angle(double rad) {
    double r = std::remainder(rad, kTwoPi);  // [-pi, pi]
    if (r <= -kPi) r += kTwoPi;
    return r;
}

double internal_phase(std::complex<double> ix, std::complex<double> iy) {
    const std::complex<double> z = ix + std::complex<double>(0.0, 1.0) * iy;
    if (z == std::complex<double>{}) {
        if (ix == std::complex<double>{} && iy == std::complex<double>{})
            throw DegeneratePhaseError("internal_phase: both field integrals are zero");
        throw DegeneratePhaseError("internal_phase: Ix + i*Iy vanishes, phase undefined");
    }
    double a = std::arg(z);
    if (a <= -kPi) a = kPi;
    return a;
}

double magnon_frequency(const MagnonMode& magnon, FieldPoint field) {
    return magnon.gyro_ghz_per_t * field.tesla();
}

double magnon_decay(const MagnonMode& magnon, double f_m_ghz) {
    if (magnon.k_m_mhz) return *magnon.k_m_mhz;
    if (f_m_ghz < 0.0) throw ValidationError("magnon_decay: f_m must be >= 0");
    return 2.0 * magnon.alpha * (f_m_ghz * 1e3);
}

ComplexMatrix build_A(const SystemModel& model, FieldPoint field) {
    using units::ghz_to_angular;
    using units::mhz_to_angular;
    const std::size_t n = model.cavity_count();
    ComplexMatrix a(model.dimension(), model.dimension());
    const Complex i{0.0, 1.0};
    const bool total = model.options().diagonal == DiagonalConvention::TotalDecay;
    const double scale = model.options().coupling_scale == CouplingScale::AsPrintedMatrix ? 1.0 : 0.5;

    for (std::size_t u = 0; u < n; ++u) {
        const auto& m = model.cavity_modes()[u];
        double decay = mhz_to_angular(m.gamma_int_mhz);
        if (total) decay += mhz_to_angular(m.gamma_ext_mhz[0]) + mhz_to_angular(m.gamma_ext_mhz[1]);
        a(u, u) = Complex(-0.5 * decay, -ghz_to_angular(m.f_ghz));
    }
    for (std::size_t v = 0; v < model.magnon_count(); ++v) {
        const auto& mag = model.magnons()[v];
        const std::size_t r = n + v;
        const double fm = magnon_frequency(mag, field);
        a(r, r) = Complex(-0.5 * mhz_to_angular(magnon_decay(mag, fm)), -ghz_to_angular(fm));
        for (std::size_t u = 0; u < n; ++u) {
            const auto& c = mag.couplings[u];
            const double g = scale * mhz_to_angular(c.g_mhz);
            a(u, r) = i * g * std::polar(1.0, c.theta_rad);
            a(r, u) = i * g * std::polar(1.0, -c.theta_rad);
        }
    }
    return a;
}

ComplexMatrix build_B(const SystemModel& model) {
    ComplexMatrix b(model.dimension(), 2);
    for (std::size_t u = 0; u < model.cavity_count(); ++u) {
        const auto& m = model.cavity_modes()[u];
        for (int p = 0; p < 2; ++p)
            b(u, p) = std::polar(std::sqrt(units::mhz_to_angular(m.gamma_ext_mhz[p])), m.phi_ext_rad[p]);
    }
    return b;
}

ComplexMatrix build_C(double xi) {
    if (!(xi >= 0.0 && xi <= 1.0)) throw ValidationError("build_C: xi must lie in [0, 1]");
    const double d = std::sqrt(1.0 - xi);
    const double o = std::sqrt(xi);
    return ComplexMatrix{{d, o}, {o, d}};
}

ComplexMatrix build_D(const ComplexMatrix& c, const ComplexMatrix& b) {
    if (c.rows() != 2 || c.cols() != 2 || b.cols() != 2)
        throw ValidationError("build_D: expected C 2x2 and B (N+M)x2");
    ComplexMatrix d = c * b.adjoint();
    d *= -1.0;
    return d;
}

}  // namespace cavio
