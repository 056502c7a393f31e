#pragma once

// Power-law angular kernel b(theta) = |theta|^{-1-nu}, its tail integral G,
// the inverse substitution vartheta, the deviation matrix A(theta) and the
// exponential drift integral.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"

namespace nocutoff {

//---------------------------------------------------------------------------//
// Parameters
//---------------------------------------------------------------------------//

/// (gamma, nu, eta0, delta), optionally generated from an inverse-power-law
/// index s > 5 via gamma = (s-5)/(s-1), nu = 2/(s-1).
struct KernelParams {
    double gamma = 0.75;
    double nu = 0.25;
    double eta0 = 0.0;
    double delta = 0.0;
    std::optional<double> s;

    double gamma_or_nu() const { return std::max(gamma, nu); }

    /// Throws ConfigError naming the first violated constraint.
    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError("KernelParams: " + what); };
        if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0,1)");
        if (!(nu > 0.0 && nu < 0.5)) fail("nu must lie in (0,1/2)");
        const double gn = gamma_or_nu();
        if (!(delta > gn && delta < 1.0)) fail("delta must lie in (max(gamma,nu), 1)");
        if (!(eta0 > 1.0 / delta && eta0 < 1.0 / gn))
            fail("eta0 must lie in (1/delta, 1/max(gamma,nu))");
        if (s) {
            const double sv = *s;
            if (std::abs(gamma - (sv - 5.0) / (sv - 1.0)) > 0.0 ||
                std::abs(nu - 2.0 / (sv - 1.0)) > 0.0)
                fail("gamma/nu inconsistent with s");
        }
    }

    /// Builds parameters, filling delta and eta0 with interval midpoints
    /// when they are not supplied (NaN), then validates.
    static KernelParams make(double gamma, double nu, double delta = NAN, double eta0 = NAN) {
        KernelParams p;
        p.gamma = gamma;
        p.nu = nu;
        const double gn = std::max(gamma, nu);
        p.delta = std::isnan(delta) ? 0.5 * (gn + 1.0) : delta;
        p.eta0 = std::isnan(eta0) ? 0.5 * (1.0 / p.delta + 1.0 / gn) : eta0;
        p.validate();
        return p;
    }

    static KernelParams from_s(double s, double delta = NAN, double eta0 = NAN) {
        if (!(s > 5.0)) throw ConfigError("KernelParams: s must exceed 5");
        KernelParams p = make((s - 5.0) / (s - 1.0), 2.0 / (s - 1.0), delta, eta0);
        p.s = s;
        p.validate();
        return p;
    }
};

//---------------------------------------------------------------------------//
// Angular kernel and substitution
//---------------------------------------------------------------------------//

/// Closed forms for b(theta) = |theta|^{-1-nu} on [-pi/2, pi/2] \ {0}.
class PowerLawKernel {
  public:
    explicit PowerLawKernel(double nu) : nu_(nu), offset_(std::pow(kHalfPi, -nu)) {
        if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("PowerLawKernel: nu must lie in (0,1)");
    }

    double nu() const { return nu_; }
    /// (pi/2)^{-nu}
    double offset() const { return offset_; }

    double b(double theta) const {
        const double a = std::abs(theta);
        if (a == 0.0) throw DomainError("b(theta): theta = 0 is a non-integrable singularity");
        if (a > kHalfPi * (1.0 + 1e-15)) throw DomainError("b(theta): |theta| > pi/2");
        return std::pow(a, -1.0 - nu_);
    }

    /// Tail integral of b over [x, pi/2].
    double G(double x) const {
        if (!(x > 0.0) || x > kHalfPi * (1.0 + 1e-15))
            throw DomainError("G(x): x must lie in (0, pi/2]");
        if (x >= kHalfPi) return 0.0;
        return (std::pow(x, -nu_) - offset_) / nu_;
    }

    /// Inverse of G, extended oddly to negative z and by continuity to z = 0.
    double vartheta(double z) const {
        const double w = nu_ * std::abs(z) + offset_;
        const double t = std::pow(w, -1.0 / nu_);
        if (z == 0.0) return kHalfPi;
        return z > 0.0 ? t : -t;
    }

    /// Derivatives of vartheta on z > 0, order 1 or 2.
    double vartheta_deriv(double z, int order) const {
        if (!(z > 0.0)) throw DomainError("vartheta_deriv: z must be positive");
        const double w = nu_ * z + offset_;
        switch (order) {
            case 1:
                return -std::pow(w, -1.0 / nu_ - 1.0);
            case 2:
                return (1.0 + nu_) * std::pow(w, -1.0 / nu_ - 2.0);
            default:
                throw DomainError("vartheta_deriv: only orders 1 and 2 are supported");
        }
    }

    /// vartheta' extended evenly to z < 0 (vartheta is odd).
    double vartheta_prime(double z) const {
        return -std::pow(nu_ * std::abs(z) + offset_, -1.0 / nu_ - 1.0);
    }

  private:
    double nu_;
    double offset_;
};

inline double eval_b(double theta, const KernelParams& p) { return PowerLawKernel(p.nu).b(theta); }
inline double eval_G(double x, const KernelParams& p) { return PowerLawKernel(p.nu).G(x); }
inline double eval_vartheta(double z, const KernelParams& p) {
    return PowerLawKernel(p.nu).vartheta(z);
}
inline double eval_vartheta_deriv(double z, int order, const KernelParams& p) {
    return PowerLawKernel(p.nu).vartheta_deriv(z, order);
}

//---------------------------------------------------------------------------//
// Collision geometry
//---------------------------------------------------------------------------//

struct DeviationMatrix {
    double theta = 0.0;
    Mat2 matrix = Mat2::Zero();
};

/// A(theta) = (R_theta - I)/2. The diagonal uses -sin^2(theta/2) so that
/// small angles keep full relative precision.
inline Mat2 deviation(double theta) {
    const double s = std::sin(theta);
    const double h = std::sin(0.5 * theta);
    const double d = -h * h;  // (cos(theta) - 1)/2
    Mat2 m;
    m << d, -0.5 * s, 0.5 * s, d;
    return m;
}

inline DeviationMatrix deviation_matrix(double theta) {
    if (std::abs(theta) > kHalfPi * (1.0 + 1e-15))
        throw DomainError("deviation_matrix: |theta| > pi/2");
    return {theta, deviation(theta)};
}

/// dA/dtheta = R'_theta / 2.
inline Mat2 deviation_matrix_deriv(double theta) {
    const double s = std::sin(theta), c = std::cos(theta);
    Mat2 m;
    m << -0.5 * s, -0.5 * c, 0.5 * c, -0.5 * s;
    return m;
}

inline Mat2 rotation(double theta) {
    const double s = std::sin(theta), c = std::cos(theta);
    Mat2 m;
    m << c, -s, s, c;
    return m;
}

/// v' = v + A(theta)(v - v*).
inline Vec2 post_collision(const Vec2& v, const Vec2& vstar, double theta) {
    return v + deviation(theta) * (v - vstar);
}

/// v' = (v+v*)/2 + R_theta (v-v*)/2 and v*' = (v+v*)/2 - R_theta (v-v*)/2.
inline std::pair<Vec2, Vec2> post_collision_rotation(const Vec2& v, const Vec2& vstar,
                                                     double theta) {
    const Vec2 mid = 0.5 * (v + vstar);
    const Vec2 half = rotation(theta) * (0.5 * (v - vstar));
    return {mid + half, mid - half};
}

//---------------------------------------------------------------------------//
// Exponential drift integral
//---------------------------------------------------------------------------//

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

/// |V + A(theta) X|^kappa - |V|^kappa without cancellation for small theta.
inline double power_increment(const Vec2& V, const Vec2& X, double theta, double kappa) {
    const Vec2 ax = deviation(theta) * X;
    const double v2 = V.squaredNorm();
    const double dv2 = 2.0 * V.dot(ax) + ax.squaredNorm();
    if (v2 == 0.0) return std::pow(ax.squaredNorm(), 0.5 * kappa);
    const double ratio = dv2 / v2;
    if (ratio <= -1.0) return -std::pow(v2, 0.5 * kappa);
    return std::pow(v2, 0.5 * kappa) * std::expm1(0.5 * kappa * std::log1p(ratio));
}

}  // namespace detail

/// Delta(V, v) = int_{-pi/2}^{pi/2} (exp|V + A(theta)(V-v)|^kappa - exp|V|^kappa) b(theta) dtheta.
///
/// The integrand is folded onto (0, pi/2] (theta and -theta together, so the
/// O(theta) odd part cancels analytically) and the variable change
/// theta = u^{1/(kappa-nu)} removes the residual |theta|^{kappa-1-nu}
/// endpoint singularity before adaptive Gauss-Kronrod. Tolerance is 1e-9
/// absolute, scaled by the integrand's L1 mass when that exceeds one.
inline QuadratureResult drift_integral(const Vec2& V, const Vec2& v, double kappa,
                                       const KernelParams& params, double abs_tol = 1e-9) {
    const double nu = params.nu;
    if (!(kappa > nu && kappa < 1.0)) throw DomainError("drift_integral: kappa must lie in (nu, 1)");
    const Vec2 X = V - v;
    if (X.squaredNorm() == 0.0) return {0.0, 0.0};

    const double p = kappa - nu;
    const double base = std::exp(std::pow(V.norm(), kappa));
    auto integrand = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double theta = std::pow(u, 1.0 / p);
        if (theta <= 0.0) return 0.0;
        const double d_plus = detail::power_increment(V, X, theta, kappa);
        const double d_minus = detail::power_increment(V, X, -theta, kappa);
        const double s = base * (std::expm1(d_plus) + std::expm1(d_minus));
        return s * std::exp((-nu / p - 1.0) * std::log(u)) / p;
    };
    double err = 0.0, l1 = 0.0;
    const double upper = std::pow(kHalfPi, p);
    const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, 0.0, upper, 20, 1e-13, &err, &l1);
    const double tol = abs_tol * std::max(1.0, l1);
    if (!(err <= tol) || !std::isfinite(val)) {
        std::ostringstream os;
        os << "drift_integral: quadrature did not converge (achieved error " << err
           << ", requested " << tol << ")";
        throw NumericError(os.str());
    }
    return {val, err};
}

}  // namespace nocutoff
