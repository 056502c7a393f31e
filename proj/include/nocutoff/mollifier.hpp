#pragma once

// Smooth truncations: the velocity mollifier phi_eps, the angular indicators
// I_zeta / U_zeta expressed in the z coordinate, and the localization pair
// Phi_eps / Psi.

#include <array>
#include <cmath>
#include <string>

#include "core.hpp"
#include "kernel.hpp"

namespace nocutoff {

//---------------------------------------------------------------------------//
// Gauss-Legendre rule
//---------------------------------------------------------------------------//

template <int N>
struct GaussLegendre {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussLegendre() {
        // Newton iteration on P_N from the Chebyshev initial guess.
        for (int i = 0; i < (N + 1) / 2; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            // recompute derivative at the converged node
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= N; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = N * (x * p1 - p0) / (x * x - 1.0);
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[N - 1 - i] = x;
            weights[i] = w;
            weights[N - 1 - i] = w;
        }
    }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
        double acc = 0.0;
        for (int i = 0; i < N; ++i) acc += weights[i] * f(mid + half * nodes[i]);
        return acc * half;
    }
};

inline const GaussLegendre<64>& gauss_legendre_64() {
    static const GaussLegendre<64> rule;
    return rule;
}

//---------------------------------------------------------------------------//
// Smoothsteps
//---------------------------------------------------------------------------//

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3, clamped to [0,1]. C^2 with
/// S'(0) = S'(1) = S''(0) = S''(1) = 0 and S(1/2) = 1/2.
inline double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

//---------------------------------------------------------------------------//
// Bump chi
//---------------------------------------------------------------------------//

/// chi(x) = exp(-1/(1-x^2)) / Z on (-1,1). Partial integrals use 16 panels
/// of the 64-point rule: chi is flat but not analytic at +-1, and a single
/// panel stalls near 1e-12.
class Bump {
  public:
    Bump() { norm_ = 1.0 / composite([](double s) { return raw(s); }, -1.0, 1.0); }

    double operator()(double x) const { return norm_ * raw(x); }

    /// int_a^b chi(s) ds for -1 <= a <= b <= 1.
    double mass(double a, double b) const {
        if (b <= a) return 0.0;
        if (a <= -1.0 && b >= 1.0) return 1.0;
        return composite(*this, a, b);
    }

    /// int_a^b s chi(s) ds.
    double first_moment(double a, double b) const {
        if (b <= a) return 0.0;
        if (a <= -1.0 && b >= 1.0) return 0.0;
        return composite([this](double s) { return s * (*this)(s); }, a, b);
    }

    static double raw(double x) {
        const double q = 1.0 - x * x;
        return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
    }

  private:
    template <class F>
    static double composite(F&& f, double a, double b) {
        constexpr int panels = 16;
        const double h = (b - a) / panels;
        double acc = 0.0;
        for (int k = 0; k < panels; ++k) acc += gauss_legendre_64().integrate(f, a + k * h, a + (k + 1) * h);
        return acc;
    }

    double norm_ = 1.0;
};

inline const Bump& bump() {
    static const Bump b;
    return b;
}

//---------------------------------------------------------------------------//
// Velocity mollifier
//---------------------------------------------------------------------------//

struct MollifierParams {
    double epsilon = 1e-2;
    double gamma_eps = 0.0;  ///< [log(1/eps)]^eta0
    double eta0 = 0.0;

    /// Supremum of admissible eps: 3 eps < 1 < Gamma_eps - 1.
    static double epsilon0(double eta0) {
        return std::min(1.0 / 3.0, std::exp(-std::pow(2.0, 1.0 / eta0)));
    }

    static MollifierParams make(double epsilon, double eta0) {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw ConfigError("MollifierParams: epsilon must lie in (0,1)");
        MollifierParams m;
        m.epsilon = epsilon;
        m.eta0 = eta0;
        m.gamma_eps = std::pow(std::log(1.0 / epsilon), eta0);
        if (!(3.0 * epsilon < 1.0 && 1.0 < m.gamma_eps - 1.0))
            throw ConfigError("MollifierParams: epsilon >= epsilon0 (need 3 eps < 1 < Gamma_eps - 1)");
        return m;
    }
};

/// phi_eps(x) = int ((y v 2eps) ^ Gamma_eps) chi((x-y)/eps)/eps dy.
///
/// Substituting y = x - eps*s, the clamp splits [-1,1] into at most three
/// pieces on which the integrand is constant or linear; each piece is
/// integrated with the composite 64-point rule.
class Mollifier {
  public:
    explicit Mollifier(MollifierParams p) : p_(p) {}

    const MollifierParams& params() const { return p_; }
    double epsilon() const { return p_.epsilon; }
    double ceiling() const { return p_.gamma_eps; }

    double phi(double x) const {
        if (x < 0.0) throw DomainError("phi_eps: x must be nonnegative");
        const double eps = p_.epsilon, cap = p_.gamma_eps;
        if (x <= eps) return 2.0 * eps;
        if (x >= 3.0 * eps && x <= cap - eps) return x;
        if (x >= cap + eps) return cap;
        const Bump& chi = bump();
        const double s_low = std::clamp((x - 2.0 * eps) / eps, -1.0, 1.0);  // y < 2 eps for s > s_low
        const double s_high = std::clamp((x - cap) / eps, -1.0, 1.0);       // y > cap for s < s_high
        double acc = cap * chi.mass(-1.0, s_high) + 2.0 * eps * chi.mass(s_low, 1.0);
        acc += x * chi.mass(s_high, s_low) - eps * chi.first_moment(s_high, s_low);
        return acc;
    }

    double phi_pow(double x, double gamma) const { return std::pow(phi(x), gamma); }

  private:
    MollifierParams p_;
};

inline double phi_eps(double x, const MollifierParams& p) { return Mollifier(p).phi(x); }

//---------------------------------------------------------------------------//
// Angular indicators in the z coordinate
//---------------------------------------------------------------------------//

/// I_zeta and U_zeta for a fixed cutoff zeta, with G(zeta) cached.
class AngularCutoff {
  public:
    AngularCutoff(double zeta, const PowerLawKernel& kernel) : zeta_(zeta) {
        if (!(zeta > 0.0 && zeta < 1.0)) throw ConfigError("AngularCutoff: zeta must lie in (0,1)");
        g_ = kernel.G(zeta);
    }

    double zeta() const { return zeta_; }
    /// G(zeta)
    double g() const { return g_; }
    /// Half-width of the z-interval carrying the jumps, G(zeta) + 1.
    double support() const { return g_ + 1.0; }

    /// 1 on |z| <= G(zeta), 0 on |z| >= G(zeta)+1.
    double I(double z) const { return 1.0 - smoothstep(std::abs(z) - g_); }

    /// 1 on 1 < |z| < G(zeta)-1, 0 on |z| <= 1/2 and |z| >= G(zeta)-1/2.
    double U(double z) const {
        if (!(g_ > 2.0))
            throw ConfigError("U_zeta: G(zeta) <= 2, weight degenerate (choose smaller zeta)");
        const double a = std::abs(z);
        return smoothstep((a - 0.5) / 0.5) * (1.0 - smoothstep((a - (g_ - 1.0)) / 0.5));
    }

  private:
    double zeta_;
    double g_;
};

inline double smooth_indicator_Izeta(double z, double zeta, const KernelParams& p) {
    return AngularCutoff(zeta, PowerLawKernel(p.nu)).I(z);
}
inline double smooth_indicator_Uzeta(double z, double zeta, const KernelParams& p) {
    return AngularCutoff(zeta, PowerLawKernel(p.nu)).U(z);
}

//---------------------------------------------------------------------------//
// Localization pair
//---------------------------------------------------------------------------//

/// Phi_eps rises from 0 at Gamma_eps - 1 to 1 at Gamma_eps; Psi falls from 1
/// at 1/4 to 0 at 3/4.
struct LocalizationPair {
    double gamma_eps = 0.0;

    double Phi(double x) const { return smoothstep(x - (gamma_eps - 1.0)); }
    static double Psi(double x) { return 1.0 - smoothstep((x - 0.25) / 0.5); }
};

inline LocalizationPair localization_pair(const MollifierParams& p) { return {p.gamma_eps}; }

}  // namespace nocutoff
