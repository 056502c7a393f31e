#pragma once

// Exponent calculus (a, q, p(alpha), bootstrap schedules, threshold
// predicates) and the empirical regularity estimators: characteristic
// function decay and ball-mass scaling.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "core.hpp"
#include "kernel.hpp"
#include "particles.hpp"

namespace nocutoff {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline std::string to_string(const Rational& r) {
    const BigInt n = boost::multiprecision::numerator(r), d = boost::multiprecision::denominator(r);
    return d == 1 ? n.str() : n.str() + "/" + d.str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Parses "15", "-2.5", "1e3" or "7/3" exactly.
inline Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    if (slash != std::string::npos)
        return parse_rational(text.substr(0, slash)) / parse_rational(text.substr(slash + 1));
    std::string s = text;
    long exp10 = 0;
    if (const auto e = s.find_first_of("eE"); e != std::string::npos) {
        exp10 = std::stol(s.substr(e + 1));
        s = s.substr(0, e);
    }
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s = s.substr(1);
    }
    std::string digits;
    for (char c : s) {
        if (c == '.') continue;
        if (c < '0' || c > '9') throw ConfigError("not a rational number: '" + text + "'");
        digits += c;
    }
    if (digits.empty()) throw ConfigError("not a rational number: '" + text + "'");
    if (const auto dot = s.find('.'); dot != std::string::npos)
        exp10 -= static_cast<long>(s.size() - dot - 1);
    Rational r{BigInt(digits)};
    const BigInt ten = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::abs(exp10)));
    if (exp10 >= 0)
        r *= ten;
    else
        r /= ten;
    return neg ? -r : r;
}

/// Exact square root when r is the square of a rational.
inline std::optional<Rational> exact_sqrt(const Rational& r) {
    if (r < 0) return std::nullopt;
    const BigInt n = boost::multiprecision::numerator(r), d = boost::multiprecision::denominator(r);
    const BigInt sn = boost::multiprecision::sqrt(n), sd = boost::multiprecision::sqrt(d);
    if (sn * sn != n || sd * sd != d) return std::nullopt;
    return Rational(sn, sd);
}

//---------------------------------------------------------------------------//
// Exact exponents
//---------------------------------------------------------------------------//

struct ExactPair {
    Rational gamma;
    Rational nu;

    static ExactPair from_s(const Rational& s) {
        if (!(s > 5)) throw ConfigError("s must exceed 5");
        return {(s - 5) / (s - 1), Rational(2) / (s - 1)};
    }
    /// Exact binary values of the doubles, or the s-family when s is set.
    static ExactPair from_params(const KernelParams& p) {
        if (p.s) return from_s(Rational(*p.s));
        return {Rational(p.gamma), Rational(p.nu)};
    }

    /// gamma (1-2nu) - nu^2, positive iff admissible
    Rational slack() const { return gamma * (1 - 2 * nu) - nu * nu; }
    bool admissible() const { return slack() > 0; }

    Rational p(const Rational& alpha) const {
        return ((alpha + gamma) * (1 - 2 * nu) - nu * nu) / ((alpha + gamma + nu - 1) * nu + 1);
    }

    /// a_{gamma,nu} when the discriminant is a rational square.
    std::optional<Rational> a() const {
        require_admissible();
        const Rational b = gamma + nu + 1;
        const auto root = exact_sqrt(b * b + 4 * (gamma * (1 - 2 * nu) / nu - nu));
        if (!root) return std::nullopt;
        return (*root - b) / 2;
    }

    /// a <= 2, decided exactly: the defining quadratic is increasing on a > 0.
    bool a_le_2() const {
        require_admissible();
        return 4 * nu + 2 * nu * (gamma + nu + 1) - slack() >= 0;
    }

    std::optional<Rational> q() const {
        if (a_le_2()) return a();
        return p(Rational(2));
    }

    void require_admissible() const {
        if (!admissible())
            throw ConfigError("inadmissible (gamma, nu): need gamma > nu^2/(1-2nu) = " +
                              std::to_string(to_double(nu * nu / (1 - 2 * nu))));
    }
};

//---------------------------------------------------------------------------//
// Floating exponents
//---------------------------------------------------------------------------//

inline bool admissible(double gamma, double nu) { return gamma * (1.0 - 2.0 * nu) - nu * nu > 0.0; }

inline void require_admissible(double gamma, double nu) {
    if (!(nu > 0.0 && nu < 0.5)) throw ConfigError("nu must lie in (0,1/2)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
    if (!admissible(gamma, nu)) {
        throw ConfigError("inadmissible (gamma, nu): need gamma > nu^2/(1-2nu) = " +
                          std::to_string(nu * nu / (1.0 - 2.0 * nu)));
    }
}

inline double exponent_a(double gamma, double nu) {
    require_admissible(gamma, nu);
    const double b = gamma + nu + 1.0;
    const double c = gamma * (1.0 - 2.0 * nu) - nu * nu;
    // positive root of nu a^2 + nu b a - c, in the cancellation-free form
    return 2.0 * c / (nu * b + std::sqrt(nu * nu * b * b + 4.0 * nu * c));
}

inline double p_alpha(double alpha, double gamma, double nu) {
    return ((alpha + gamma) * (1.0 - 2.0 * nu) - nu * nu) / ((alpha + gamma + nu - 1.0) * nu + 1.0);
}

inline double exponent_q(double gamma, double nu) {
    const double a = exponent_a(gamma, nu);
    return a <= 2.0 ? a : p_alpha(2.0, gamma, nu);
}

inline double exponent_a(const KernelParams& p) { return exponent_a(p.gamma, p.nu); }
inline double exponent_q(const KernelParams& p) { return exponent_q(p.gamma, p.nu); }
inline double p_alpha(double alpha, const KernelParams& p) { return p_alpha(alpha, p.gamma, p.nu); }

/// Closed-form threshold predicates.
inline bool q_gt_1_closed(double gamma, double nu) {
    return nu < 1.0 / 3.0 && gamma > (2.0 * nu + 2.0 * nu * nu) / (1.0 - 3.0 * nu);
}
inline bool q_gt_2_closed(double gamma, double nu) {
    return nu < 0.25 && gamma > (6.0 * nu + 3.0 * nu * nu) / (1.0 - 4.0 * nu);
}

/// Thresholds in s for the realistic family gamma = (s-5)/(s-1), nu = 2/(s-1).
struct SThresholds {
    double admissible = 7.0;
    double q_gt_1 = 8.0 + std::sqrt(33.0);
    double q_gt_2 = 13.0 + 2.0 * std::sqrt(31.0);
};

//---------------------------------------------------------------------------//
// Bootstrap schedule
//---------------------------------------------------------------------------//

struct BootstrapSchedule {
    std::vector<double> alpha;  ///< alpha_0 = 0 < alpha_1 < ... < alpha_{n0}
    double one_minus_eta = 1.0;
    double target = 0.0;
    bool appended_target = false;  ///< a > 2 branch with target >= 2
    double root_x = NAN;           ///< p(root_x) = target in that branch
};

inline BootstrapSchedule bootstrap_schedule(double target, double gamma, double nu,
                                            std::size_t max_steps = 100000) {
    const double a = exponent_a(gamma, nu);
    const double q = a <= 2.0 ? a : p_alpha(2.0, gamma, nu);
    if (!(target > 0.0 && target < q))
        throw ConfigError("bootstrap_schedule: target must lie in (0, q_{gamma,nu})");
    auto p = [&](double x) { return p_alpha(x, gamma, nu); };

    BootstrapSchedule sch;
    sch.target = target;
    sch.alpha.push_back(0.0);
    double stop_above = target;  // iterate until alpha >= stop_above
    bool strict = false;
    if (a <= 2.0) {
        const double qp = 0.5 * (target + q);
        sch.one_minus_eta = qp / p(qp);
    } else {
        sch.one_minus_eta = 2.0 / p(2.0);
        if (target >= 2.0) {
            double lo = 0.0, hi = 2.0;
            if (p(lo) > target) {
                sch.root_x = -1.0;
            } else {
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (p(mid) < target ? lo : hi) = mid;
                }
                sch.root_x = hi;
            }
            stop_above = sch.root_x;
            strict = true;
            sch.appended_target = true;
        }
    }
    auto done = [&](double x) { return strict ? x > stop_above : x >= stop_above; };
    while (!done(sch.alpha.back())) {
        if (sch.alpha.size() > max_steps) throw NumericError("bootstrap_schedule: no convergence");
        sch.alpha.push_back(sch.one_minus_eta * p(sch.alpha.back()));
    }
    if (sch.appended_target) sch.alpha.push_back(target);
    return sch;
}

/// Mechanical check of the schedule contract.
inline bool schedule_contract_holds(const BootstrapSchedule& s, double gamma, double nu) {
    const auto& al = s.alpha;
    if (al.empty() || al.front() != 0.0) return false;
    for (std::size_t k = 0; k + 1 < al.size(); ++k) {
        if (!(al[k] >= 0.0 && al[k] < 2.0)) return false;
        if (!(al[k + 1] < p_alpha(al[k], gamma, nu))) return false;
    }
    return al.back() >= s.target;
}

//---------------------------------------------------------------------------//
// Report
//---------------------------------------------------------------------------//

struct RegularityReport {
    double gamma = 0.0, nu = 0.0;
    std::optional<double> s;
    bool admissible = false;
    double a = NAN, q = NAN;
    std::optional<std::string> a_exact, q_exact, sobolev_exact;
    bool q_gt_1 = false, q_gt_2 = false;
    double sobolev_sup = NAN;  ///< q - 1
    BootstrapSchedule schedule;
};

/// Throws ConfigError for inadmissible pairs. The schedule targets the
/// midpoint of (0, q) unless `target` is given.
inline RegularityReport analyze(const KernelParams& params, std::optional<double> target = std::nullopt) {
    RegularityReport r;
    r.gamma = params.gamma;
    r.nu = params.nu;
    r.s = params.s;
    require_admissible(params.gamma, params.nu);
    r.admissible = true;
    const ExactPair ex = ExactPair::from_params(params);
    if (ex.admissible()) {
        if (auto a = ex.a()) r.a_exact = to_string(*a);
        if (auto q = ex.q()) {
            r.q_exact = to_string(*q);
            r.sobolev_exact = to_string(*q - 1);
        }
    }
    r.a = exponent_a(params.gamma, params.nu);
    r.q = exponent_q(params.gamma, params.nu);
    r.q_gt_1 = r.q > 1.0;
    r.q_gt_2 = r.q > 2.0;
    r.sobolev_sup = r.q - 1.0;
    r.schedule = bootstrap_schedule(target.value_or(0.5 * r.q), params.gamma, params.nu);
    return r;
}

//---------------------------------------------------------------------------//
// Empirical estimators
//---------------------------------------------------------------------------//

inline std::vector<std::complex<double>> empirical_char_fn(const std::vector<Vec2>& v,
                                                           const std::vector<Vec2>& xi) {
    std::vector<std::complex<double>> out(xi.size());
    const double n = static_cast<double>(v.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
        double re = 0.0, im = 0.0;
        for (const auto& x : v) {
            const double ph = xi[k].dot(x);
            re += std::cos(ph);
            im += std::sin(ph);
        }
        out[k] = {re / n, im / n};
    }
    return out;
}

/// Mean of |f^(xi)| over `directions` equispaced directions in [0, pi).
inline double mean_abs_char_fn(const std::vector<Vec2>& v, double radius, std::size_t directions = 16) {
    std::vector<Vec2> xi(directions);
    for (std::size_t d = 0; d < directions; ++d) {
        const double a = kPi * static_cast<double>(d) / static_cast<double>(directions);
        xi[d] = radius * Vec2(std::cos(a), std::sin(a));
    }
    double acc = 0.0;
    for (const auto& c : empirical_char_fn(v, xi)) acc += std::abs(c);
    return acc / static_cast<double>(directions);
}

inline std::vector<double> log_space(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1));
    return out;
}

struct SpectrumRow {
    double xi = 0.0;
    double mean_abs_fhat = 0.0;
    bool in_window = false;
};

struct Spectrum {
    std::vector<SpectrumRow> rows;
    double noise_floor = 0.0;  ///< 3/sqrt(N)
    double xi_max = 0.0;
    double fit_slope = NAN;    ///< d log|f^| / d log(1+|xi|) in the window
    double predicted_q = NAN;
};

/// Radii log-spaced on [1, xi_max], with xi_max chosen so that the predicted
/// decay (1+xi)^{-q} stays above 3/sqrt(N).
inline Spectrum spectrum(const std::vector<Vec2>& v, double predicted_q, std::size_t n_radii = 24,
                         std::size_t directions = 16) {
    Spectrum sp;
    sp.predicted_q = predicted_q;
    sp.noise_floor = 3.0 / std::sqrt(static_cast<double>(v.size()));
    sp.xi_max = std::max(1.5, std::pow(1.0 / sp.noise_floor, 1.0 / predicted_q) - 1.0);
    std::vector<double> lx, ly;
    for (double r : log_space(1.0, sp.xi_max, n_radii)) {
        SpectrumRow row{r, mean_abs_char_fn(v, r, directions), false};
        row.in_window = row.mean_abs_fhat > sp.noise_floor;
        if (row.in_window) {
            lx.push_back(std::log1p(r));
            ly.push_back(std::log(row.mean_abs_fhat));
        }
        sp.rows.push_back(row);
    }
    if (lx.size() >= 2) sp.fit_slope = fit_line(lx, ly).slope;
    return sp;
}

inline std::vector<double> ball_mass(const std::vector<Vec2>& v, const Vec2& center,
                                     const std::vector<double>& eps_list) {
    std::vector<double> out;
    out.reserve(eps_list.size());
    for (double e : eps_list) {
        std::size_t in = 0;
        for (const auto& x : v)
            if ((x - center).norm() < e) ++in;
        out.push_back(v.empty() ? 0.0 : static_cast<double>(in) / static_cast<double>(v.size()));
    }
    return out;
}

struct FourierBallReport {
    double alpha = 0.0;
    double K = NAN;               ///< max over the window of |xi|^alpha |f^(xi)|
    double decay_exponent = NAN;  ///< -(slope of log envelope of |f^| vs log|xi|)
    double C = NAN;               ///< max over centers, radii of mass / eps^alpha
    double ball_exponent = NAN;   ///< slope of log(max-over-centers mass) vs log eps
    bool hypothesis_holds = false;
    bool conclusion_holds = false;
    bool consistent = false;      ///< hypothesis implies conclusion
};

/// Checks the Fourier-to-ball implication on an ensemble. Decay is read from
/// the running upper envelope of the direction-averaged |f^| (oscillating
/// transforms such as the disk's are then monotone); ball exponents use the
/// worst of 16 particle centers and the origin, on radii down to 4/sqrt(N).
inline FourierBallReport fourier_ball_consistency(const std::vector<Vec2>& v, double alpha,
                                                  double tolerance = 0.25) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw ConfigError("fourier_ball_consistency: alpha must lie in (0,2)");
    FourierBallReport rep;
    rep.alpha = alpha;
    const double n = static_cast<double>(v.size());
    const double floor = 3.0 / std::sqrt(n);

    const auto radii = log_space(1.0, 100.0, 32);
    std::vector<double> fh;
    for (double r : radii) fh.push_back(mean_abs_char_fn(v, r));
    std::vector<double> env(fh.size());
    double run = 0.0;
    for (std::size_t k = fh.size(); k-- > 0;) env[k] = run = std::max(run, fh[k]);
    std::vector<double> lx, ly;
    rep.K = 0.0;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        rep.K = std::max(rep.K, std::pow(radii[k], alpha) * std::max(fh[k], floor));
        if (env[k] > floor) {
            lx.push_back(std::log(radii[k]));
            ly.push_back(std::log(env[k]));
        }
    }
    // With a single resolvable radius the decay outruns every power law.
    rep.decay_exponent = lx.size() >= 2 ? -fit_line(lx, ly).slope : 1e9;
    rep.hypothesis_holds = rep.decay_exponent >= alpha - tolerance;

    std::vector<Vec2> centers{Vec2::Zero()};
    for (std::size_t k = 0; k < 16 && k < v.size(); ++k) centers.push_back(v[(k * v.size()) / 16]);
    const auto eps = log_space(std::max(4.0 / std::sqrt(n), 0.02), 0.5, 12);
    std::vector<double> worst(eps.size(), 0.0);
    for (const auto& c : centers) {
        const auto m = ball_mass(v, c, eps);
        for (std::size_t k = 0; k < eps.size(); ++k) worst[k] = std::max(worst[k], m[k]);
    }
    rep.C = 0.0;
    std::vector<double> bx, by;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        rep.C = std::max(rep.C, worst[k] / std::pow(eps[k], alpha));
        if (worst[k] > 0.0) {
            bx.push_back(std::log(eps[k]));
            by.push_back(std::log(worst[k]));
        }
    }
    if (bx.size() >= 2) rep.ball_exponent = fit_line(bx, by).slope;
    rep.conclusion_holds = rep.ball_exponent >= alpha - tolerance;
    rep.consistent = !rep.hypothesis_holds || rep.conclusion_holds;
    return rep;
}

}  // namespace nocutoff
