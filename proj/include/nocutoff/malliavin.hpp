#pragma once

// First-order Malliavin objects of a tagged particle's jump chain: the flow
// Y_t, jump vectors H_k, covariance sigma(V_t), the regularized determinant,
// the localization weight, the Laplace nondegeneracy table and the density
// q_{eps,zeta} of the chain coordinates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"
#include "jump_chain.hpp"
#include "kernel.hpp"
#include "mollifier.hpp"
#include "particles.hpp"
#include "rng.hpp"

namespace nocutoff {

struct TangentState {
    double t = 0.0;
    Mat2 Y = Mat2::Identity();
    Mat2 Y_inv = Mat2::Identity();
    Mat2 S = Mat2::Zero();
    Mat2 sigma = Mat2::Zero();
    Vec2 v = Vec2::Zero();          ///< V_t reconstructed from the chain
    std::size_t jumps = 0;          ///< accepted events up to t
    double max_op_norm_Y = 1.0;     ///< sup over event times of |Y|
    double max_op_norm_Y_inv = 1.0;
};

inline Mat2 inverse2(const Mat2& m) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    Mat2 r;
    r << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return r / det;
}

/// Post-event state of one chain step.
inline Vec2 chain_step(const Vec2& v_prev, const Vec2& partner, double z, const PowerLawKernel& kernel,
                       const AngularCutoff& cut) {
    return v_prev + cut.I(z) * (deviation(kernel.vartheta(z)) * (v_prev - partner));
}

/// Throws ConfigError unless event times increase and each recorded
/// V_prev equals the previous post-state (relative 1e-9).
inline void check_chain(const JumpChain& chain, const PowerLawKernel& kernel, const AngularCutoff& cut) {
    Vec2 v = chain.v0;
    double last = -std::numeric_limits<double>::infinity();
    for (const auto& ev : chain.events) {
        if (!(ev.time > last)) throw ConfigError("jump chain: event times not strictly increasing");
        last = ev.time;
        if ((ev.v_prev - v).norm() > 1e-9 * std::max(1.0, v.norm()))
            throw ConfigError("jump chain: V_prev does not match the previous post-state");
        if (ev.accepted) v = chain_step(ev.v_prev, ev.partner, ev.z, kernel, cut);
    }
}

/// Y_t, S_t and sigma(V_t) over accepted events with T_k <= t.
inline TangentState tangent_flow(const JumpChain& chain, double t, double zeta, const KernelParams& params) {
    const PowerLawKernel kernel(params.nu);
    const AngularCutoff cut(zeta, kernel);
    check_chain(chain, kernel, cut);
    TangentState st;
    st.t = t;
    st.v = chain.v0;
    for (const auto& ev : chain.events) {
        if (ev.time > t) break;
        if (!ev.accepted) continue;
        const double theta = kernel.vartheta(ev.z);
        const double weight = cut.I(ev.z);
        const Vec2 x = ev.v_prev - ev.partner;
        const Mat2 step = Mat2::Identity() + weight * deviation(theta);
        st.Y = step * st.Y;
        st.Y_inv = st.Y_inv * inverse2(step);
        st.v = ev.v_prev + weight * (deviation(theta) * x);
        ++st.jumps;
        const double pi = cut.U(ev.z);
        if (pi != 0.0) {
            const Vec2 h = kernel.vartheta_prime(ev.z) * (deviation_matrix_deriv(theta) * x);
            const Vec2 g = st.Y_inv * h;
            st.S += (pi * pi) * (g * g.transpose());
        }
        st.max_op_norm_Y = std::max(st.max_op_norm_Y, op_norm(st.Y));
        st.max_op_norm_Y_inv = std::max(st.max_op_norm_Y_inv, op_norm(st.Y_inv));
    }
    st.S = 0.5 * (st.S + st.S.transpose());
    st.sigma = st.Y * st.S * st.Y.transpose();
    st.sigma = 0.5 * (st.sigma + st.sigma.transpose());
    return st;
}

/// u_zeta(t) = t zeta^{4+nu}
inline double regularization_floor(double t, double zeta, double nu) {
    if (!(t > 0.0)) throw DomainError("u_zeta(t): t must be positive");
    return t * std::pow(zeta, 4.0 + nu);
}

inline double regularized_det(const Mat2& sigma, double t, double zeta, const KernelParams& params) {
    const double u = regularization_floor(t, zeta, params.nu);
    return (u + sigma(0, 0)) * (u + sigma(1, 1)) - sigma(0, 1) * sigma(1, 0);
}

inline double regularized_det(const TangentState& st, double t, double zeta, const KernelParams& params) {
    return regularized_det(st.sigma, t, zeta, params);
}

//---------------------------------------------------------------------------//
// Replica aggregates
//---------------------------------------------------------------------------//

struct MomentEstimate {
    double mean = 0.0;
    double ci_low = 0.0;   ///< 2.5% bootstrap percentile
    double ci_high = 0.0;  ///< 97.5% bootstrap percentile
    std::size_t samples = 0;
};

/// Mean and percentile-bootstrap 95% interval of `values`.
inline MomentEstimate bootstrap_mean(const std::vector<double>& values, std::uint64_t seed,
                                     std::size_t resamples = 1000) {
    if (values.empty()) throw ConfigError("bootstrap: empty sample");
    MomentEstimate est;
    est.samples = values.size();
    double m = 0.0;
    for (double x : values) m += x;
    est.mean = m / static_cast<double>(values.size());
    CounterRng rng = CounterRng::stream(seed, 0, StreamRole::bootstrap);
    std::vector<double> means(resamples);
    for (auto& bm : means) {
        double acc = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) acc += values[rng.index(values.size())];
        bm = acc / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    est.ci_low = means[static_cast<std::size_t>(0.025 * (resamples - 1))];
    est.ci_high = means[static_cast<std::size_t>(0.975 * (resamples - 1))];
    return est;
}

/// E[det(u_zeta(t) I + sigma)^{-p}] over replica states at common t.
inline MomentEstimate inverse_det_moment(const std::vector<TangentState>& states, double p, double zeta,
                                         const KernelParams& params, std::uint64_t seed = 1) {
    if (states.empty()) throw ConfigError("inverse_det_moment: empty replica set");
    if (!(p >= 1.0)) throw ConfigError("inverse_det_moment: p must be >= 1");
    std::vector<double> vals;
    vals.reserve(states.size());
    for (const auto& st : states) vals.push_back(std::pow(regularized_det(st, st.t, zeta, params), -p));
    return bootstrap_mean(vals, seed);
}

struct LaplaceRow {
    double xi = 0.0;
    double mean = 1.0;  ///< direction- and replica-averaged exp(-xi* S xi)
    double std_error = 0.0;
};

struct LaplaceTable {
    std::vector<LaplaceRow> rows;
    double predicted_exponent = 0.0;  ///< nu/(2+nu)
    double saturation_xi = 0.0;       ///< |xi| with |xi|^{nu/(2+nu)} = zeta^{-nu}
    double fitted_exponent = NAN;     ///< slope of log(-log L) vs log|xi| in the window
    std::size_t fit_points = 0;
    bool non_increasing = true;
};

/// Empirical E[exp(-xi* S_t xi)] per radius |xi|, averaged over
/// `directions` equispaced directions. The exponent fit uses radii below
/// the saturation point where 1 - L is above 1e-3 and L above the replica
/// noise floor 3/sqrt(R).
inline LaplaceTable laplace_nondegeneracy(const std::vector<Mat2>& S, const std::vector<double>& xi_grid,
                                          double zeta, double nu, std::size_t directions = 16) {
    LaplaceTable tab;
    tab.predicted_exponent = nu / (2.0 + nu);
    tab.saturation_xi = std::pow(zeta, -(2.0 + nu));
    const double R = static_cast<double>(S.size());
    for (double xi : xi_grid) {
        LaplaceRow row;
        row.xi = xi;
        if (!S.empty()) {
            double m = 0.0, m2 = 0.0;
            for (const auto& s : S) {
                double acc = 0.0;
                for (std::size_t d = 0; d < directions; ++d) {
                    const double a = kPi * static_cast<double>(d) / static_cast<double>(directions);
                    const Vec2 e(std::cos(a), std::sin(a));
                    acc += std::exp(-xi * xi * e.dot(s * e));
                }
                acc /= static_cast<double>(directions);
                m += acc;
                m2 += acc * acc;
            }
            row.mean = m / R;
            row.std_error = R > 1 ? std::sqrt(std::max(0.0, (m2 / R - row.mean * row.mean) / (R - 1.0))) : 0.0;
        }
        tab.rows.push_back(row);
    }
    for (std::size_t k = 1; k < tab.rows.size(); ++k)
        if (tab.rows[k].xi >= tab.rows[k - 1].xi && tab.rows[k].mean > tab.rows[k - 1].mean + 1e-15)
            tab.non_increasing = false;

    const double floor = S.empty() ? 1.0 : 3.0 / std::sqrt(R);
    std::vector<double> lx, ly;
    for (const auto& row : tab.rows)
        if (row.xi > 0.0 && row.xi <= tab.saturation_xi && row.mean < 1.0 - 1e-3 && row.mean > floor) {
            lx.push_back(std::log(row.xi));
            ly.push_back(std::log(-std::log(row.mean)));
        }
    tab.fit_points = lx.size();
    if (lx.size() >= 2) tab.fitted_exponent = fit_line(lx, ly).slope;
    return tab;
}

//---------------------------------------------------------------------------//
// Localization weight
//---------------------------------------------------------------------------//

/// G_t = Psi(Phi(|V_0|) + sum_k Phi(|V_{T_k}|)) over all clock rings up to t
/// (a rejected ring leaves V unchanged but still counts).
inline double localization_weight(const JumpChain& chain, double t, double zeta, const KernelParams& params,
                                  const MollifierParams& mp) {
    const PowerLawKernel kernel(params.nu);
    const AngularCutoff cut(zeta, kernel);
    const LocalizationPair loc = localization_pair(mp);
    Vec2 v = chain.v0;
    double sum = loc.Phi(v.norm());
    for (const auto& ev : chain.events) {
        if (ev.time > t) break;
        if (ev.accepted) v = chain_step(ev.v_prev, ev.partner, ev.z, kernel, cut);
        sum += loc.Phi(v.norm());
    }
    return LocalizationPair::Psi(sum);
}

/// sup over [0,t] of |V| along the chain.
inline double chain_sup_norm(const JumpChain& chain, double t, double zeta, const KernelParams& params) {
    const PowerLawKernel kernel(params.nu);
    const AngularCutoff cut(zeta, kernel);
    Vec2 v = chain.v0;
    double sup = v.norm();
    for (const auto& ev : chain.events) {
        if (ev.time > t) break;
        if (ev.accepted) v = chain_step(ev.v_prev, ev.partner, ev.z, kernel, cut);
        sup = std::max(sup, v.norm());
    }
    return sup;
}

//---------------------------------------------------------------------------//
// Finite-difference check of D_k V_t
//---------------------------------------------------------------------------//

/// V_t from the chain recursion with Z_k replaced by z_k, holding partners
/// and acceptance flags fixed.
inline Vec2 replay_chain(const JumpChain& chain, double t, double zeta, const KernelParams& params,
                         std::size_t k, double z_k) {
    const PowerLawKernel kernel(params.nu);
    const AngularCutoff cut(zeta, kernel);
    Vec2 v = chain.v0;
    for (std::size_t e = 0; e < chain.events.size(); ++e) {
        const auto& ev = chain.events[e];
        if (ev.time > t) break;
        if (!ev.accepted) continue;
        v = chain_step(v, ev.partner, e == k ? z_k : ev.z, kernel, cut);
    }
    return v;
}

struct DerivativeCheck {
    Vec2 analytic = Vec2::Zero();     ///< Y_t Y_{T_k}^{-1} H_k
    Vec2 finite_diff = Vec2::Zero();  ///< central difference with step h
    double rel_error = 0.0;
};

/// Compares the analytic derivative with respect to Z_k against a central
/// difference. Event k must be accepted with I_zeta = 1 near Z_k.
inline DerivativeCheck check_derivative(const JumpChain& chain, double t, double zeta,
                                        const KernelParams& params, std::size_t k, double h = 1e-6) {
    const PowerLawKernel kernel(params.nu);
    const AngularCutoff cut(zeta, kernel);
    if (k >= chain.events.size() || !chain.events[k].accepted)
        throw ConfigError("check_derivative: event k is not an accepted event");
    const auto& evk = chain.events[k];
    if (evk.time > t) throw ConfigError("check_derivative: event k after t");
    if (!(std::abs(evk.z) + h < cut.g())) throw ConfigError("check_derivative: I_zeta not flat near Z_k");

    // Y_t Y_{T_k}^{-1} is the ordered product of the factors after event k.
    Vec2 v = chain.v0;
    Mat2 after = Mat2::Identity();
    Vec2 h_k = Vec2::Zero();
    for (std::size_t e = 0; e < chain.events.size(); ++e) {
        const auto& ev = chain.events[e];
        if (ev.time > t) break;
        if (!ev.accepted) continue;
        const double theta = kernel.vartheta(ev.z);
        if (e == k) h_k = kernel.vartheta_prime(ev.z) * (deviation_matrix_deriv(theta) * (v - ev.partner));
        if (e > k) after = (Mat2::Identity() + cut.I(ev.z) * deviation(theta)) * after;
        v = chain_step(v, ev.partner, ev.z, kernel, cut);
    }
    DerivativeCheck out;
    out.analytic = after * h_k;
    const Vec2 vp = replay_chain(chain, t, zeta, params, k, evk.z + h);
    const Vec2 vm = replay_chain(chain, t, zeta, params, k, evk.z - h);
    out.finite_diff = (vp - vm) / (2.0 * h);
    out.rel_error = (out.finite_diff - out.analytic).norm() / std::max(out.analytic.norm(), 1e-300);
    return out;
}

/// Synthetic chain: Poisson(rate) ring times on [0,t], partners N(0, I),
/// z uniform on the I_zeta support, acceptance with probability 1/2.
inline JumpChain random_chain(CounterRng& rng, double t, double rate, double zeta, const KernelParams& params) {
    const PowerLawKernel kernel(params.nu);
    const AngularCutoff cut(zeta, kernel);
    JumpChain chain;
    chain.v0 = rng.normal2();
    Vec2 v = chain.v0;
    double s = rng.exponential(rate);
    while (s <= t) {
        ChainEvent ev;
        ev.time = s;
        ev.v_prev = v;
        ev.partner = rng.normal2();
        ev.z = (2.0 * rng.uniform() - 1.0) * cut.support();
        ev.u = rng.uniform();
        ev.accepted = ev.u < 0.5;
        if (ev.accepted) v = chain_step(v, ev.partner, ev.z, kernel, cut);
        chain.events.push_back(ev);
        s += rng.exponential(rate);
    }
    return chain;
}

//---------------------------------------------------------------------------//
// Replica driver
//---------------------------------------------------------------------------//

/// Jump chain of particle 0 in each of `replicas` independent one-sided runs.
inline std::vector<JumpChain> collect_chains(const SimulationConfig& config, std::size_t replicas) {
    if (config.style != CollisionStyle::one_sided)
        throw ConfigError("jump chains need one-sided collisions (a symmetric partner moves off-chain)");
    std::vector<JumpChain> chains(replicas);
    for_each_replica(replicas, [&](std::size_t r) {
        SimulationOptions opt;
        opt.tagged = {0};
        chains[r] = simulate(init_ensemble(config, r), config, r, opt).chains.front();
    });
    return chains;
}

struct MalliavinDiagnostics {
    double t = 0.0;
    double det_Y = 1.0;
    double op_norm_Y = 1.0;
    double op_norm_Y_inv = 1.0;
    double trace_sigma = 0.0;
    double det_reg = 0.0;
    double G_weight = 1.0;
    std::size_t jumps = 0;
};

inline MalliavinDiagnostics diagnose(const JumpChain& chain, double t, const SimulationConfig& config) {
    const TangentState st = tangent_flow(chain, t, config.zeta, config.kernel);
    MalliavinDiagnostics d;
    d.t = t;
    d.det_Y = st.Y.determinant();
    d.op_norm_Y = op_norm(st.Y);
    d.op_norm_Y_inv = op_norm(st.Y_inv);
    d.trace_sigma = st.sigma.trace();
    d.det_reg = regularized_det(st, t, config.zeta, config.kernel);
    d.G_weight = localization_weight(chain, t, config.zeta, config.kernel, config.mollifier);
    d.jumps = st.jumps;
    return d;
}


//---------------------------------------------------------------------------//
// Density of the chain coordinates
//---------------------------------------------------------------------------//

/// q(t,w,rho,z) = g chi(z - G(zeta) - 3) + phi^gamma(|w - v_rho|)/lambda 1{|z| <= G(zeta)+1}
/// at a fixed state w, with f_t the empirical measure of `ens`. g is computed
/// once at construction.
class QDensity {
  public:
    QDensity(const Vec2& w, const Ensemble& ens, const KernelParams& params, const MollifierParams& mp,
             double zeta)
        : w_(w), gamma_(params.gamma), mol_(mp), cut_(zeta, PowerLawKernel(params.nu)) {
        if (ens.velocities.empty()) throw ConfigError("q density: empty ensemble");
        cap_ = 2.0 * std::pow(mp.gamma_eps, params.gamma);
        lambda_ = 2.0 * cut_.support() * cap_;
        double acc = 0.0;
        for (const auto& vj : ens.velocities) acc += mol_.phi_pow((w - vj).norm(), gamma_);
        g_ = 1.0 - acc / static_cast<double>(ens.velocities.size()) / cap_;
    }

    /// g_{eps,zeta}(t,w)
    double g() const { return g_; }
    double lambda() const { return lambda_; }

    double operator()(const Vec2& partner, double z) const {
        double q = g_ * bump()(z - cut_.g() - 3.0);
        if (std::abs(z) <= cut_.support()) q += mol_.phi_pow((w_ - partner).norm(), gamma_) / lambda_;
        return q;
    }

    /// Integral over rho (average over the ensemble's atoms) and z
    /// (adaptive Gauss-Kronrod on each smooth piece).
    double total_mass(const Ensemble& ens) const {
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        const double b = cut_.support(), c = cut_.g() + 3.0;
        double total = 0.0;
        for (const auto& partner : ens.velocities) {
            auto q = [&](double z) { return (*this)(partner, z); };
            total += GK::integrate(q, -b, b, 5, 1e-12) + GK::integrate(q, c - 1.0, c + 1.0, 10, 1e-12);
        }
        return total / static_cast<double>(ens.velocities.size());
    }

  private:
    Vec2 w_;
    double gamma_;
    Mollifier mol_;
    AngularCutoff cut_;
    double cap_ = 0.0;
    double lambda_ = 0.0;
    double g_ = 0.0;
};

inline double eval_q_density(const Vec2& w, const Vec2& partner, double z, const Ensemble& ens,
                             const KernelParams& params, const MollifierParams& mp, double zeta) {
    return QDensity(w, ens, params, mp, zeta)(partner, z);
}

}  // namespace nocutoff
