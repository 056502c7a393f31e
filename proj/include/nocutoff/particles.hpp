#pragma once

// Event-driven mean-field particle approximation of the mollified/truncated
// jump SDE, coupled multi-level runs, and ensemble estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "jump_chain.hpp"
#include "kernel.hpp"
#include "mollifier.hpp"
#include "rng.hpp"

namespace nocutoff {

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

enum class CollisionStyle {
    one_sided,  ///< Nanbu: only the picked particle jumps (matches the SDE)
    symmetric,  ///< Bird: both partners jump, exactly conservative
};

inline std::string to_string(CollisionStyle s) {
    return s == CollisionStyle::one_sided ? "one-sided" : "symmetric";
}

inline CollisionStyle collision_style_from_string(const std::string& s) {
    if (s == "one-sided" || s == "one_sided" || s == "nanbu") return CollisionStyle::one_sided;
    if (s == "symmetric" || s == "bird") return CollisionStyle::symmetric;
    throw ConfigError("unknown collision style '" + s + "'");
}

struct InitialLaw {
    enum class Kind { gaussian, two_point, uniform_disk, point_mass };
    Kind kind = Kind::gaussian;
    double e0 = 2.0;       ///< gaussian: E|v|^2
    Vec2 w{1.0, 0.0};      ///< two_point atoms at +w and -w; point_mass atom
    double radius = 1.0;   ///< uniform_disk

    static InitialLaw gaussian(double e0) { return {Kind::gaussian, e0, {1.0, 0.0}, 1.0}; }
    static InitialLaw two_point(Vec2 w) { return {Kind::two_point, 2.0, w, 1.0}; }
    static InitialLaw uniform_disk(double r) { return {Kind::uniform_disk, 2.0, {1.0, 0.0}, r}; }
    static InitialLaw point_mass(Vec2 at) { return {Kind::point_mass, 0.0, at, 0.0}; }

    std::string name() const {
        switch (kind) {
            case Kind::gaussian: return "gaussian";
            case Kind::two_point: return "two_point";
            case Kind::uniform_disk: return "uniform_disk";
            case Kind::point_mass: return "point_mass";
        }
        return "?";
    }

    void validate() const {
        switch (kind) {
            case Kind::gaussian:
                if (!(e0 > 0.0)) throw ConfigError("initial law: gaussian e0 must be positive");
                break;
            case Kind::two_point:
                if (!(w.norm() > 0.0))
                    throw ConfigError("initial law: two_point with w = 0 is a Dirac mass");
                break;
            case Kind::uniform_disk:
                if (!(radius > 0.0)) throw ConfigError("initial law: uniform_disk radius must be positive");
                break;
            case Kind::point_mass:
                throw ConfigError("initial law: f0 must not be a Dirac mass");
        }
    }
};

struct SimulationConfig {
    KernelParams kernel = KernelParams::make(0.75, 0.25);
    MollifierParams mollifier = MollifierParams::make(1e-2, KernelParams::make(0.75, 0.25).eta0);
    double zeta = 0.05;
    std::size_t n_particles = 10000;
    double horizon = 1.0;
    CollisionStyle style = CollisionStyle::one_sided;
    InitialLaw law = InitialLaw::gaussian(2.0);
    std::uint64_t seed = 1;
    std::vector<double> output_times{0.25, 0.5, 1.0};

    /// lambda_{eps,zeta} = 4 (G(zeta)+1) Gamma_eps^gamma, per particle.
    double jump_rate() const {
        const AngularCutoff cut(zeta, PowerLawKernel(kernel.nu));
        return 4.0 * cut.support() * std::pow(mollifier.gamma_eps, kernel.gamma);
    }

    void validate() const {
        kernel.validate();
        if (std::abs(mollifier.eta0 - kernel.eta0) > 1e-15)
            throw ConfigError("SimulationConfig: mollifier eta0 differs from kernel eta0");
        MollifierParams::make(mollifier.epsilon, mollifier.eta0);
        if (!(zeta > 0.0 && zeta < 1.0)) throw ConfigError("SimulationConfig: zeta must lie in (0,1)");
        if (n_particles < 2) throw ConfigError("SimulationConfig: need at least 2 particles");
        if (!(horizon > 0.0)) throw ConfigError("SimulationConfig: horizon must be positive");
        law.validate();
        const double rate = jump_rate() * static_cast<double>(n_particles);
        if (!std::isfinite(rate) || !(rate > 0.0))
            throw ConfigError("SimulationConfig: total jump rate overflows");
        for (double t : output_times)
            if (!(t >= 0.0 && t <= horizon))
                throw ConfigError("SimulationConfig: output times must lie in [0, horizon]");
        if (!std::is_sorted(output_times.begin(), output_times.end()))
            throw ConfigError("SimulationConfig: output times must be sorted");
    }

    /// Same configuration at another (epsilon, zeta) level.
    SimulationConfig at_level(double epsilon, double zeta_level) const {
        SimulationConfig c = *this;
        c.mollifier = MollifierParams::make(epsilon, kernel.eta0);
        c.zeta = zeta_level;
        return c;
    }
};

//---------------------------------------------------------------------------//
// Ensemble
//---------------------------------------------------------------------------//

struct Ensemble {
    std::vector<Vec2> velocities;
    double time = 0.0;

    std::size_t size() const { return velocities.size(); }

    Vec2 mean() const {
        Vec2 m = Vec2::Zero();
        for (const auto& v : velocities) m += v;
        return m / static_cast<double>(velocities.size());
    }
    double energy() const {
        double e = 0.0;
        for (const auto& v : velocities) e += v.squaredNorm();
        return e / static_cast<double>(velocities.size());
    }
};

/// N i.i.d. draws from the initial law followed by exact recentering. The
/// two-point law is drawn balanced (N/2 atoms each) so that it stays on its
/// atoms for even N.
inline Ensemble init_ensemble(const SimulationConfig& config, std::uint64_t replica = 0) {
    config.law.validate();
    if (config.n_particles < 2) throw ConfigError("init_ensemble: need at least 2 particles");
    const std::size_t n = config.n_particles;
    CounterRng rng = CounterRng::stream(config.seed, replica, StreamRole::initial);
    Ensemble ens;
    ens.velocities.resize(n);
    const auto& law = config.law;
    switch (law.kind) {
        case InitialLaw::Kind::gaussian: {
            const double sd = std::sqrt(0.5 * law.e0);
            for (auto& v : ens.velocities) v = sd * rng.normal2();
            break;
        }
        case InitialLaw::Kind::two_point:
            for (std::size_t i = 0; i < n; ++i) ens.velocities[i] = (i % 2 == 0) ? law.w : Vec2(-law.w);
            break;
        case InitialLaw::Kind::uniform_disk:
            for (auto& v : ens.velocities) {
                const double r = law.radius * std::sqrt(rng.uniform());
                const double a = 2.0 * kPi * rng.uniform();
                v = {r * std::cos(a), r * std::sin(a)};
            }
            break;
        case InitialLaw::Kind::point_mass:
            throw ConfigError("init_ensemble: f0 must not be a Dirac mass");
    }
    const Vec2 m = ens.mean();
    if (m.squaredNorm() > 0.0)
        for (auto& v : ens.velocities) v -= m;
    if (!(ens.energy() > 0.0)) throw ConfigError("init_ensemble: sample energy e0 is zero");
    return ens;
}

//---------------------------------------------------------------------------//
// Simulation
//---------------------------------------------------------------------------//

struct Snapshot {
    double time = 0.0;
    std::vector<Vec2> velocities;
};

/// Record of one global clock ring, as written to the event-log CSV.
struct EventRecord {
    double time;
    std::uint32_t i;
    std::uint32_t j;
    double z;
    double u;
    bool accepted;
};

struct SimulationStats {
    std::uint64_t events = 0;
    std::uint64_t accepted = 0;
    /// Running sum of phi_eps^gamma(|V_i - V_j|)/(2 Gamma_eps^gamma) over
    /// events, i.e. the conditional acceptance probability.
    double acceptance_prob_sum = 0.0;
    double max_momentum_error = 0.0;  ///< per-event relative, symmetric mode
    double max_energy_error = 0.0;

    double acceptance_fraction() const {
        return events ? static_cast<double>(accepted) / static_cast<double>(events) : 0.0;
    }
    double mean_acceptance_prob() const {
        return events ? acceptance_prob_sum / static_cast<double>(events) : 0.0;
    }
};

struct SimulationOptions {
    bool record_events = false;
    std::vector<std::size_t> tagged;  ///< particles whose jump chains are recorded
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    SimulationStats stats;
    std::vector<EventRecord> events;
    std::vector<JumpChain> chains;  ///< one per tagged particle (leg 0)
};

/// One (epsilon, zeta) level of a coupled run.
struct Leg {
    double epsilon;
    double zeta;
};

namespace detail {

struct LegState {
    Mollifier mollifier;
    AngularCutoff cutoff;
    std::vector<Vec2> v;
    SimulationStats stats;
    std::vector<Snapshot> snapshots;
};

/// Core engine: all legs share one Poisson clock of rate N * lambda_max and
/// one stream of (i, j, z, u) draws, where lambda_max uses the largest
/// G(zeta)+1 and Gamma_eps^gamma among the legs. A leg accepts when
/// u <= phi_eps^gamma(|V_i - V_j|) for its own eps and state and applies the
/// jump weighted by its own I_zeta(z); z outside its support gives I = 0, so
/// each leg sees exactly its own Poisson measure restricted to its range.
inline std::vector<LegState> run_legs(const SimulationConfig& config, const std::vector<Leg>& legs,
                                      const Ensemble& initial, std::uint64_t replica,
                                      const SimulationOptions& options, Trajectory* leg0_extra) {
    const PowerLawKernel kernel(config.kernel.nu);
    const double gamma = config.kernel.gamma;
    const std::size_t n = initial.size();
    if (n < 2) throw ConfigError("simulate: need at least 2 particles");

    std::vector<LegState> states;
    states.reserve(legs.size());
    double support_max = 0.0, ceiling_pow_max = 0.0;
    for (const auto& leg : legs) {
        LegState st{Mollifier(MollifierParams::make(leg.epsilon, config.kernel.eta0)),
                    AngularCutoff(leg.zeta, kernel), initial.velocities, {}, {}};
        support_max = std::max(support_max, st.cutoff.support());
        ceiling_pow_max = std::max(ceiling_pow_max, std::pow(st.mollifier.ceiling(), gamma));
        states.push_back(std::move(st));
    }
    const double u_max = 2.0 * ceiling_pow_max;
    const double rate = 4.0 * support_max * ceiling_pow_max * static_cast<double>(n);
    if (!std::isfinite(rate)) throw ConfigError("simulate: total jump rate overflows");

    std::vector<double> inv_u_max_leg(states.size());
    for (std::size_t l = 0; l < states.size(); ++l)
        inv_u_max_leg[l] = 1.0 / (2.0 * std::pow(states[l].mollifier.ceiling(), gamma));

    std::vector<std::ptrdiff_t> tag_slot(options.tagged.empty() ? 0 : n, -1);
    if (leg0_extra) {
        leg0_extra->chains.assign(options.tagged.size(), {});
        for (std::size_t k = 0; k < options.tagged.size(); ++k) {
            const std::size_t idx = options.tagged[k];
            if (idx >= n) throw ConfigError("simulate: tagged index out of range");
            tag_slot[idx] = static_cast<std::ptrdiff_t>(k);
            leg0_extra->chains[k].v0 = initial.velocities[idx];
        }
    }

    CounterRng rng = CounterRng::stream(config.seed, replica, StreamRole::events);
    auto out = config.output_times.begin();
    double t = initial.time;
    const bool symmetric = config.style == CollisionStyle::symmetric;

    auto take_snapshots_until = [&](double upto) {
        while (out != config.output_times.end() && *out < upto) {
            for (auto& st : states) st.snapshots.push_back({*out, st.v});
            ++out;
        }
    };

    while (true) {
        t += rng.exponential(rate);
        if (t > config.horizon) break;
        take_snapshots_until(t);

        const std::size_t i = rng.index(n);
        std::size_t j = rng.index(n - 1);
        if (j >= i) ++j;
        const double z = (2.0 * rng.uniform() - 1.0) * support_max;
        const double u = rng.uniform() * u_max;

        const double theta = kernel.vartheta(z);
        const Mat2 a = deviation(theta);

        for (std::size_t l = 0; l < states.size(); ++l) {
            LegState& st = states[l];
            const Vec2 x = st.v[i] - st.v[j];
            const double weight = st.cutoff.I(z);
            const double phi_g = st.mollifier.phi_pow(x.norm(), gamma);
            const bool accepted = symmetric ? (u <= phi_g * weight) : (u <= phi_g);
            ++st.stats.events;
            st.stats.acceptance_prob_sum += phi_g * inv_u_max_leg[l];

            if (l == 0 && leg0_extra) {
                if (options.record_events)
                    leg0_extra->events.push_back({t, static_cast<std::uint32_t>(i),
                                                  static_cast<std::uint32_t>(j), z, u, accepted});
                if (!tag_slot.empty() && tag_slot[i] >= 0)
                    leg0_extra->chains[static_cast<std::size_t>(tag_slot[i])].events.push_back(
                        {t, st.v[i], st.v[j], z, u, accepted});
            }
            if (!accepted) continue;
            ++st.stats.accepted;
            if (weight <= 0.0) continue;

            if (symmetric) {
                const Vec2 dv = a * x;
                const Vec2 p_before = st.v[i] + st.v[j];
                const double e_before = st.v[i].squaredNorm() + st.v[j].squaredNorm();
                st.v[i] += dv;
                st.v[j] -= dv;
                const double p_scale = st.v[i].norm() + st.v[j].norm() + x.norm();
                const double dp = (st.v[i] + st.v[j] - p_before).norm();
                const double de = std::abs(st.v[i].squaredNorm() + st.v[j].squaredNorm() - e_before);
                if (p_scale > 0.0)
                    st.stats.max_momentum_error = std::max(st.stats.max_momentum_error, dp / p_scale);
                if (e_before > 0.0)
                    st.stats.max_energy_error = std::max(st.stats.max_energy_error, de / e_before);
            } else {
                st.v[i] += weight * (a * x);
            }
        }
    }
    take_snapshots_until(std::numeric_limits<double>::infinity());
    return states;
}

}  // namespace detail

/// Runs the particle system from `initial` over [initial.time, horizon],
/// taking snapshots at config.output_times.
inline Trajectory simulate(const Ensemble& initial, const SimulationConfig& config,
                           std::uint64_t replica = 0, const SimulationOptions& options = {}) {
    config.validate();
    Trajectory traj;
    auto states = detail::run_legs(config, {{config.mollifier.epsilon, config.zeta}}, initial,
                                   replica, options, &traj);
    traj.snapshots = std::move(states.front().snapshots);
    traj.stats = states.front().stats;
    return traj;
}

/// Runs several (epsilon, zeta) levels from the same initial ensemble under
/// one shared event stream. Returns the snapshots of every leg.
struct CoupledRun {
    std::vector<Leg> legs;
    std::vector<std::vector<Snapshot>> snapshots;  ///< [leg][output time]
    std::vector<SimulationStats> stats;
};

inline CoupledRun run_coupled_legs(const SimulationConfig& config, const std::vector<Leg>& legs,
                                   std::uint64_t replica = 0) {
    config.validate();
    if (legs.empty()) throw ConfigError("run_coupled_legs: no legs");
    const Ensemble initial = init_ensemble(config, replica);
    auto states = detail::run_legs(config, legs, initial, replica, {}, nullptr);
    CoupledRun run;
    run.legs = legs;
    for (auto& st : states) {
        run.snapshots.push_back(std::move(st.snapshots));
        run.stats.push_back(st.stats);
    }
    return run;
}

//---------------------------------------------------------------------------//
// Replica parallelism
//---------------------------------------------------------------------------//

/// Calls fn(r) for r in [0, count) on up to hardware_concurrency threads.
/// Results must be written to per-index slots; reduction order is then
/// independent of scheduling.
template <class Fn>
void for_each_replica(std::size_t count, Fn&& fn) {
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, count);
    if (workers <= 1) {
        for (std::size_t r = 0; r < count; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t r = w; r < count; r += workers) fn(r);
        });
    for (auto& th : pool) th.join();
}

//---------------------------------------------------------------------------//
// Coupling experiments
//---------------------------------------------------------------------------//

enum class CouplingKind { zeta, epsilon };

struct CouplingRow {
    double level = 0.0;
    double time = 0.0;
    double mean_gap = 0.0;  ///< E|V^level - V^ref|^beta
    double std_error = 0.0;
};

struct CouplingResult {
    CouplingKind kind = CouplingKind::zeta;
    double beta = 1.0;
    double reference_level = 0.0;
    std::vector<CouplingRow> rows;
    double slope = NAN;  ///< log-log slope of the gap vs level at the last output time
};

struct LinearFit {
    double slope = NAN;
    double intercept = NAN;
    double r2 = NAN;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return {};
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

/// Coupled gap study. `levels` must be strictly decreasing; the reference
/// leg runs at min(levels)/4 and stands in for the untruncated process.
inline CouplingResult run_coupling(const SimulationConfig& config, CouplingKind kind,
                                   const std::vector<double>& levels, double beta,
                                   std::size_t replicas) {
    if (levels.size() < 2) throw ConfigError("run_coupling: need at least two levels");
    for (std::size_t k = 1; k < levels.size(); ++k)
        if (!(levels[k] < levels[k - 1]))
            throw ConfigError("run_coupling: levels must be distinct and strictly decreasing");
    if (!(beta > config.kernel.nu && beta <= 1.0))
        throw ConfigError("run_coupling: beta must lie in (nu, 1]");
    if (replicas == 0) throw ConfigError("run_coupling: need at least one replica");

    CouplingResult res;
    res.kind = kind;
    res.beta = beta;
    res.reference_level = levels.back() / 4.0;

    std::vector<Leg> legs;
    for (double lv : levels)
        legs.push_back(kind == CouplingKind::zeta ? Leg{config.mollifier.epsilon, lv}
                                                  : Leg{lv, config.zeta});
    legs.push_back(kind == CouplingKind::zeta ? Leg{config.mollifier.epsilon, res.reference_level}
                                              : Leg{res.reference_level, config.zeta});

    const std::size_t n_times = config.output_times.size();
    // per replica: [level][time] particle-mean gap
    std::vector<std::vector<std::vector<double>>> per_rep(replicas);
    for_each_replica(replicas, [&](std::size_t r) {
        const CoupledRun run = run_coupled_legs(config, legs, r);
        auto& out = per_rep[r];
        out.assign(levels.size(), std::vector<double>(n_times, 0.0));
        const auto& ref = run.snapshots.back();
        for (std::size_t l = 0; l < levels.size(); ++l)
            for (std::size_t k = 0; k < n_times; ++k) {
                double acc = 0.0;
                const auto& a = run.snapshots[l][k].velocities;
                const auto& b = ref[k].velocities;
                for (std::size_t p = 0; p < a.size(); ++p) acc += std::pow((a[p] - b[p]).norm(), beta);
                out[l][k] = acc / static_cast<double>(a.size());
            }
    });

    for (std::size_t l = 0; l < levels.size(); ++l)
        for (std::size_t k = 0; k < n_times; ++k) {
            double m = 0.0, m2 = 0.0;
            for (const auto& rep : per_rep) {
                m += rep[l][k];
                m2 += rep[l][k] * rep[l][k];
            }
            const double R = static_cast<double>(replicas);
            m /= R;
            const double var = replicas > 1 ? std::max(0.0, (m2 / R - m * m) * R / (R - 1.0)) : 0.0;
            res.rows.push_back({levels[l], config.output_times[k], m, std::sqrt(var / R)});
        }

    std::vector<double> lx, ly;
    for (const auto& row : res.rows)
        if (row.time == config.output_times.back() && row.mean_gap > 0.0) {
            lx.push_back(std::log(row.level));
            ly.push_back(std::log(row.mean_gap));
        }
    res.slope = fit_line(lx, ly).slope;
    return res;
}

//---------------------------------------------------------------------------//
// Conservation experiment
//---------------------------------------------------------------------------//

struct ConservationRow {
    double time = 0.0;
    Vec2 mean_momentum = Vec2::Zero();     ///< replicate mean of the sample mean
    Vec2 momentum_se = Vec2::Zero();       ///< standard error across replicas
    double mean_energy_drift = 0.0;        ///< replicate mean of E_t - E_0
    double energy_drift_se = 0.0;
    double initial_energy = 0.0;           ///< replicate mean of E_0
};

struct ConservationReport {
    std::vector<ConservationRow> rows;
    SimulationStats stats;  ///< aggregated over replicas (max errors are maxima)
    std::size_t replicas = 0;

    /// Every snapshot within `k` standard errors of the initial values. A
    /// zero standard error (exact conservation) leaves a round-off allowance
    /// of 1e-12 relative to the initial energy.
    bool within(double k) const {
        for (const auto& row : rows) {
            const double slack = 1e-12 * std::max(1.0, row.initial_energy);
            if (std::abs(row.mean_momentum.x()) > k * row.momentum_se.x() + slack ||
                std::abs(row.mean_momentum.y()) > k * row.momentum_se.y() + slack ||
                std::abs(row.mean_energy_drift) > k * row.energy_drift_se + slack)
                return false;
        }
        return true;
    }
};

inline ConservationReport run_conservation(const SimulationConfig& config, std::size_t replicas) {
    config.validate();
    if (replicas == 0) throw ConfigError("run_conservation: need at least one replica");
    const std::size_t n_times = config.output_times.size();
    struct Rep {
        std::vector<Vec2> mom;
        std::vector<double> drift;
        double e0 = 0.0;
        SimulationStats stats;
    };
    std::vector<Rep> reps(replicas);
    for_each_replica(replicas, [&](std::size_t r) {
        const Ensemble init = init_ensemble(config, r);
        const Trajectory traj = simulate(init, config, r);
        Rep& rep = reps[r];
        rep.e0 = init.energy();
        rep.stats = traj.stats;
        for (const auto& snap : traj.snapshots) {
            Ensemble e{snap.velocities, snap.time};
            rep.mom.push_back(e.mean());
            rep.drift.push_back(e.energy() - rep.e0);
        }
    });

    ConservationReport report;
    report.replicas = replicas;
    const double R = static_cast<double>(replicas);
    for (std::size_t k = 0; k < n_times; ++k) {
        ConservationRow row;
        row.time = config.output_times[k];
        Vec2 m = Vec2::Zero(), m2 = Vec2::Zero();
        double d = 0, d2 = 0, e0 = 0;
        for (const auto& rep : reps) {
            m += rep.mom[k];
            m2 += rep.mom[k].cwiseProduct(rep.mom[k]);
            d += rep.drift[k];
            d2 += rep.drift[k] * rep.drift[k];
            e0 += rep.e0;
        }
        m /= R;
        m2 /= R;
        d /= R;
        d2 /= R;
        row.mean_momentum = m;
        row.initial_energy = e0 / R;
        if (replicas > 1) {
            const double c = R / (R - 1.0);
            row.momentum_se = {std::sqrt(std::max(0.0, (m2.x() - m.x() * m.x()) * c / R)),
                               std::sqrt(std::max(0.0, (m2.y() - m.y() * m.y()) * c / R))};
            row.energy_drift_se = std::sqrt(std::max(0.0, (d2 - d * d) * c / R));
        }
        row.mean_energy_drift = d;
        report.rows.push_back(row);
    }
    for (const auto& rep : reps) {
        report.stats.events += rep.stats.events;
        report.stats.accepted += rep.stats.accepted;
        report.stats.acceptance_prob_sum += rep.stats.acceptance_prob_sum;
        report.stats.max_momentum_error = std::max(report.stats.max_momentum_error, rep.stats.max_momentum_error);
        report.stats.max_energy_error = std::max(report.stats.max_energy_error, rep.stats.max_energy_error);
    }
    return report;
}

//---------------------------------------------------------------------------//
// Estimators
//---------------------------------------------------------------------------//

/// log of (1/N) sum exp(|V_i|^kappa), by log-sum-exp.
inline double log_exponential_moment(const std::vector<Vec2>& v, double kappa) {
    if (v.empty()) throw ConfigError("exponential moment of an empty ensemble");
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> e(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        e[k] = std::pow(v[k].norm(), kappa);
        mx = std::max(mx, e[k]);
    }
    double acc = 0.0;
    for (double x : e) acc += std::exp(x - mx);
    return mx + std::log(acc / static_cast<double>(v.size()));
}

inline double estimate_exponential_moment(const Ensemble& ens, double kappa) {
    const double lm = log_exponential_moment(ens.velocities, kappa);
    if (lm > std::log(std::numeric_limits<double>::max()))
        throw NumericError("exponential moment overflows double; use log_exponential_moment");
    return std::exp(lm);
}

/// Same, checking kappa in (nu, delta).
inline double estimate_exponential_moment(const Ensemble& ens, double kappa, const KernelParams& p) {
    if (!(kappa > p.nu && kappa < p.delta))
        throw ConfigError("exponential moment: kappa must lie in (nu, delta)");
    return estimate_exponential_moment(ens, kappa);
}

struct MassLowerBound {
    double r0 = 0.0;
    double q0 = 0.0;
    /// (r, q(r)) for every radius tried.
    std::vector<std::pair<double, double>> table;
};

/// Worst-case fraction of particles at distance >= r from a center w, over
/// a square grid of centers covering the ball of radius sqrt(2 e0) + 1.
/// Centers outside that ball are covered by the Chebyshev certificate
/// f({|v - w| >= 1}) >= 1/2, so r is capped at 1 and q at 1/2.
inline double mass_lower_bound_at(const std::vector<Vec2>& v, double r, std::size_t grid = 41) {
    if (v.empty()) return 0.0;
    double e0 = 0.0;
    for (const auto& x : v) e0 += x.squaredNorm();
    e0 /= static_cast<double>(v.size());
    const double a = std::sqrt(2.0 * e0) + 1.0;
    const double r2 = r * r;
    double worst = 0.5;
    const double step = grid > 1 ? 2.0 * a / static_cast<double>(grid - 1) : 0.0;
    for (std::size_t gx = 0; gx < grid; ++gx)
        for (std::size_t gy = 0; gy < grid; ++gy) {
            const Vec2 w(-a + step * gx, -a + step * gy);
            if (w.norm() > a + 0.5 * step) continue;
            std::size_t far = 0;
            for (const auto& x : v)
                if ((x - w).squaredNorm() >= r2) ++far;
            worst = std::min(worst, static_cast<double>(far) / static_cast<double>(v.size()));
        }
    return worst;
}

/// Best (r0, q0) over `r_grid` (radii clipped to (0,1]), maximizing r0^2 q0,
/// the combination entering the Laplace nondegeneracy bound. Ties go to the
/// larger radius.
inline MassLowerBound estimate_mass_lower_bound(const Ensemble& ens, const std::vector<double>& r_grid,
                                                std::size_t grid = 41) {
    MassLowerBound best;
    double score = -1.0;
    for (double r : r_grid) {
        if (!(r > 0.0)) continue;
        const double rc = std::min(r, 1.0);
        const double q = mass_lower_bound_at(ens.velocities, rc, grid);
        best.table.emplace_back(rc, q);
        const double s = rc * rc * q;
        if (s > score || (s == score && rc > best.r0)) {
            score = s;
            best.r0 = rc;
            best.q0 = q;
        }
    }
    return best;
}

}  // namespace nocutoff
