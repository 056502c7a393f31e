#include <cmath>

#include <gtest/gtest.h>

#include "nocutoff/particles.hpp"

using namespace nocutoff;

namespace {

SimulationConfig small_config(std::size_t n = 1000, double horizon = 0.5) {
    SimulationConfig c;
    c.n_particles = n;
    c.horizon = horizon;
    c.output_times = {0.0, 0.5 * horizon, horizon};
    return c;
}

}  // namespace

TEST(InitEnsemble, TwoPoint) {
    auto c = small_config(100);
    c.law = InitialLaw::two_point({1.0, 0.0});
    const auto e = init_ensemble(c);
    for (const auto& v : e.velocities) EXPECT_TRUE(v == Vec2(1, 0) || v == Vec2(-1, 0));
    EXPECT_EQ(e.mean(), Vec2::Zero());
    EXPECT_DOUBLE_EQ(e.energy(), 1.0);
}

TEST(InitEnsemble, GaussianEnergyWithinFiveSigma) {
    auto c = small_config(100000);
    c.law = InitialLaw::gaussian(2.0);
    const auto e = init_ensemble(c);
    double m = 0, m2 = 0;
    for (const auto& v : e.velocities) {
        m += v.squaredNorm();
        m2 += v.squaredNorm() * v.squaredNorm();
    }
    const double n = static_cast<double>(e.size());
    m /= n;
    const double sd = std::sqrt((m2 / n - m * m) / n);
    EXPECT_NEAR(m, 2.0, 5 * sd);
    EXPECT_LT(e.mean().norm(), 1e-15);
}

TEST(InitEnsemble, RejectsDegenerateLaws) {
    auto c = small_config();
    c.law = InitialLaw::point_mass({1.0, 2.0});
    EXPECT_THROW(init_ensemble(c), ConfigError);
    c.law = InitialLaw::two_point({0.0, 0.0});
    EXPECT_THROW(init_ensemble(c), ConfigError);
    c.law = InitialLaw::gaussian(2.0);
    c.n_particles = 1;
    EXPECT_THROW(init_ensemble(c), ConfigError);
}

TEST(SimulationConfig, RateAndValidation) {
    const auto c = small_config();
    const AngularCutoff cut(c.zeta, PowerLawKernel(c.kernel.nu));
    EXPECT_DOUBLE_EQ(c.jump_rate(), 4.0 * (cut.g() + 1.0) * std::pow(c.mollifier.gamma_eps, 0.75));
    auto bad = c;
    bad.output_times = {0.4, 0.2};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.zeta = 1.5;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_EQ(collision_style_from_string("symmetric"), CollisionStyle::symmetric);
    EXPECT_THROW(collision_style_from_string("hard-sphere"), ConfigError);
}

TEST(Simulate, DeterministicForFixedSeed) {
    const auto c = small_config(500);
    SimulationOptions opt;
    opt.record_events = true;
    const auto a = simulate(init_ensemble(c), c, 0, opt);
    const auto b = simulate(init_ensemble(c), c, 0, opt);
    ASSERT_EQ(a.events.size(), b.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) {
        EXPECT_EQ(a.events[k].time, b.events[k].time);
        EXPECT_EQ(a.events[k].z, b.events[k].z);
        EXPECT_EQ(a.events[k].accepted, b.events[k].accepted);
    }
    for (std::size_t s = 0; s < a.snapshots.size(); ++s) EXPECT_EQ(a.snapshots[s].velocities, b.snapshots[s].velocities);
    const auto other = simulate(init_ensemble(c), c, 1, opt);
    EXPECT_NE(other.events.front().time, a.events.front().time);
}

TEST(Simulate, NoEventsLeavesEnsembleUnchanged) {
    auto c = small_config(10, 1e-7);
    const auto init = init_ensemble(c);
    const auto tr = simulate(init, c);
    ASSERT_EQ(tr.stats.accepted, 0u);
    for (const auto& s : tr.snapshots) EXPECT_EQ(s.velocities, init.velocities);
}

TEST(Simulate, EventCountMatchesRate) {
    const auto c = small_config(1000, 0.5);
    const auto tr = simulate(init_ensemble(c), c);
    const double expected = c.jump_rate() * c.n_particles * c.horizon;
    EXPECT_NEAR(static_cast<double>(tr.stats.events), expected, 5 * std::sqrt(expected));
}

TEST(Simulate, AcceptanceMatchesMeanThinningProbability) {
    const auto c = small_config(2000, 0.5);
    const auto tr = simulate(init_ensemble(c), c);
    const double p = tr.stats.mean_acceptance_prob();
    const double n = static_cast<double>(tr.stats.events);
    EXPECT_NEAR(tr.stats.acceptance_fraction(), p, 5 * std::sqrt(p * (1 - p) / n));
    EXPECT_LE(tr.stats.acceptance_fraction(), 0.5);
}

TEST(Simulate, SymmetricModeConservesPerEvent) {
    auto c = small_config(2000, 0.5);
    c.style = CollisionStyle::symmetric;
    const auto init = init_ensemble(c);
    const auto tr = simulate(init, c);
    EXPECT_GT(tr.stats.accepted, 0u);
    EXPECT_LE(tr.stats.max_momentum_error, 1e-12);
    EXPECT_LE(tr.stats.max_energy_error, 1e-12);
    const Ensemble last{tr.snapshots.back().velocities, c.horizon};
    EXPECT_NEAR(last.energy(), init.energy(), 1e-10);
    EXPECT_LT(last.mean().norm(), 1e-12);
}

TEST(Simulate, TaggedChainsAreConsistent) {
    const auto c = small_config(300, 0.5);
    SimulationOptions opt;
    opt.tagged = {0, 7};
    const auto tr = simulate(init_ensemble(c), c, 0, opt);
    ASSERT_EQ(tr.chains.size(), 2u);
    const PowerLawKernel k(c.kernel.nu);
    const AngularCutoff cut(c.zeta, k);
    for (std::size_t t = 0; t < 2; ++t) {
        Vec2 v = tr.chains[t].v0;
        for (const auto& ev : tr.chains[t].events) {
            EXPECT_EQ(ev.v_prev, v);
            if (ev.accepted) v = ev.v_prev + cut.I(ev.z) * (deviation(k.vartheta(ev.z)) * (ev.v_prev - ev.partner));
        }
        EXPECT_EQ(v, tr.snapshots.back().velocities[opt.tagged[t]]);
    }
}

TEST(Coupling, IdenticalLegsAreIdenticalPathwise) {
    const auto c = small_config(300, 0.5);
    const auto run = run_coupled_legs(c, {{0.01, 0.05}, {0.01, 0.05}});
    for (std::size_t k = 0; k < c.output_times.size(); ++k)
        EXPECT_EQ(run.snapshots[0][k].velocities, run.snapshots[1][k].velocities);
}

TEST(Coupling, SingleLegReproducesSimulate) {
    const auto c = small_config(300, 0.5);
    const auto run = run_coupled_legs(c, {{c.mollifier.epsilon, c.zeta}});
    const auto tr = simulate(init_ensemble(c), c);
    EXPECT_EQ(run.snapshots[0].back().velocities, tr.snapshots.back().velocities);
}

TEST(Coupling, ValidatesLevels) {
    const auto c = small_config(100, 0.1);
    EXPECT_THROW(run_coupling(c, CouplingKind::zeta, {0.1, 0.1}, 1.0, 2), ConfigError);
    EXPECT_THROW(run_coupling(c, CouplingKind::zeta, {0.05, 0.1}, 1.0, 2), ConfigError);
    EXPECT_THROW(run_coupling(c, CouplingKind::zeta, {0.1}, 1.0, 2), ConfigError);
    EXPECT_THROW(run_coupling(c, CouplingKind::zeta, {0.1, 0.05}, 0.2, 2), ConfigError);
}

TEST(Coupling, GapShrinksWithZeta) {
    const auto c = small_config(500, 0.5);
    const auto res = run_coupling(c, CouplingKind::zeta, {0.2, 0.05}, 1.0, 4);
    const auto& rows = res.rows;
    // rows are [level][time]; compare the last output time
    const double g_coarse = rows[2].mean_gap, g_fine = rows[5].mean_gap;
    EXPECT_GT(g_coarse, g_fine);
    EXPECT_GT(res.slope, 0.0);
}

TEST(Conservation, OneSidedWithinFiveStandardErrors) {
    const auto c = small_config(1000, 0.5);
    const auto rep = run_conservation(c, 8);
    EXPECT_TRUE(rep.within(5.0));
    EXPECT_EQ(rep.rows.size(), c.output_times.size());
}

TEST(Estimators, ExponentialMoment) {
    Ensemble zero{std::vector<Vec2>(10, Vec2::Zero()), 0.0};
    EXPECT_DOUBLE_EQ(estimate_exponential_moment(zero, 0.5), 1.0);
    auto c = small_config(100);
    c.law = InitialLaw::two_point({1.0, 0.0});
    EXPECT_NEAR(estimate_exponential_moment(init_ensemble(c), 0.5), std::exp(1.0), 1e-15);
    EXPECT_THROW(estimate_exponential_moment(zero, 0.1, c.kernel), ConfigError);
    // log-sum-exp survives |v|^kappa beyond the double exponent range
    Ensemble huge{{Vec2(1e6, 0.0), Vec2(0.0, 0.0)}, 0.0};
    EXPECT_NEAR(log_exponential_moment(huge.velocities, 0.9), std::pow(1e6, 0.9) - std::log(2.0), 1e-6);
    EXPECT_THROW(estimate_exponential_moment(huge, 0.9), NumericError);
}

TEST(Estimators, MassLowerBound) {
    auto c = small_config(1000);
    c.law = InitialLaw::two_point({1.0, 0.0});
    const auto mb = estimate_mass_lower_bound(init_ensemble(c), {0.25, 0.5, 1.0, 2.0});
    EXPECT_DOUBLE_EQ(mb.r0, 1.0);
    EXPECT_DOUBLE_EQ(mb.q0, 0.5);

    Ensemble atom{std::vector<Vec2>(50, Vec2::Zero()), 0.0};
    EXPECT_EQ(estimate_mass_lower_bound(atom, {0.5, 1.0}).q0, 0.0);

    c.n_particles = 100000;
    c.law = InitialLaw::gaussian(2.0);
    EXPECT_GE(mass_lower_bound_at(init_ensemble(c).velocities, 0.5), 0.4);
}
