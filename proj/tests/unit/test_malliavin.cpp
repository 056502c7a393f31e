#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "nocutoff/malliavin.hpp"

using namespace nocutoff;

namespace {

const KernelParams kP = KernelParams::make(0.75, 0.25);
constexpr double kZeta = 0.05;

JumpChain one_event(double z, double time = 0.3) {
    JumpChain ch;
    ch.v0 = {1.0, 0.5};
    ch.events.push_back({time, ch.v0, Vec2(-0.5, 1.0), z, 0.0, true});
    return ch;
}

}  // namespace

TEST(TangentFlow, EmptyChain) {
    JumpChain ch;
    ch.v0 = {0.3, 0.1};
    const auto st = tangent_flow(ch, 1.0, kZeta, kP);
    EXPECT_EQ(st.Y, Mat2::Identity());
    EXPECT_EQ(st.S, Mat2::Zero());
    EXPECT_EQ(st.sigma, Mat2::Zero());
}

TEST(TangentFlow, ZeroWeightEventContributesNothingToS) {
    const auto st = tangent_flow(one_event(0.3), 1.0, kZeta, kP);
    EXPECT_GT((st.Y - Mat2::Identity()).norm(), 1e-3);
    EXPECT_EQ(st.S, Mat2::Zero());
}

TEST(TangentFlow, SingleEventSigmaIsRankOne) {
    const double z = 2.0;
    const JumpChain ch = one_event(z);
    const auto st = tangent_flow(ch, 0.3, kZeta, kP);
    // hand-evaluated H = vartheta'(z) * R'_theta X / 2
    const double nu = kP.nu, w = nu * z + std::pow(kHalfPi, -nu);
    const double th = std::pow(w, -1.0 / nu), dth = -std::pow(w, -1.0 / nu - 1.0);
    const Vec2 X = ch.v0 - ch.events[0].partner;
    const Vec2 H = dth * 0.5 * Vec2(-std::sin(th) * X.x() - std::cos(th) * X.y(),
                                    std::cos(th) * X.x() - std::sin(th) * X.y());
    EXPECT_LT((st.sigma - H * H.transpose()).norm(), 1e-14);
    EXPECT_NEAR(st.sigma.trace(), H.squaredNorm(), 1e-15);
    EXPECT_NEAR(st.sigma.determinant(), 0.0, 1e-20);
}

TEST(TangentFlow, EventsAfterTAreIgnored) {
    const auto st = tangent_flow(one_event(2.0, 0.8), 0.5, kZeta, kP);
    EXPECT_EQ(st.Y, Mat2::Identity());
    EXPECT_EQ(st.jumps, 0u);
}

TEST(TangentFlow, RejectsInconsistentChain) {
    JumpChain ch = one_event(2.0);
    ch.events.push_back({0.5, Vec2(9, 9), Vec2(0, 0), 1.0, 0.0, true});
    EXPECT_THROW(tangent_flow(ch, 1.0, kZeta, kP), ConfigError);
    JumpChain ch2 = one_event(2.0);
    ch2.events.push_back({0.1, ch2.events[0].v_prev, Vec2(0, 0), 1.0, 0.0, false});
    EXPECT_THROW(tangent_flow(ch2, 1.0, kZeta, kP), ConfigError);
}

TEST(TangentFlow, PathwiseBoundsOnRandomChains) {
    CounterRng rng = CounterRng::stream(5, 0, StreamRole::property);
    for (int n = 0; n < 200; ++n) {
        const JumpChain ch = random_chain(rng, 1.0, 40.0, kZeta, kP);
        const auto st = tangent_flow(ch, 1.0, kZeta, kP);
        EXPECT_LE(st.max_op_norm_Y, 1.0 + 1e-12);
        EXPECT_LT((st.Y * st.Y_inv - Mat2::Identity()).norm(), 1e-10);
        EXPECT_LT((st.sigma - st.sigma.transpose()).norm(), 1e-15);
        Eigen::SelfAdjointEigenSolver<Mat2> es(st.sigma);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, st.sigma.norm()));
        const double u = regularization_floor(1.0, kZeta, kP.nu);
        EXPECT_GE(regularized_det(st, 1.0, kZeta, kP), u * u);
    }
}

TEST(TangentFlow, FiniteDifferenceMatchesAnalyticDerivative) {
    CounterRng rng = CounterRng::stream(9, 0, StreamRole::property);
    const AngularCutoff cut(kZeta, PowerLawKernel(kP.nu));
    int checked = 0;
    while (checked < 100) {
        const JumpChain ch = random_chain(rng, 1.0, 20.0, kZeta, kP);
        std::vector<std::size_t> ok;
        for (std::size_t k = 0; k < ch.events.size(); ++k)
            if (ch.events[k].accepted && std::abs(ch.events[k].z) < cut.g() - 1e-3) ok.push_back(k);
        if (ok.empty()) continue;
        const std::size_t k = ok[rng.index(ok.size())];
        const auto d = check_derivative(ch, 1.0, kZeta, kP, k);
        EXPECT_LE(d.rel_error, 1e-4) << "chain " << checked << " event " << k;
        ++checked;
    }
}

TEST(RegularizedDet, ClosedForms) {
    EXPECT_NEAR(regularized_det(Mat2::Zero().eval(), 1.0, 0.1, kP), std::pow(10.0, -8.5), 1e-22);
    const double u = std::pow(0.1, 4.25);
    EXPECT_NEAR(regularized_det(Mat2::Identity().eval(), 1.0, 0.1, kP), (1 + u) * (1 + u), 1e-15);
    EXPECT_THROW(regularized_det(Mat2::Zero().eval(), 0.0, 0.1, kP), DomainError);
    CounterRng rng = CounterRng::stream(2, 0, StreamRole::property);
    for (int n = 0; n < 100; ++n) {
        const Vec2 a = rng.normal2(), b = rng.normal2();
        const Mat2 s = a * a.transpose() + 0.3 * b * b.transpose();
        double prev = 0.0;
        for (double t = 0.1; t < 1e6; t *= 3) {
            const double d = regularized_det(s, t, 0.5, kP);
            EXPECT_GE(d, prev);
            prev = d;
        }
    }
}

TEST(InverseDetMoment, DegenerateCaseIsExact) {
    std::vector<TangentState> states(10);
    for (auto& s : states) s.t = 1.0;
    const double u = regularization_floor(1.0, kZeta, kP.nu);
    const auto m = inverse_det_moment(states, 2.0, kZeta, kP);
    EXPECT_NEAR(m.mean, std::pow(u, -4.0), 1e-9 * std::pow(u, -4.0));
    EXPECT_THROW(inverse_det_moment({}, 1.0, kZeta, kP), ConfigError);
}

TEST(Laplace, TrivialCases) {
    const std::vector<Mat2> zeros(5, Mat2::Zero());
    const auto tab = laplace_nondegeneracy(zeros, {0.0, 1.0, 100.0}, kZeta, kP.nu);
    for (const auto& r : tab.rows) EXPECT_EQ(r.mean, 1.0);
    std::vector<Mat2> some{Mat2::Identity(), 2.0 * Mat2::Identity()};
    const auto t2 = laplace_nondegeneracy(some, {0.0, 0.5, 1.0, 2.0}, kZeta, kP.nu);
    EXPECT_EQ(t2.rows[0].mean, 1.0);
    EXPECT_TRUE(t2.non_increasing);
    EXPECT_NEAR(t2.rows[2].mean, 0.5 * (std::exp(-1.0) + std::exp(-2.0)), 1e-15);
}

TEST(Localization, SandwichExamples) {
    const auto mp = MollifierParams::make(0.01, kP.eta0);
    JumpChain calm;
    calm.v0 = {0.0, 0.0};
    EXPECT_EQ(localization_weight(calm, 1.0, kZeta, kP, mp), 1.0);
    calm.v0 = {1.0, 0.0};
    calm.events.push_back({0.2, calm.v0, Vec2(0.0, 1.0), 2.0, 0.0, true});
    EXPECT_LE(chain_sup_norm(calm, 1.0, kZeta, kP), mp.gamma_eps - 1);
    EXPECT_EQ(localization_weight(calm, 1.0, kZeta, kP, mp), 1.0);
    JumpChain wild;
    wild.v0 = {mp.gamma_eps + 0.1, 0.0};
    EXPECT_EQ(localization_weight(wild, 1.0, kZeta, kP, mp), 0.0);

    CounterRng rng = CounterRng::stream(4, 0, StreamRole::property);
    for (int n = 0; n < 300; ++n) {
        JumpChain ch = random_chain(rng, 1.0, 30.0, kZeta, kP);
        const double scale = rng.uniform(0.5, 8.0);
        ch.v0 *= scale;
        for (auto& ev : ch.events) ev.partner *= scale;
        // rebuild v_prev after the rescale
        Vec2 v = ch.v0;
        const PowerLawKernel k(kP.nu);
        const AngularCutoff cut(kZeta, k);
        for (auto& ev : ch.events) {
            ev.v_prev = v;
            if (ev.accepted) v = chain_step(v, ev.partner, ev.z, k, cut);
        }
        const double sup = chain_sup_norm(ch, 1.0, kZeta, kP);
        const double G = localization_weight(ch, 1.0, kZeta, kP, mp);
        EXPECT_GE(G, sup <= mp.gamma_eps - 1 ? 1.0 : 0.0);
        EXPECT_LE(G, sup <= mp.gamma_eps ? 1.0 : 0.0);
    }
}

TEST(QDensity, NormalizationAndRange) {
    SimulationConfig c;
    c.n_particles = 300;
    const Ensemble ens = init_ensemble(c);
    CounterRng rng = CounterRng::stream(8, 0, StreamRole::property);
    for (int n = 0; n < 5; ++n) {
        const Vec2 w = 2.0 * rng.normal2();
        const QDensity q(w, ens, c.kernel, c.mollifier, c.zeta);
        EXPECT_GE(q.g(), 0.5);
        EXPECT_LE(q.g(), 1.0);
        EXPECT_NEAR(q.total_mass(ens), 1.0, 1e-6);
    }
    const AngularCutoff cut(c.zeta, PowerLawKernel(c.kernel.nu));
    const QDensity q(Vec2(0.1, 0.2), ens, c.kernel, c.mollifier, c.zeta);
    // inside the box only the uniform part is present
    const Vec2 p = ens.velocities[3];
    EXPECT_EQ(q(p, 0.0), q(p, cut.support()));
    EXPECT_EQ(q(p, cut.support() + 0.5), 0.0);
    EXPECT_GT(q(p, cut.g() + 3.0), 0.0);
}
