// nocutoff: command-line driver for the simulator and analysis toolkit.
//
//   nocutoff analyze --s 15
//   nocutoff simulate --n-particles 10000 --replicas 32 --out run1
//   nocutoff couple --levels 0.2,0.1,0.05,0.025
//   nocutoff malliavin | spectrum | drift-check
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nocutoff/config.hpp"
#include "nocutoff/io.hpp"
#include "nocutoff/kernel.hpp"
#include "nocutoff/malliavin.hpp"
#include "nocutoff/particles.hpp"
#include "nocutoff/regularity.hpp"

namespace fs = std::filesystem;
using namespace nocutoff;

namespace {

struct Flags {
    std::string config_path;
    double gamma = 0, nu = 0, s = 0, delta = 0, eta0 = 0, epsilon = 0, zeta = 0, horizon = 0;
    double e0 = 0, radius = 0, beta = 0, kappa = 0;
    std::size_t n_particles = 0, replicas = 0;
    std::uint64_t seed = 0;
    std::string style, law, out, coupling_kind;
    std::vector<double> output_times, levels, w;
    std::optional<double> target;
    bool event_log = false;
};

struct Bound {
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> apply;
};

void add_common(CLI::App* app, Flags& f, Bound& b) {
    auto bind = [&](CLI::Option* opt, std::function<void(RunConfig&)> fn) { b.apply.emplace_back(opt, fn); };
    app->add_option("--config", f.config_path, "JSON run configuration (flags override it)");
    bind(app->add_option("--gamma", f.gamma, "velocity exponent gamma in (0,1)"), [&](RunConfig& c) { c.gamma = f.gamma; });
    bind(app->add_option("--nu", f.nu, "angular exponent nu in (0,1/2)"), [&](RunConfig& c) { c.nu = f.nu; });
    bind(app->add_option("--s", f.s, "inverse-power-law index s > 5 (sets gamma, nu)"), [&](RunConfig& c) { c.s = f.s; });
    bind(app->add_option("--delta", f.delta, "exponential-moment exponent"), [&](RunConfig& c) { c.delta = f.delta; });
    bind(app->add_option("--eta0", f.eta0, "mollifier log-exponent"), [&](RunConfig& c) { c.eta0 = f.eta0; });
    bind(app->add_option("--epsilon", f.epsilon, "velocity truncation eps"), [&](RunConfig& c) { c.epsilon = f.epsilon; });
    bind(app->add_option("--zeta", f.zeta, "angular cutoff zeta"), [&](RunConfig& c) { c.zeta = f.zeta; });
    bind(app->add_option("--n-particles", f.n_particles, "particles per ensemble"), [&](RunConfig& c) { c.n_particles = f.n_particles; });
    bind(app->add_option("--replicas", f.replicas, "independent replicas"), [&](RunConfig& c) { c.replicas = f.replicas; });
    bind(app->add_option("--horizon", f.horizon, "final time T"), [&](RunConfig& c) { c.horizon = f.horizon; });
    bind(app->add_option("--output-times", f.output_times, "snapshot times")->delimiter(','),
         [&](RunConfig& c) { c.output_times = f.output_times; });
    bind(app->add_option("--seed", f.seed, "64-bit seed"), [&](RunConfig& c) { c.seed = f.seed; });
    bind(app->add_option("--collision-style", f.style, "one-sided | symmetric"), [&](RunConfig& c) { c.collision_style = f.style; });
    bind(app->add_option("--initial-law", f.law, "gaussian | two_point | uniform_disk"), [&](RunConfig& c) { c.initial_law = f.law; });
    bind(app->add_option("--e0", f.e0, "gaussian energy"), [&](RunConfig& c) { c.e0 = f.e0; });
    bind(app->add_option("--w", f.w, "two_point atom")->delimiter(','), [&](RunConfig& c) { c.w = f.w; });
    bind(app->add_option("--radius", f.radius, "uniform_disk radius"), [&](RunConfig& c) { c.radius = f.radius; });
    bind(app->add_option("--out", f.out, "output directory"), [&](RunConfig& c) { c.output_dir = f.out; });
}

std::string with_config_line(const RunConfig& cfg, const std::string& csv) {
    return "# config: " + cfg.to_json().dump() + "\r\n" + csv;
}

void emit(const RunConfig& cfg, const std::string& name, const std::string& content) {
    io::write_atomic(fs::path(cfg.output_dir) / name, content);
}

Json stats_json(const SimulationStats& s) {
    return {{"events", s.events},
            {"accepted", s.accepted},
            {"acceptance_fraction", s.acceptance_fraction()},
            {"mean_acceptance_prob", s.mean_acceptance_prob()},
            {"max_momentum_error", s.max_momentum_error},
            {"max_energy_error", s.max_energy_error}};
}

int cmd_analyze(const RunConfig& cfg, std::optional<double> target) {
    const KernelParams k = cfg.kernel();
    const RegularityReport r = analyze(k, target);
    Json j;
    j["config"] = cfg.to_json();
    j["admissible"] = r.admissible;
    j["a"] = r.a;
    j["q"] = r.q;
    j["a_exact"] = r.a_exact ? Json(*r.a_exact) : Json(nullptr);
    j["q_exact"] = r.q_exact ? Json(*r.q_exact) : Json(nullptr);
    j["sobolev_sup"] = r.sobolev_sup;
    j["sobolev_sup_exact"] = r.sobolev_exact ? Json(*r.sobolev_exact) : Json(nullptr);
    j["q_gt_1"] = r.q_gt_1;
    j["q_gt_2"] = r.q_gt_2;
    j["schedule"] = {{"alpha", r.schedule.alpha},
                     {"one_minus_eta", r.schedule.one_minus_eta},
                     {"target", r.schedule.target},
                     {"appended_target", r.schedule.appended_target}};
    const SThresholds th;
    j["s_thresholds"] = {{"admissible", th.admissible}, {"q_gt_1", th.q_gt_1}, {"q_gt_2", th.q_gt_2}};
    const std::string text = j.dump(2) + "\n";
    emit(cfg, "regularity_report.json", text);
    std::cout << text;
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    const SimulationConfig sim = cfg.simulation();
    SimulationOptions opt;
    opt.record_events = cfg.event_log;
    const Ensemble init = init_ensemble(sim, 0);
    const Trajectory traj = simulate(init, sim, 0, opt);

    io::CsvWriter snaps({"t", "particle_id", "vx", "vy"});
    for (const auto& s : traj.snapshots)
        for (std::size_t p = 0; p < s.velocities.size(); ++p)
            snaps.row(s.time, p, s.velocities[p].x(), s.velocities[p].y());
    emit(cfg, "snapshots.csv", with_config_line(cfg, snaps.str()));
    if (cfg.event_log) {
        io::CsvWriter ev({"t_k", "i", "j", "z", "u", "accepted"});
        for (const auto& e : traj.events) ev.row(e.time, e.i, e.j, e.z, e.u, e.accepted);
        emit(cfg, "events.csv", with_config_line(cfg, ev.str()));
    }

    const ConservationReport cons = run_conservation(sim, cfg.replicas);
    Json j;
    j["config"] = cfg.to_json();
    j["replica0"] = stats_json(traj.stats);
    j["replicas"] = stats_json(cons.stats);
    j["within_5_se"] = cons.within(5.0);
    Json rows = Json::array();
    for (const auto& row : cons.rows)
        rows.push_back({{"t", row.time},
                        {"mean_momentum", {row.mean_momentum.x(), row.mean_momentum.y()}},
                        {"momentum_se", {row.momentum_se.x(), row.momentum_se.y()}},
                        {"mean_energy_drift", row.mean_energy_drift},
                        {"energy_drift_se", row.energy_drift_se},
                        {"initial_energy", row.initial_energy}});
    j["conservation"] = rows;
    Json moments = Json::array();
    for (const auto& s : traj.snapshots)
        moments.push_back({{"t", s.time},
                           {"log_exp_moment", log_exponential_moment(s.velocities, cfg.kappa)}});
    j["exponential_moment_kappa"] = cfg.kappa;
    j["exponential_moments"] = moments;
    const std::string text = j.dump(2) + "\n";
    emit(cfg, "conservation.json", text);
    std::cout << "events " << traj.stats.events << ", acceptance " << traj.stats.acceptance_fraction()
              << ", conservation within 5 SE: " << (cons.within(5.0) ? "yes" : "no") << "\n";
    return 0;
}

int cmd_couple(const RunConfig& cfg) {
    const SimulationConfig sim = cfg.simulation();
    const auto kind = cfg.coupling_kind == "zeta" ? CouplingKind::zeta : CouplingKind::epsilon;
    const CouplingResult res = run_coupling(sim, kind, cfg.levels, cfg.beta, cfg.replicas);
    io::CsvWriter csv({"level", "t", "beta", "mean_gap", "std_error"});
    for (const auto& r : res.rows) csv.row(r.level, r.time, res.beta, r.mean_gap, r.std_error);
    emit(cfg, "coupling.csv", with_config_line(cfg, csv.str()));
    Json j;
    j["config"] = cfg.to_json();
    j["kind"] = cfg.coupling_kind;
    j["reference_level"] = res.reference_level;
    j["slope"] = res.slope;
    j["predicted_exponent"] = kind == CouplingKind::zeta ? cfg.beta - sim.kernel.nu : NAN;
    emit(cfg, "coupling.json", j.dump(2) + "\n");
    std::cout << "fitted log-log slope " << res.slope << "\n";
    return 0;
}

int cmd_malliavin(const RunConfig& cfg) {
    SimulationConfig sim = cfg.simulation();
    const double t = sim.horizon;
    const auto chains = collect_chains(sim, cfg.replicas);
    Json per = Json::array();
    std::vector<TangentState> states;
    std::vector<Mat2> S;
    for (const auto& ch : chains) {
        const MalliavinDiagnostics d = diagnose(ch, t, sim);
        per.push_back({{"t", d.t},
                       {"detYt", d.det_Y},
                       {"opnormYinv", d.op_norm_Y_inv},
                       {"trace_sigma", d.trace_sigma},
                       {"det_reg", d.det_reg},
                       {"G_weight", d.G_weight},
                       {"jumps", d.jumps}});
        states.push_back(tangent_flow(ch, t, sim.zeta, sim.kernel));
        S.push_back(states.back().S);
    }
    const MomentEstimate m = inverse_det_moment(states, 1.0, sim.zeta, sim.kernel, sim.seed);
    const LaplaceTable lap = laplace_nondegeneracy(S, log_space(0.1, 1e5, 31), sim.zeta, sim.kernel.nu);
    Json j;
    j["config"] = cfg.to_json();
    j["replicas"] = per;
    j["inverse_det_moment_p1"] = {{"mean", m.mean}, {"ci_low", m.ci_low}, {"ci_high", m.ci_high}};
    Json rows = Json::array();
    for (const auto& r : lap.rows) rows.push_back({{"xi", r.xi}, {"mean", r.mean}, {"std_error", r.std_error}});
    j["laplace"] = {{"rows", rows},
                    {"predicted_exponent", lap.predicted_exponent},
                    {"fitted_exponent", lap.fitted_exponent},
                    {"saturation_xi", lap.saturation_xi},
                    {"non_increasing", lap.non_increasing}};
    emit(cfg, "malliavin.json", j.dump(2) + "\n");
    std::cout << "E[det^-1] " << m.mean << ", Laplace exponent fit " << lap.fitted_exponent << " (predicted "
              << lap.predicted_exponent << ")\n";
    return 0;
}

int cmd_spectrum(const RunConfig& cfg) {
    const SimulationConfig sim = cfg.simulation();
    const Trajectory traj = simulate(init_ensemble(sim, 0), sim, 0);
    const std::vector<Vec2>& v = traj.snapshots.empty() ? init_ensemble(sim, 0).velocities
                                                        : traj.snapshots.back().velocities;
    const double q = exponent_q(sim.kernel);
    const Spectrum sp = spectrum(v, q);
    io::CsvWriter csv({"|xi|", "mean_abs_fhat", "fit_slope"});
    for (const auto& r : sp.rows) csv.row(r.xi, r.mean_abs_fhat, sp.fit_slope);
    emit(cfg, "spectrum.csv", with_config_line(cfg, csv.str()));
    std::cout << "fitted slope " << sp.fit_slope << ", predicted -q = " << -q << "\n";
    return 0;
}

int cmd_drift_check(const RunConfig& cfg) {
    const KernelParams k = cfg.kernel();
    if (!(cfg.kappa > k.nu && cfg.kappa < 1.0)) throw ConfigError("kappa must lie in (nu, 1)");
    io::CsvWriter csv({"V_norm", "v_norm", "kappa", "delta", "quad_error", "large_V_regime", "negative"});
    for (double R : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0})
        for (double frac : {0.0, 0.5 / 130.0, 2.0 / 130.0, 0.5}) {
            const Vec2 V(R, 0.0);
            const Vec2 v(0.0, frac * R);
            const QuadratureResult q = drift_integral(V, v, cfg.kappa, k);
            const bool regime = R >= 1.0 && R >= 130.0 * v.norm();
            csv.row(R, v.norm(), cfg.kappa, q.value, q.error, regime, q.value < 0.0);
        }
    emit(cfg, "drift_check.csv", with_config_line(cfg, csv.str()));
    std::cout << "wrote " << (fs::path(cfg.output_dir) / "drift_check.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo simulator and analysis toolkit for the 2D non-cutoff Boltzmann equation"};
    app.require_subcommand(0, 1);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the default configuration and exit");

    Flags f;
    std::vector<std::pair<CLI::App*, Bound>> subs;
    subs.reserve(6);
    for (const char* name : {"analyze", "simulate", "couple", "malliavin", "spectrum", "drift-check"}) {
        CLI::App* sub = app.add_subcommand(name);
        subs.emplace_back(sub, Bound{});
        add_common(sub, f, subs.back().second);
    }
    auto B = [&](const char* n) -> Bound& {
        for (auto& [a, b] : subs)
            if (a->get_name() == n) return b;
        throw std::logic_error(n);
    };
    CLI::App* analyze_cmd = app.get_subcommand("analyze");
    analyze_cmd->add_option("--target", f.target, "bootstrap target in (0, q)");
    CLI::App* couple_cmd = app.get_subcommand("couple");
    B("couple").apply.emplace_back(couple_cmd->add_option("--kind", f.coupling_kind, "zeta | epsilon"),
                                   [&](RunConfig& c) { c.coupling_kind = f.coupling_kind; });
    B("couple").apply.emplace_back(couple_cmd->add_option("--levels", f.levels, "decreasing levels")->delimiter(','),
                                   [&](RunConfig& c) { c.levels = f.levels; });
    B("couple").apply.emplace_back(couple_cmd->add_option("--beta", f.beta, "gap exponent in (nu, 1]"),
                                   [&](RunConfig& c) { c.beta = f.beta; });
    CLI::App* sim_cmd = app.get_subcommand("simulate");
    B("simulate").apply.emplace_back(sim_cmd->add_flag("--event-log", f.event_log, "write events.csv"),
                                     [&](RunConfig& c) { c.event_log = f.event_log; });
    for (const char* n : {"simulate", "drift-check"}) {
        CLI::App* sub = app.get_subcommand(n);
        B(n).apply.emplace_back(sub->add_option("--kappa", f.kappa, "exponent in (nu, 1)"),
                                [&](RunConfig& c) { c.kappa = f.kappa; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (print_defaults) {
        std::cout << RunConfig::defaults_document().dump(2) << "\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        RunConfig cfg;
        if (!f.config_path.empty()) cfg.merge_json(Json::parse(io::read_file(f.config_path), nullptr, true, true));
        cfg.subcommand = sub->get_name();
        for (auto& [opt, fn] : B(sub->get_name().c_str()).apply)
            if (opt->count() > 0) fn(cfg);
        cfg.validate();

        const std::string name = sub->get_name();
        if (name == "analyze") return cmd_analyze(cfg, f.target);
        if (name == "simulate") return cmd_simulate(cfg);
        if (name == "couple") return cmd_couple(cfg);
        if (name == "malliavin") return cmd_malliavin(cfg);
        if (name == "spectrum") return cmd_spectrum(cfg);
        if (name == "drift-check") return cmd_drift_check(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const Json::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
