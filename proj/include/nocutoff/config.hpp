#pragma once

// Run configuration: defaults, JSON round trip, and resolution into the
// library's parameter structs.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "kernel.hpp"
#include "mollifier.hpp"
#include "particles.hpp"

namespace nocutoff {

using Json = nlohmann::json;  // std::map-backed: keys serialize sorted

struct RunConfig {
    std::string subcommand = "analyze";
    // kernel
    double gamma = 0.75;
    double nu = 0.25;
    std::optional<double> s;
    std::optional<double> delta;  ///< default: midpoint of (max(gamma,nu), 1)
    std::optional<double> eta0;   ///< default: midpoint of (1/delta, 1/max(gamma,nu))
    // truncation
    double epsilon = 1e-2;
    double zeta = 0.05;
    // simulation
    std::size_t n_particles = 10000;
    std::size_t replicas = 32;
    double horizon = 1.0;
    std::vector<double> output_times{0.25, 0.5, 1.0};
    std::uint64_t seed = 1;
    std::string collision_style = "one-sided";
    std::string initial_law = "gaussian";
    double e0 = 2.0;
    std::vector<double> w{1.0, 0.0};
    double radius = 1.0;
    std::string output_dir = "nocutoff_out";
    // experiment-specific
    std::string coupling_kind = "zeta";
    std::vector<double> levels{0.2, 0.1, 0.05, 0.025};
    double beta = 1.0;
    double kappa = 0.5;
    bool event_log = false;

    KernelParams kernel() const {
        if (s) return KernelParams::from_s(*s, delta.value_or(NAN), eta0.value_or(NAN));
        return KernelParams::make(gamma, nu, delta.value_or(NAN), eta0.value_or(NAN));
    }

    InitialLaw law() const {
        if (initial_law == "gaussian") return InitialLaw::gaussian(e0);
        if (initial_law == "two_point") {
            if (w.size() != 2) throw ConfigError("initial law: w needs two components");
            return InitialLaw::two_point({w[0], w[1]});
        }
        if (initial_law == "uniform_disk") return InitialLaw::uniform_disk(radius);
        if (initial_law == "point_mass") throw ConfigError("initial law: f0 must not be a Dirac mass");
        throw ConfigError("unknown initial law '" + initial_law + "'");
    }

    SimulationConfig simulation() const {
        SimulationConfig c;
        c.kernel = kernel();
        c.mollifier = MollifierParams::make(epsilon, c.kernel.eta0);
        c.zeta = zeta;
        c.n_particles = n_particles;
        c.horizon = horizon;
        c.style = collision_style_from_string(collision_style);
        c.law = law();
        c.seed = seed;
        c.output_times = output_times;
        c.validate();
        return c;
    }

    /// Every admissibility check, before any run.
    void validate() const {
        if (replicas == 0) throw ConfigError("replicas must be positive");
        if (subcommand == "analyze" || subcommand == "drift-check") {
            kernel();
            return;
        }
        simulation();
        if (subcommand == "couple") {
            if (coupling_kind != "zeta" && coupling_kind != "epsilon")
                throw ConfigError("coupling kind must be 'zeta' or 'epsilon'");
            if (!(beta > kernel().nu && beta <= 1.0)) throw ConfigError("beta must lie in (nu, 1]");
        }
    }

    /// The resolved configuration, with derived constants filled in.
    Json to_json() const {
        Json j;
        j["subcommand"] = subcommand;
        const KernelParams k = kernel();
        j["kernel"] = {{"gamma", k.gamma}, {"nu", k.nu}, {"delta", k.delta}, {"eta0", k.eta0}};
        if (s) j["kernel"]["s"] = *s;
        j["mollifier"] = {{"epsilon", epsilon}, {"zeta", zeta}};
        if (3.0 * epsilon < 1.0 && epsilon > 0.0)
            j["mollifier"]["gamma_eps"] = std::pow(std::log(1.0 / epsilon), k.eta0);
        j["simulation"] = {{"n_particles", n_particles},
                           {"replicas", replicas},
                           {"horizon", horizon},
                           {"output_times", output_times},
                           {"seed", seed},
                           {"collision_style", collision_style}};
        j["initial_law"] = {{"kind", initial_law}, {"e0", e0}, {"w", w}, {"radius", radius}};
        j["experiment"] = {{"coupling_kind", coupling_kind}, {"levels", levels}, {"beta", beta},
                           {"kappa", kappa}, {"event_log", event_log}};
        j["output_dir"] = output_dir;
        return j;
    }

    /// Overlays the keys present in `j` (same layout as to_json).
    void merge_json(const Json& j) {
        auto get = [](const Json& obj, const char* key, auto& dst) {
            if (obj.contains(key)) obj.at(key).get_to(dst);
        };
        try {
            get(j, "subcommand", subcommand);
            if (j.contains("kernel")) {
                const Json& k = j["kernel"];
                get(k, "gamma", gamma);
                get(k, "nu", nu);
                if (k.contains("s")) s = k["s"].get<double>();
                if (k.contains("delta")) delta = k["delta"].get<double>();
                if (k.contains("eta0")) eta0 = k["eta0"].get<double>();
            }
            if (j.contains("mollifier")) {
                get(j["mollifier"], "epsilon", epsilon);
                get(j["mollifier"], "zeta", zeta);
            }
            if (j.contains("simulation")) {
                const Json& m = j["simulation"];
                get(m, "n_particles", n_particles);
                get(m, "replicas", replicas);
                get(m, "horizon", horizon);
                get(m, "output_times", output_times);
                get(m, "seed", seed);
                get(m, "collision_style", collision_style);
            }
            if (j.contains("initial_law")) {
                const Json& l = j["initial_law"];
                get(l, "kind", initial_law);
                get(l, "e0", e0);
                get(l, "w", w);
                get(l, "radius", radius);
            }
            if (j.contains("experiment")) {
                const Json& e = j["experiment"];
                get(e, "coupling_kind", coupling_kind);
                get(e, "levels", levels);
                get(e, "beta", beta);
                get(e, "kappa", kappa);
                get(e, "event_log", event_log);
            }
            get(j, "output_dir", output_dir);
        } catch (const Json::exception& ex) {
            throw ConfigError(std::string("config: ") + ex.what());
        }
    }

    /// Defaults with units, as printed by --print-defaults.
    static Json defaults_document() {
        RunConfig d;
        Json j = d.to_json();
        j["units"] = {{"velocity", "dimensionless, e0 = E|v|^2"},
                      {"time", "dimensionless, collision-rate units"},
                      {"angles", "radians"},
                      {"epsilon", "velocity units"}};
        return j;
    }
};

}  // namespace nocutoff
