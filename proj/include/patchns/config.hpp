#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "patchns/constitutive.hpp"
#include "patchns/diagnostics.hpp"
#include "patchns/initdata.hpp"
#include "patchns/solver.hpp"

namespace patchns {

/// Scenario configuration (JSON). Unknown keys are rejected so typos
/// fail loudly; every violation names the offending field.
struct ScenarioConfig {
    int n = 128;
    double L = 8.0;
    LawPreset laws;
    PatchSpec patch;
    InitialVelocitySpec velocity;
    StepConfig step;
    double T = 1.0;
    int record_every = 10;      // heavy-diagnostics cadence in steps
    int checkpoint_every = 0;   // 0 = final only
    int particle_factor = 4;
    int markers = 512;
    double probe_r0_factor = 12.0;  // r0 = factor * h, capped near the patch scale
    double probe_alpha = 1.0;       // one-sided extrapolation exponent
    int pair_budget = 20000;
    double band_factor = 3.0;  // grid-quadrature exclusion band in h
    double alpha = 0.5;        // Hölder exponent of the scenario
    bool heatmaps = false;
    diag::BlowupThresholds blowup;
    std::uint64_t seed = 1;
    std::string config_text;  // canonical serialization for provenance

    double probe_r0(double h) const {
        return std::min(probe_r0_factor * h, 0.6 * patch.radius);
    }
};

namespace configdetail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& field, const std::string& why) {
    throw std::invalid_argument("config: field '" + field + "' " + why);
}

inline void check_keys(const json& j, const std::string& prefix,
                       std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok) fail(prefix + it.key(), "is not a recognized key");
    }
}

inline double num(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "must be a number");
    return j.get<double>();
}

inline Vec2 vec2(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2) fail(field, "must be an array [x, y]");
    return {num(j[0], field), num(j[1], field)};
}

}  // namespace configdetail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
    using namespace configdetail;
    ScenarioConfig c;
    check_keys(j, "", {"grid", "laws", "patch", "velocity", "step", "run", "particles",
                       "markers", "probes", "blowup", "seed", "heatmaps"});

    if (!j.contains("grid")) fail("grid", "is required");
    const auto& g = j.at("grid");
    check_keys(g, "grid.", {"n", "L"});
    c.n = int(num(g.at("n"), "grid.n"));
    if (!is_power_of_two(c.n)) fail("grid.n", "must be a power of two");
    c.L = num(g.at("L"), "grid.L");
    if (c.L <= 0.0) fail("grid.L", "must be positive");

    if (j.contains("laws")) {
        const auto& l = j.at("laws");
        check_keys(l, "laws.",
                   {"rho_tilde", "pressure_a", "pressure_gamma", "mu_base", "mu_slope",
                    "lambda_b", "lambda_beta", "band_lo", "band_hi"});
        auto opt = [&](const char* k, double dflt) {
            return l.contains(k) ? num(l.at(k), std::string("laws.") + k) : dflt;
        };
        c.laws.rho_tilde = opt("rho_tilde", 1.0);
        c.laws.pressure_a = opt("pressure_a", 1.0);
        c.laws.pressure_gamma = opt("pressure_gamma", 1.4);
        c.laws.mu_base = opt("mu_base", 1.0);
        c.laws.mu_slope = opt("mu_slope", 0.0);
        c.laws.lambda_b = opt("lambda_b", 0.0);
        c.laws.lambda_beta = opt("lambda_beta", 0.0);
        c.laws.band_lo = opt("band_lo", 0.0);
        c.laws.band_hi = opt("band_hi", 0.0);
    }

    if (j.contains("patch")) {
        const auto& p = j.at("patch");
        check_keys(p, "patch.",
                   {"shape", "center", "radius", "ellipse_ratio", "star_modes", "star_amps",
                    "star_phases", "rho_in", "rho_out", "cusp_amp_in", "cusp_amp_out",
                    "cusp_anchor", "alpha"});
        if (p.contains("shape")) {
            std::string s = p.at("shape").get<std::string>();
            if (s == "circle")
                c.patch.shape = PatchSpec::Shape::circle;
            else if (s == "ellipse")
                c.patch.shape = PatchSpec::Shape::ellipse;
            else if (s == "star")
                c.patch.shape = PatchSpec::Shape::star;
            else
                fail("patch.shape", "must be circle, ellipse or star");
        }
        auto opt = [&](const char* k, double dflt) {
            return p.contains(k) ? num(p.at(k), std::string("patch.") + k) : dflt;
        };
        c.patch.center = p.contains("center") ? vec2(p.at("center"), "patch.center")
                                              : Vec2{c.L / 2.0, c.L / 2.0};
        c.patch.radius = opt("radius", 0.5);
        if (c.patch.radius <= 0.0) fail("patch.radius", "must be positive");
        c.patch.ellipse_ratio = opt("ellipse_ratio", 1.0);
        if (p.contains("star_modes"))
            for (const auto& m : p.at("star_modes")) c.patch.star_modes.push_back(m.get<int>());
        if (p.contains("star_amps"))
            for (const auto& m : p.at("star_amps")) c.patch.star_amps.push_back(m.get<double>());
        if (p.contains("star_phases"))
            for (const auto& m : p.at("star_phases"))
                c.patch.star_phases.push_back(m.get<double>());
        if (c.patch.star_amps.size() != c.patch.star_modes.size())
            fail("patch.star_amps", "must match star_modes in length");
        c.patch.rho_in = opt("rho_in", 1.1);
        c.patch.rho_out = opt("rho_out", 1.0);
        c.patch.cusp_amp_in = opt("cusp_amp_in", 0.0);
        c.patch.cusp_amp_out = opt("cusp_amp_out", 0.0);
        if (p.contains("cusp_anchor")) c.patch.cusp_anchor = vec2(p.at("cusp_anchor"), "patch.cusp_anchor");
        c.patch.alpha = opt("alpha", 0.5);
        if (!(c.patch.alpha > 0.0 && c.patch.alpha < 1.0))
            fail("patch.alpha", "must lie in (0, 1)");
        c.alpha = c.patch.alpha;
    } else {
        c.patch.center = {c.L / 2.0, c.L / 2.0};
    }

    if (j.contains("velocity")) {
        const auto& v = j.at("velocity");
        check_keys(v, "velocity.",
                   {"center", "stream_amp", "stream_radius", "potential_amp",
                    "potential_radius", "delta"});
        auto opt = [&](const char* k, double dflt) {
            return v.contains(k) ? num(v.at(k), std::string("velocity.") + k) : dflt;
        };
        c.velocity.center = v.contains("center") ? vec2(v.at("center"), "velocity.center")
                                                 : c.patch.center;
        c.velocity.stream_amp = opt("stream_amp", 0.0);
        c.velocity.stream_radius = opt("stream_radius", 1.0);
        c.velocity.potential_amp = opt("potential_amp", 0.0);
        c.velocity.potential_radius = opt("potential_radius", 1.0);
        c.velocity.delta = opt("delta", 0.1);
        if (!(c.velocity.delta > 0.0 && c.velocity.delta < 1.0))
            fail("velocity.delta", "must lie in (0, 1)");
    } else {
        c.velocity.center = c.patch.center;
    }

    if (j.contains("step")) {
        const auto& s = j.at("step");
        check_keys(s, "step.",
                   {"dt", "cfl", "dt_max", "dealias", "freeze_velocity", "extrapolate_stages"});
        auto opt = [&](const char* k, double dflt) {
            return s.contains(k) ? num(s.at(k), std::string("step.") + k) : dflt;
        };
        c.step.dt_fixed = opt("dt", 0.0);
        c.step.cfl = opt("cfl", 0.4);
        c.step.dt_max = opt("dt_max", 5e-3);
        if (s.contains("dealias")) c.step.dealias = s.at("dealias").get<bool>();
        if (s.contains("freeze_velocity"))
            c.step.freeze_velocity = s.at("freeze_velocity").get<bool>();
        if (s.contains("extrapolate_stages"))
            c.step.extrapolate_stages = s.at("extrapolate_stages").get<bool>();
        c.step.validate();
    }

    if (j.contains("run")) {
        const auto& r = j.at("run");
        check_keys(r, "run.", {"T", "record_every", "checkpoint_every"});
        c.T = r.contains("T") ? num(r.at("T"), "run.T") : 1.0;
        if (c.T <= 0.0) fail("run.T", "must be positive");
        if (r.contains("record_every")) c.record_every = r.at("record_every").get<int>();
        if (c.record_every < 1) fail("run.record_every", "must be >= 1");
        if (r.contains("checkpoint_every"))
            c.checkpoint_every = r.at("checkpoint_every").get<int>();
    }

    if (j.contains("particles")) {
        const auto& p = j.at("particles");
        check_keys(p, "particles.", {"factor"});
        if (p.contains("factor")) c.particle_factor = p.at("factor").get<int>();
        if (c.particle_factor < 1 || c.particle_factor > 8)
            fail("particles.factor", "must lie in [1, 8]");
    }
    if (j.contains("markers")) {
        c.markers = j.at("markers").get<int>();
        if (c.markers < 16 || c.markers > 2048) fail("markers", "must lie in [16, 2048]");
    }
    if (j.contains("probes")) {
        const auto& p = j.at("probes");
        check_keys(p, "probes.", {"r0_factor", "pair_budget", "alpha", "band_factor"});
        auto opt = [&](const char* k, double dflt) {
            return p.contains(k) ? num(p.at(k), std::string("probes.") + k) : dflt;
        };
        c.probe_r0_factor = opt("r0_factor", 12.0);
        c.probe_alpha = opt("alpha", 1.0);
        c.band_factor = opt("band_factor", 3.0);
        if (p.contains("pair_budget")) c.pair_budget = p.at("pair_budget").get<int>();
        if (c.pair_budget < 100) fail("probes.pair_budget", "must be >= 100");
    }
    if (j.contains("blowup")) {
        const auto& b = j.at("blowup");
        check_keys(b, "blowup.",
                   {"c_gamma", "grad_gamma_holder", "inv_rho", "inv_mu", "u_h1",
                    "rho_udot_l2", "p_dev_pw", "composite"});
        auto opt = [&](const char* k, double dflt) {
            return b.contains(k) ? num(b.at(k), std::string("blowup.") + k) : dflt;
        };
        c.blowup.c_gamma = opt("c_gamma", c.blowup.c_gamma);
        c.blowup.grad_gamma_holder = opt("grad_gamma_holder", c.blowup.grad_gamma_holder);
        c.blowup.inv_rho = opt("inv_rho", c.blowup.inv_rho);
        c.blowup.inv_mu = opt("inv_mu", c.blowup.inv_mu);
        c.blowup.u_h1 = opt("u_h1", c.blowup.u_h1);
        c.blowup.rho_udot_l2 = opt("rho_udot_l2", c.blowup.rho_udot_l2);
        c.blowup.p_dev_pw = opt("p_dev_pw", c.blowup.p_dev_pw);
        c.blowup.composite = opt("composite", c.blowup.composite);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("heatmaps")) c.heatmaps = j.at("heatmaps").get<bool>();

    c.config_text = j.dump();
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

/// FNV-1a hash of the canonical config text, for provenance.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : c.config_text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace patchns
