/// Configuration schema validation, checkpoint round trips, CSV/PGM
/// output, and run determinism (same config + seed => byte-identical
/// streams).
#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "patchns/config.hpp"
#include "patchns/output.hpp"
#include "patchns/runner.hpp"

using namespace patchns;

namespace {

nlohmann::json tiny_scenario() {
    return nlohmann::json::parse(R"({
      "grid": {"n": 32, "L": 8.0},
      "laws": {"pressure_gamma": 1.4, "mu_base": 1.0, "mu_slope": 0.2,
               "lambda_b": 0.5, "lambda_beta": 1.0},
      "patch": {"radius": 0.8, "rho_in": 1.1, "rho_out": 1.0, "alpha": 0.5},
      "velocity": {"stream_amp": 0.1, "stream_radius": 1.5, "delta": 0.2},
      "step": {"dt": 0.004},
      "run": {"T": 0.06, "record_every": 5},
      "particles": {"factor": 2},
      "markers": 64,
      "probes": {"pair_budget": 2000},
      "seed": 99
    })");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config schema: violations name the offending field") {
    auto j = tiny_scenario();
    j["grid"]["n"] = 100;  // not a power of two
    try {
        parse_config(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("grid.n") != std::string::npos);
    }

    j = tiny_scenario();
    j["patch"]["alpha"] = 1.5;
    try {
        parse_config(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("patch.alpha") != std::string::npos);
    }

    j = tiny_scenario();
    j["stepp"] = 1;  // typo'd key
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

    j = tiny_scenario();
    j["step"]["cfl"] = 2.0;
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
}

TEST_CASE("config hash is stable and text-sensitive") {
    ScenarioConfig a = parse_config(tiny_scenario());
    ScenarioConfig b = parse_config(tiny_scenario());
    CHECK(config_hash(a) == config_hash(b));
    auto j = tiny_scenario();
    j["seed"] = 100;
    ScenarioConfig c = parse_config(j);
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("checkpoint round trip preserves the state bitwise") {
    ScenarioConfig cfg = parse_config(tiny_scenario());
    auto laws = std::make_shared<ConstitutiveLaws>(ConstitutiveLaws::from_preset(cfg.laws));
    FluidState st = build_initial_state(cfg.patch, cfg.velocity, cfg.n, cfg.L, laws,
                                        cfg.particle_factor, cfg.markers);
    StepConfig scfg;
    scfg.dt_fixed = 4e-3;
    for (int s = 0; s < 5; ++s) full_step(st, scfg);

    std::string path = std::filesystem::temp_directory_path() / "pns_ckpt_test.pnsc";
    io::write_checkpoint(path, st);
    FluidState rt = io::read_checkpoint(path, laws);
    CHECK(rt.time == st.time);
    CHECK(rt.n() == st.n());
    for (size_t k = 0; k < st.rho.size(); ++k) {
        REQUIRE(rt.rho[k] == st.rho[k]);
        REQUIRE(rt.u.x[k] == st.u.x[k]);
        REQUIRE(rt.levelset.phi[k] == st.levelset.phi[k]);
    }
    for (int p = 0; p < st.particles.count(); p += 13) {
        REQUIRE(rt.particles.pos_x[p] == st.particles.pos_x[p]);
        REQUIRE(rt.particles.fval[p] == st.particles.fval[p]);
        REQUIRE(rt.particles.jac[p] == st.particles.jac[p]);
        REQUIRE(rt.particles.side[p] == st.particles.side[p]);
    }
    for (int i = 0; i < st.curve.size(); ++i) {
        REQUIRE(rt.curve.pos[i].x == st.curve.pos[i].x);
        REQUIRE(rt.curve.s[i] == st.curve.s[i]);
    }
    std::filesystem::remove(path);

    // Bad magic rejected.
    std::ofstream bad(path, std::ios::binary);
    bad << "NOTMAGIC" << std::string(64, '\0');
    bad.close();
    CHECK_THROWS_WITH(io::read_checkpoint(path, laws), Catch::Contains("magic"));
    std::filesystem::remove(path);
}

TEST_CASE("same config and seed give byte-identical output streams") {
    ScenarioConfig cfg = parse_config(tiny_scenario());
    auto dir1 = std::filesystem::temp_directory_path() / "pns_det_1";
    auto dir2 = std::filesystem::temp_directory_path() / "pns_det_2";
    for (auto run_dir : {dir1, dir2}) {
        Runner r(cfg, run_dir.string(), true);
        RunSummary s = r.run();
        REQUIRE(s.status == "completed");
    }
    CHECK(slurp(dir1 / "timeseries.csv") == slurp(dir2 / "timeseries.csv"));
    CHECK(slurp(dir1 / "markers.csv") == slurp(dir2 / "markers.csv"));
    CHECK(slurp(dir1 / "smallness.json") == slurp(dir2 / "smallness.json"));
    CHECK(!slurp(dir1 / "timeseries.csv").empty());
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("PGM heatmaps carry the right header and size") {
    ScalarGrid f(32, 1.0);
    f.fill_with([](const Vec2& p) { return std::sin(6.28 * p.x); });
    auto path = std::filesystem::temp_directory_path() / "pns_test.pgm";
    io::write_pgm(path.string(), f);
    std::string data = slurp(path.string());
    CHECK(data.substr(0, 3) == "P5\n");
    CHECK(data.find("32 32") != std::string::npos);
    CHECK(data.size() > size_t(32 * 32));
    std::filesystem::remove(path);
}

TEST_CASE("CSV writer formats at full precision and fixed columns") {
    auto path = std::filesystem::temp_directory_path() / "pns_test.csv";
    {
        io::CsvWriter w(path.string(), {"a", "b"});
        w.row({1.0 / 3.0, 2.0});
        CHECK_THROWS_AS(w.row({1.0}), std::logic_error);
    }
    std::string data = slurp(path.string());
    CHECK(data.find("a,b\n") == 0);
    CHECK(data.find("0.33333333333333331") != std::string::npos);
    std::filesystem::remove(path);
}
