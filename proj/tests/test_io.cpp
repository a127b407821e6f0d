#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "sgs/contraction.hpp"
#include "sgs/io.hpp"
#include "sgs/lattice.hpp"
#include "sgs/optimizer.hpp"
#include "sgs/sgs_state.hpp"
#include "sgs/validate.hpp"

using namespace sgs;

namespace {
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sgs_io_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};
} // namespace

TEST_CASE("states roundtrip through the binary container") {
    TempDir dir;
    SGSState s = random_sgs(SGSParams{{3, 3, 2}, 1, 2, 1}, 99);
    auto h = build_hamiltonian(Model::Heisenberg, {3, 3, 2});
    const double e0 = energy(s, h);

    io::save_state(s, dir.file("state.sgs"));
    SGSState loaded = io::load_state(dir.file("state.sgs"));
    CHECK(loaded.params == s.params);
    CHECK(energy(loaded, h) == doctest::Approx(e0).epsilon(1e-10));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(oracles::max_abs_diff(loaded.rows[r].tensors[c], s.rows[r].tensors[c]) == 0.0);
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 2; ++t)
            CHECK(oracles::max_abs_diff(loaded.unitaries[c][t], s.unitaries[c][t]) == 0.0);
}

TEST_CASE("blocked states roundtrip too") {
    TempDir dir;
    SGSState s = random_sgs(SGSParams{{4, 2, 2}, 1, 4, 2}, 7);
    io::save_state(s, dir.file("b.sgs"));
    SGSState loaded = io::load_state(dir.file("b.sgs"));
    CHECK(loaded.params.N == 2);
    auto a = to_statevector(s);
    auto b = to_statevector(loaded);
    CHECK(oracles::max_abs_diff(a, b) == 0.0);
}

TEST_CASE("corrupt state files are rejected") {
    TempDir dir;
    io::atomic_write(dir.file("bad.sgs"), "not a state");
    CHECK_THROWS_AS(io::load_state(dir.file("bad.sgs")), ValidationError);
}

TEST_CASE("config hashes are stable and sensitive") {
    nlohmann::json a{{"x", 1}, {"y", "z"}};
    nlohmann::json b{{"x", 2}, {"y", "z"}};
    CHECK(io::config_hash(a) == io::config_hash(a));
    CHECK(io::config_hash(a) != io::config_hash(b));
}

TEST_CASE("traces serialize as line-delimited JSON") {
    TempDir dir;
    EnergyTrace trace;
    trace.add({"init", -1, -1, 1.0, 0, 0, true});
    trace.add({"a-sweep", 0, 1, 0.5, 0, 0, true});
    trace.converged = true;
    trace.outer_iterations = 1;
    io::save_trace(trace, dir.file("trace.jsonl"));

    std::ifstream in(dir.file("trace.jsonl"));
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK_NOTHROW(nlohmann::json::parse(line));
    }
    CHECK(lines == 3);
}

TEST_CASE("the oracle battery passes on the default instance set") {
    ValidationConfig cfg;
    cfg.seeds_per_lattice = 1; // the full battery is exercised by acceptance
    for (const auto& check : oracle_battery(cfg)) {
        CAPTURE(check.name);
        CHECK(check.pass);
    }
}
