#include <catch2/catch.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "tdreg/pattern_io.hpp"

#ifndef TDREG_BIN
#define TDREG_BIN "tdreg"
#endif

namespace {

int run_cli(const std::string& args, const std::string& err_path = "/tmp/tdreg_cli_err.txt") {
    const std::string cmd = std::string(TDREG_BIN) + " " + args + " >/dev/null 2>" + err_path;
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("register command", "[cli]") {
    SECTION("noiseless identity target exits 0 with a clean trace") {
        write_file("/tmp/tdreg_cli_reg.json", R"({
            "model": {"kind": "Translation2D"},
            "seed": 11,
            "target": {"lambda": [0.0, 0.0], "nu_rel": 0.0},
            "schedule": {"kind": "fixed", "rhos": [0.0]},
            "quadrature": {"window": 12.0, "step": 0.1}
        })");
        const int rc = run_cli("register --config /tmp/tdreg_cli_reg.json --out /tmp/tdreg_cli_reg.csv");
        CHECK(rc == 0);
        const std::string csv = slurp("/tmp/tdreg_cli_reg.csv");
        CHECK(csv.find("iter,rho,lambda0,lambda1,residual,bound") != std::string::npos);
        // two rows: the initial estimate and one level
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    }

    SECTION("malformed config names the missing field and exits 2") {
        write_file("/tmp/tdreg_cli_bad.json", R"({"model": {"kind": "Translation2D"}})");
        const int rc = run_cli("register --config /tmp/tdreg_cli_bad.json --out /tmp/x.csv");
        CHECK(rc == 2);
        CHECK(slurp("/tmp/tdreg_cli_err.txt").find("target.lambda") != std::string::npos);
    }

    SECTION("oracle schedule without a lambda_o source exits 2") {
        write_file("/tmp/tdreg_cli_oracle.json", R"({
            "model": {"kind": "Translation2D"},
            "target": {"lambda": [0.1, 0.0]},
            "schedule": {"kind": "optimal-oracle", "levels": 4}
        })");
        const int rc = run_cli("register --config /tmp/tdreg_cli_oracle.json --out /tmp/x.csv");
        CHECK(rc == 2);
        CHECK(slurp("/tmp/tdreg_cli_err.txt").find("bruteforce") != std::string::npos);
    }

    SECTION("numerical failure exits 3") {
        // a rotationally symmetric pattern makes the rotation tangent vanish
        tdreg::Pattern atom{{{1.0, tdreg::AtomParams(0.0, {0, 0}, {1, 1})}}};
        tdreg::save_pattern("/tmp/tdreg_cli_sym.json", atom);
        write_file("/tmp/tdreg_cli_rank.json", R"({
            "model": {"kind": "TransRot3D"},
            "pattern": {"file": "/tmp/tdreg_cli_sym.json"},
            "target": {"lambda": [0.0, 0.1, 0.0]},
            "schedule": {"kind": "fixed", "rhos": [0.0]},
            "quadrature": {"window": 12.0, "step": 0.1}
        })");
        const int rc = run_cli("register --config /tmp/tdreg_cli_rank.json --out /tmp/x.csv");
        CHECK(rc == 3);
    }
}

TEST_CASE("sweep command determinism", "[cli]") {
    write_file("/tmp/tdreg_cli_sweep.json", R"({
        "model": {"kind": "Translation2D"},
        "seed": 21,
        "trials": 3,
        "rho_values": [0.0, 1.0, 2.0],
        "nu_values": [0.3],
        "quadrature": {"window": 12.0, "step": 0.15}
    })");
    REQUIRE(run_cli("sweep --config /tmp/tdreg_cli_sweep.json --axis rho --out /tmp/tdreg_cli_s1.csv --threads 2") == 0);
    REQUIRE(run_cli("sweep --config /tmp/tdreg_cli_sweep.json --axis rho --out /tmp/tdreg_cli_s2.csv --threads 1") == 0);
    const std::string a = slurp("/tmp/tdreg_cli_s1.csv");
    const std::string b = slurp("/tmp/tdreg_cli_s2.csv");
    CHECK(!a.empty());
    CHECK(a == b);  // byte-identical across runs and thread counts

    SECTION("axis with a single grid point is a config error") {
        CHECK(run_cli("sweep --config /tmp/tdreg_cli_sweep.json --axis nu --out /tmp/x.csv") == 2);
    }
}

TEST_CASE("schedule and classify commands", "[cli]") {
    SECTION("geometric schedule table") {
        write_file("/tmp/tdreg_cli_sched.json", R"({
            "schedule": {"kind": "geometric", "rho1": 4.0, "alpha": 0.25, "floor": 0.0, "levels": 4}
        })");
        REQUIRE(run_cli("schedule --config /tmp/tdreg_cli_sched.json --out /tmp/tdreg_cli_sched.csv") == 0);
        const std::string csv = slurp("/tmp/tdreg_cli_sched.csv");
        CHECK(csv.find("level,rho") != std::string::npos);
        CHECK(csv.find("\n2,2\n") != std::string::npos);  // rho halves per level at alpha = 1/4
        CHECK(csv.find("\n4,0.5\n") != std::string::npos);
    }

    SECTION("small classification run produces both tables") {
        write_file("/tmp/tdreg_cli_cls.json", R"({
            "model": {"kind": "Translation2D"},
            "seed": 31,
            "quadrature": {"window": 12.0, "step": 0.15},
            "classification": {"repetitions": 4, "rho_values": [0.0, 1.0]}
        })");
        REQUIRE(run_cli("classify --config /tmp/tdreg_cli_cls.json --out /tmp/tdreg_cli_cls.csv "
                        "--report /tmp/tdreg_cli_clsrep.csv --threads 2") == 0);
        const std::string summary = slurp("/tmp/tdreg_cli_cls.csv");
        CHECK(summary.find("rho,misclass_rate,mean_likeliness,repetitions") != std::string::npos);
        CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);  // header rows + 2 rho rows
        const std::string report = slurp("/tmp/tdreg_cli_clsrep.csv");
        CHECK(std::count(report.begin(), report.end(), '\n') == 10);  // 4 queries x 2 rho + headers
    }
}
