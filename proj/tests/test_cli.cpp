#include "helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace {

using Json = nlohmann::json;

int run(const std::string& args) {
    const std::string cmd = std::string(SCDESIGN_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json load(const std::filesystem::path& p) {
    std::ifstream in(p);
    return Json::parse(in);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string panel_args(const testing::TempDir& dir, bool partition = true) {
    const std::string d = dir.path().string();
    return "--outcomes " + d + "/outcomes.csv --covariates " + d + "/covariates.csv --weights " + d +
           "/weights.csv --T0 10" + (partition ? " --T_E 7" : "");
}

void simulate_small(const testing::TempDir& dir, const std::string& extra = "") {
    REQUIRE(run("simulate --J 6 --T 12 --T0 10 --T_E 7 --r 2 --F 3 --seed 5 " + extra + " --out " +
                dir.path().string()) == 0);
}

}  // namespace

TEST_CASE("design, estimate, infer and report") {
    testing::TempDir dir("cli");
    const std::string out = " --out " + dir.path().string();
    simulate_small(dir);
    REQUIRE(run("design " + panel_args(dir) + out) == 0);
    const Json design = load(dir / "design.json");
    double sw = 0, sv = 0;
    for (const auto& x : design["w"]) sw += x.get<double>();
    for (const auto& x : design["v"]) sv += x.get<double>();
    CHECK(sw == doctest::Approx(1.0));
    CHECK(sv == doctest::Approx(1.0));
    CHECK(slurp(dir / "weights.txt").rfind("unit", 0) == 0);

    const std::string d = dir.path().string();
    REQUIRE(run("estimate " + panel_args(dir) + " --potential " + d + "/potential.csv --truth " + d + "/truth.csv" +
                out) == 0);
    const Json est = load(dir / "estimate.json");
    CHECK(est["experimental"]["tau_hat"].size() == 2);
    CHECK(est.contains("mae"));

    REQUIRE(run("report " + panel_args(dir, false) + " --potential " + d + "/potential.csv" + out) == 0);
    CHECK_FALSE(load(dir / "summary.json").contains("p_value"));

    REQUIRE(run("infer" + out) == 0);
    const Json inf = load(dir / "inference.json");
    CHECK(inf["p_value"]["denominator"] == 10);
    REQUIRE(run("report " + panel_args(dir, false) + " --potential " + d + "/potential.csv" + out) == 0);
    CHECK(load(dir / "summary.json").contains("p_value"));

    const std::string first = slurp(dir / "design.json");
    REQUIRE(run("design " + panel_args(dir) + out) == 0);
    CHECK(slurp(dir / "design.json") == first);
}

TEST_CASE("constrained to one treated unit") {
    testing::TempDir dir("cli1");
    simulate_small(dir);
    REQUIRE(run("design " + panel_args(dir) + " --kind constrained --m_hi 1 --out " + dir.path().string()) == 0);
    const Json design = load(dir / "design.json");
    int nonzero = 0;
    for (const auto& x : design["w"]) {
        if (x.get<double>() != 0.0) {
            ++nonzero;
            CHECK(x.get<double>() == 1.0);
        }
    }
    CHECK(nonzero == 1);
}

TEST_CASE("config files") {
    testing::TempDir dir("cli2");
    simulate_small(dir);
    const std::string d = dir.path().string();
    std::ofstream(dir / "bad.json") << R"({"kind": "constrained", "m_hi": 1, "colour": "red"})";
    const std::filesystem::path out = dir / "bad_out";
    CHECK(run("design " + panel_args(dir) + " --config " + d + "/bad.json --out " + out.string()) == 2);
    CHECK_FALSE(std::filesystem::exists(out / "design.json"));

    std::ofstream(dir / "good.json") << R"({"kind": "constrained", "m_hi": 1, "T0": 10, "T_E": 7})";
    REQUIRE(run("design --outcomes " + d + "/outcomes.csv --covariates " + d + "/covariates.csv --config " + d +
                "/good.json --out " + d + "/good") == 0);
    CHECK(load(dir / "good" / "design.json")["treated"].size() == 1);
    REQUIRE(run("design --outcomes " + d + "/outcomes.csv --covariates " + d + "/covariates.csv --config " + d +
                "/good.json --m_hi 3 --kind constrained --out " + d + "/flag") == 0);
    CHECK(load(dir / "flag" / "design.json")["spec"]["m_hi"] == 3);
}

TEST_CASE("exit codes") {
    testing::TempDir dir("cli3");
    simulate_small(dir);
    const std::string d = dir.path().string();
    CHECK(run("design " + panel_args(dir) + " --kind clustered --n_clusters 6 --out " + d) == 4);
    CHECK(run("design " + panel_args(dir) + " --enumeration_cap 5 --out " + d) == 4);
    CHECK(run("design " + panel_args(dir) + " --kind constrained --m_hi 9 --out " + d) == 2);
    CHECK(run("estimate " + panel_args(dir) + " --design " + d + "/none.json --out " + d) == 3);
    CHECK(run("design --outcomes " + d + "/missing.csv --covariates " + d + "/covariates.csv --T0 10 --T_E 7 --out " + d) ==
          1);
    CHECK(run("design --bogus") == 2);
    std::ofstream(dir / "dup.csv") << "unit,z1\nu1,1\nu1,2\n";
    CHECK(run("design --outcomes " + d + "/outcomes.csv --covariates " + d + "/dup.csv --T0 10 --T_E 7 --out " + d) == 3);

    testing::TempDir full("cli4");
    REQUIRE(run("simulate --J 6 --T 12 --T0 10 --T_E 10 --r 2 --F 3 --seed 5 --out " + full.path().string()) == 0);
    const std::string f = full.path().string();
    const std::string args = "--outcomes " + f + "/outcomes.csv --covariates " + f + "/covariates.csv --T0 10 --T_E 10";
    REQUIRE(run("design " + args + " --out " + f) == 0);
    REQUIRE(run("estimate " + args + " --potential " + f + "/potential.csv --out " + f) == 0);
    CHECK(run("infer --out " + f) == 5);
}

TEST_CASE("quadratic program export") {
    testing::TempDir dir("cli5");
    std::ofstream(dir / "y.csv") << "unit,period,value\na,1,1\nb,1,3\na,2,0\nb,2,0\na,3,0\nb,3,0\n";
    std::ofstream(dir / "z.csv") << "unit\na\nb\n";
    const std::string d = dir.path().string();
    REQUIRE(run("export-qcqp --outcomes " + d + "/y.csv --covariates " + d + "/z.csv --T0 2 --T_E 1 --no-scaling --out " +
                d) == 0);
    const Json q = load(dir / "qcqp.json");
    CHECK(q["J"] == 2);
    CHECK(q["M"] == 1);
    CHECK(q["P0"] == Json::parse("[[1,3,0,0],[3,9,0,0],[0,0,1,3],[0,0,3,9]]"));
    CHECK(q["q0"] == Json::parse("[-4,-12,-4,-12]"));
    CHECK(q["P1"] == Json::parse("[[0,0,1,0],[0,0,0,1],[1,0,0,0],[0,1,0,0]]"));
    CHECK(q["e1"] == Json::parse("[1,1,0,0]"));
}

TEST_CASE("plot data tracks before and diverges after") {
    testing::TempDir dir("cli6");
    simulate_small(dir);
    const std::string d = dir.path().string();
    REQUIRE(run("design " + panel_args(dir) + " --out " + d) == 0);
    REQUIRE(run("report " + panel_args(dir, false) + " --potential " + d + "/potential.csv --out " + d) == 0);
    std::ifstream gap(dir / "gap.csv");
    std::string line;
    std::getline(gap, line);
    double pre = 0, post = 0;
    int t = 0;
    while (std::getline(gap, line)) {
        const double x = std::abs(std::stod(line.substr(line.find(',') + 1)));
        if (t < 7) pre = std::max(pre, x);
        if (t >= 10) post = std::max(post, x);
        ++t;
    }
    CHECK(t == 12);
    CHECK(pre < post);
}
