#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(MAXENT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path workdir() {
    auto p = fs::temp_directory_path() / "maxent_cli_test";
    fs::create_directories(p);
    return p;
}

// Rejection sampling from rho ~ exp(x + x^2 + x^3) on [-1, 1].
void write_cubic_csv(const fs::path& path, std::size_t n) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> v(0.0, 1.0);
    std::ofstream os(path);
    os << "x\n";
    os.precision(17);
    std::size_t got = 0;
    while (got < n) {
        double x = u(rng);
        if (v(rng) * std::exp(3.0) <= std::exp(x + x * x + x * x * x)) {
            os << x << "\n";
            ++got;
        }
    }
}

double trapezoid_integral_csv(const fs::path& path) {
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);  // header
    std::vector<std::pair<double, double>> rows;
    while (std::getline(is, line)) {
        auto comma = line.rfind(',');
        rows.emplace_back(std::stod(line.substr(0, line.find(','))),
                          std::stod(line.substr(comma + 1)));
    }
    double h = rows[1].first - rows[0].first;
    double s = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        s += ((i == 0 || i + 1 == rows.size()) ? 0.5 : 1.0) * rows[i].second;
    return s * h;
}

} // namespace

TEST_CASE("pipeline closure: moments -> solve -> eval") {
    auto dir = workdir();
    auto csv = dir / "samples.csv";
    auto prob = dir / "problem.json";
    auto rep = dir / "report.json";
    auto dens = dir / "density.csv";
    write_cubic_csv(csv, 30000);

    CHECK(run("moments " + csv.string() + " --dim 1 --order 3 -o " + prob.string() +
              " --level 7") == 0);
    CHECK(run("solve " + prob.string() + " -o " + rep.string()) == 0);
    CHECK(run("eval " + rep.string() + " -o " + dens.string() + " --grid-per-axis 5001") == 0);

    json r = json::parse(std::ifstream(rep));
    CHECK(r["all_retained"].get<bool>());
    CHECK(r["lambda"].size() == 3);
    CHECK(r["final_moment_error"].get<double>() <= 1e-8);
    // normalized density on a fine grid integrates to 1
    CHECK(std::abs(trapezoid_integral_csv(dens) - 1.0) <= 1e-6);

    // manifests are written alongside every output
    CHECK(fs::exists(prob.string() + ".manifest.json"));
    CHECK(fs::exists(rep.string() + ".manifest.json"));
    CHECK(fs::exists(dens.string() + ".manifest.json"));
    CHECK(fs::exists(rep.string() + ".trace.jsonl"));
}

TEST_CASE("exit code 2 for partial retention, 1 for fatal errors") {
    auto dir = workdir();
    auto prob = dir / "infeasible.json";
    // f1 = 0.9, f2 = 0.1 violates the variance bound f2 >= f1^2
    json pj{{"basis", {{"dimension", 1}, {"max_order", 2}, {"indices", {{1}, {2}}}}},
            {"targets", {0.9, 0.1}},
            {"quad", {{"kind", "uniform"}, {"level", 257}}}};
    std::ofstream(prob) << pj.dump();
    auto rep = dir / "infeasible_report.json";
    CHECK(run("solve " + prob.string() + " -o " + rep.string()) == 2);
    json r = json::parse(std::ifstream(rep));
    CHECK(r["discarded"].size() == 1);

    CHECK(run("solve " + (dir / "missing.json").string()) == 1);
    std::ofstream(dir / "garbage.json") << "not json";
    CHECK(run("solve " + (dir / "garbage.json").string()) == 1);
    CHECK(run("moments " + (dir / "missing.csv").string() + " --dim 1 --order 2") == 1);
}

TEST_CASE("marginal evaluation on a d=2 report integrates to 1") {
    auto dir = workdir();
    auto prob = dir / "prob2.json";
    json pj{{"basis",
             {{"dimension", 2}, {"max_order", 2}, {"indices", {{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}}}},
            {"targets", {0.05, -0.02, 0.3, 0.01, 0.35}},
            {"quad", {{"kind", "sparse"}, {"level", 7}}}};
    std::ofstream(prob) << pj.dump();
    auto rep = dir / "rep2.json";
    REQUIRE(run("solve " + prob.string() + " -o " + rep.string()) == 0);
    auto out = dir / "marg";
    REQUIRE(run("eval " + rep.string() + " -o " + out.string() +
                " --marginals --grid-per-axis 1001") == 0);
    for (int a = 0; a < 2; ++a) {
        auto path = dir / ("marg.marginal" + std::to_string(a) + ".csv");
        REQUIRE(fs::exists(path));
        CHECK(std::abs(trapezoid_integral_csv(path) - 1.0) <= 1e-6);
    }
}

TEST_CASE("identical inputs and seed reproduce the report bit-for-bit") {
    auto dir = workdir();
    auto prob = dir / "det.json";
    json pj{{"basis", {{"dimension", 1}, {"max_order", 3}, {"indices", {{1}, {2}, {3}}}}},
            {"targets", {0.58667012112330819, 0.56603630729594612, 0.43238949092994367}},
            {"quad", {{"kind", "sparse"}, {"level", 7}}}};
    std::ofstream(prob) << pj.dump();
    auto r1 = dir / "det1.json";
    auto r2 = dir / "det2.json";
    REQUIRE(run("solve " + prob.string() + " -o " + r1.string() + " --seed 9") == 0);
    REQUIRE(run("solve " + prob.string() + " -o " + r2.string() + " --seed 9") == 0);
    json a = json::parse(std::ifstream(r1));
    json b = json::parse(std::ifstream(r2));
    CHECK(a["lambda"] == b["lambda"]);
    CHECK(a["z"] == b["z"]);
}
