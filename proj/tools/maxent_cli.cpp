#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <maxent/ebe.hpp>
#include <maxent/ingest.hpp>
#include <maxent/json_io.hpp>
#include <maxent/newton.hpp>

using namespace maxent;

namespace {

std::string now_iso8601() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

void write_manifest(const std::string& out_path, const RunManifest& m) {
    write_json_file(out_path + ".manifest.json", to_json(m));
}

struct CommonOpts {
    std::string quad = "sparse";
    int level = 7;
    double tol1 = 1e-1;
    double tol2 = 1e-10;
    double lambda_min = 1e-8;
    std::uint64_t seed = 0;
    std::string order_mode = "canonical";

    void attach(CLI::App* app) {
        app->add_option("--quad", quad, "quadrature rule: sparse|uniform")
            ->check(CLI::IsMember({"sparse", "uniform"}));
        app->add_option("--level", level, "sparse level, or nodes per axis for uniform");
        app->add_option("--tol1", tol1, "scalar-Newton working tolerance");
        app->add_option("--tol2", tol2, "corrector / acceptance tolerance");
        app->add_option("--lambda-min", lambda_min, "minimum homotopy sub-step");
        app->add_option("--seed", seed, "deflation RNG seed");
        app->add_option("--order-mode", order_mode, "constraint ordering")
            ->check(CLI::IsMember({"canonical", "convexity", "user"}));
    }

    QuadSpec quad_spec() const {
        return {quad == "sparse" ? QuadKind::sparse : QuadKind::uniform, level};
    }
    EbeConfig ebe_config() const {
        EbeConfig cfg;
        cfg.tol_newton = tol1;
        cfg.tol_predictor = tol2;
        cfg.lambda_min = lambda_min;
        cfg.seed = seed;
        return cfg;
    }
    json config_echo() const {
        return {{"quad", quad},           {"level", level}, {"tol1", tol1},
                {"tol2", tol2},           {"lambda_min", lambda_min},
                {"seed", seed},           {"order_mode", order_mode}};
    }
};

// Apply the requested constraint ordering to a basis read from JSON.
BasisSet apply_order(const BasisSet& b, const std::string& mode) {
    if (mode == "convexity") return reorder_for_convexity(b).first;
    if (mode == "canonical") {
        BasisSet c = b;
        std::sort(c.indices.begin(), c.indices.end(), graded_lex_less);
        return c;
    }
    return b;  // user: keep the file order
}

int cmd_moments(const std::string& csv_in, const std::string& out, int dim, int order,
                const CommonOpts& opt) {
    auto samples = read_samples_csv(csv_in);
    if (dim != static_cast<int>(samples.dimension()))
        throw NumericalError("--dim does not match the CSV column count");
    auto rescale = fit_rescale(samples);
    auto basis = apply_order(enumerate_multi_indices(dim, order), opt.order_mode);
    auto targets = empirical_moments(samples, rescale, basis);
    write_json_file(out, problem_to_json(basis, targets, opt.quad_spec(), rescale));

    RunManifest m{"moments", {csv_in}, {out}, opt.config_echo(), opt.seed, now_iso8601()};
    m.config["dim"] = dim;
    m.config["order"] = order;
    write_manifest(out, m);
    return 0;
}

int cmd_solve(const std::string& in, const std::string& out, const std::string& method,
              const CommonOpts& opt) {
    json pj = read_json_file(in);
    if (opt.order_mode != "user") {
        BasisSet b = basis_from_json(pj.at("basis"));
        auto tv = pj.at("targets").get<std::vector<double>>();
        BasisSet ordered = apply_order(b, opt.order_mode);
        std::vector<double> tv2(tv.size());
        for (std::size_t k = 0; k < ordered.indices.size(); ++k) {
            auto it = std::find(b.indices.begin(), b.indices.end(), ordered.indices[k]);
            tv2[k] = tv[static_cast<std::size_t>(it - b.indices.begin())];
        }
        pj["basis"] = to_json(ordered);
        pj["targets"] = tv2;
    }
    MomentProblem p = problem_from_json(pj);

    json out_json;
    int exit_code = 0;
    if (method == "ebe") {
        auto rep = ebe_solve(p, opt.ebe_config());
        out_json = to_json(rep);
        std::ofstream trace(out + ".trace.jsonl");
        write_trace_jsonl(trace, rep.trace);
        exit_code = rep.all_retained ? 0 : 2;
    } else {
        NewtonConfig cfg;
        cfg.tol = opt.tol2;
        cfg.damped = (method == "newton");
        auto rep = newton_full_solve(p, cfg);
        out_json = {{"lambda", std::vector<double>(rep.lambda.begin(), rep.lambda.end())},
                    {"z", rep.z},
                    {"converged", rep.converged},
                    {"residual_norm", rep.residual_norm},
                    {"final_moment_error", rep.moment_error},
                    {"iterations", rep.iterations},
                    {"wall_seconds", rep.wall_seconds}};
        if (!rep.converged) {
            out_json["diverged_reason"] = rep.diverged_reason;
            exit_code = 1;
        }
    }
    out_json["problem"] = pj;
    out_json["method"] = method;
    write_json_file(out, out_json);

    RunManifest m{"solve", {in}, {out}, opt.config_echo(), opt.seed, now_iso8601()};
    m.config["method"] = method;
    write_manifest(out, m);
    if (exit_code == 1) std::cerr << "solve failed: " << out_json["diverged_reason"] << "\n";
    return exit_code;
}

int cmd_eval(const std::string& in, const std::string& out, int grid_per_axis, bool original,
             bool marginals, const CommonOpts& opt) {
    json rj = read_json_file(in);
    MomentProblem p = problem_from_json(rj.at("problem"));
    auto lv = rj.at("lambda").get<std::vector<double>>();
    LagrangeVector lam =
        Eigen::Map<const LagrangeVector>(lv.data(), static_cast<Eigen::Index>(lv.size()));
    int d = p.basis().dimension;
    auto [z, dens] = p.normalize(lam);

    if (marginals) {
        // 1-D marginal per axis: integrate the cube density over the other
        // axes with the quadrature rule restricted to those axes.
        for (int axis = 0; axis < d; ++axis) {
            QuadratureRule sub = (d == 1) ? p.rule()
                                 : (p.rule().kind == QuadKind::sparse)
                                     ? smolyak_sparse_grid(d - 1, p.rule().level)
                                     : uniform_grid(d - 1, p.rule().level);
            std::ofstream os(out + ".marginal" + std::to_string(axis) + ".csv");
            os << "x,density\n";
            for (int g = 0; g < grid_per_axis; ++g) {
                double x = -1.0 + 2.0 * g / (grid_per_axis - 1);
                double v = 0.0;
                if (d == 1) {
                    v = dens({x});
                } else {
                    std::vector<double> pt(static_cast<std::size_t>(d));
                    for (std::size_t q = 0; q < sub.size(); ++q) {
                        std::size_t c = 0;
                        for (int k = 0; k < d; ++k)
                            pt[static_cast<std::size_t>(k)] =
                                (k == axis) ? x : sub.nodes[q][c++];
                        v += sub.weights[q] * dens(pt);
                    }
                }
                os << x << "," << v << "\n";
            }
        }
        RunManifest m{"eval", {in}, {out}, opt.config_echo(), opt.seed, now_iso8601()};
        write_manifest(out, m);
        return 0;
    }

    std::function<double(const std::vector<double>&)> f = dens;
    std::vector<double> lo(static_cast<std::size_t>(d), -1.0);
    std::vector<double> hi(static_cast<std::size_t>(d), 1.0);
    if (original) {
        if (!p.rescale()) throw NumericalError("report has no rescale record");
        f = p.density_original(lam);
        lo = p.rescale()->lo;
        hi = p.rescale()->hi;
    }

    std::ofstream os(out);
    if (!os) throw NumericalError("cannot write file: " + out);
    for (int k = 0; k < d; ++k) os << "x" << k << ",";
    os << "density\n";
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> pt(static_cast<std::size_t>(d));
    while (true) {
        for (int k = 0; k < d; ++k) {
            auto ku = static_cast<std::size_t>(k);
            pt[ku] = lo[ku] + (hi[ku] - lo[ku]) * idx[ku] / (grid_per_axis - 1);
            os << pt[ku] << ",";
        }
        os << f(pt) << "\n";
        int k = 0;
        while (k < d && ++idx[static_cast<std::size_t>(k)] == grid_per_axis)
            idx[static_cast<std::size_t>(k++)] = 0;
        if (k == d) break;
    }
    RunManifest m{"eval", {in}, {out}, opt.config_echo(), opt.seed, now_iso8601()};
    write_manifest(out, m);
    return 0;
}

int cmd_compare(const std::string& in, const std::string& out, bool damped,
                const CommonOpts& opt) {
    MomentProblem p = problem_from_json(read_json_file(in));
    auto ebe_rep = ebe_solve(p, opt.ebe_config());

    NewtonConfig ncfg;
    ncfg.tol = opt.tol2;
    ncfg.damped = damped;
    auto newton_rep = newton_full_solve(p, ncfg);

    json j{{"ebe",
            {{"converged", ebe_rep.all_retained},
             {"lambda", std::vector<double>(ebe_rep.lambda.begin(), ebe_rep.lambda.end())},
             {"moment_error", ebe_rep.final_moment_error},
             {"discarded", ebe_rep.discarded.size()},
             {"wall_seconds", ebe_rep.wall_seconds}}},
           {"newton",
            {{"converged", newton_rep.converged},
             {"lambda",
              std::vector<double>(newton_rep.lambda.begin(), newton_rep.lambda.end())},
             {"moment_error", newton_rep.moment_error},
             {"diverged_reason", newton_rep.diverged_reason},
             {"wall_seconds", newton_rep.wall_seconds}}},
           {"newton_damped", damped}};
    write_json_file(out, j);

    RunManifest m{"compare", {in}, {out}, opt.config_echo(), opt.seed, now_iso8601()};
    m.config["newton_damped"] = damped;
    write_manifest(out, m);
    return ebe_rep.all_retained ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"maximum-entropy density reconstruction from polynomial moments"};
    app.require_subcommand(1);
    CommonOpts opt;

    auto* mom = app.add_subcommand("moments", "compute empirical moments from CSV samples");
    std::string csv_in, mom_out = "problem.json";
    int dim = 1, order = 2;
    mom->add_option("input", csv_in, "sample CSV, one row per sample")->required();
    mom->add_option("-o,--output", mom_out, "moment-problem JSON path");
    mom->add_option("--dim", dim, "sample dimension")->required();
    mom->add_option("--order", order, "maximum total constraint order")->required();
    opt.attach(mom);

    auto* sol = app.add_subcommand("solve", "solve a moment problem");
    std::string sol_in, sol_out = "report.json", method = "ebe";
    sol->add_option("input", sol_in, "moment-problem JSON")->required();
    sol->add_option("-o,--output", sol_out, "report JSON path");
    sol->add_option("--method", method, "ebe|newton|newton-undamped")
        ->check(CLI::IsMember({"ebe", "newton", "newton-undamped"}));
    opt.attach(sol);

    auto* ev = app.add_subcommand("eval", "evaluate a solved density on a grid");
    std::string ev_in, ev_out = "density.csv";
    int grid = 101;
    bool original = false, marginals = false;
    ev->add_option("input", ev_in, "report JSON from solve")->required();
    ev->add_option("-o,--output", ev_out, "density CSV path");
    ev->add_option("--grid-per-axis", grid, "grid points per axis");
    ev->add_flag("--original", original, "evaluate in original data coordinates");
    ev->add_flag("--marginals", marginals, "write 1-D marginal CSVs per axis");
    opt.attach(ev);

    auto* cmp = app.add_subcommand("compare", "run EBE and full Newton on the same problem");
    std::string cmp_in, cmp_out = "compare.json";
    bool damped = false;
    cmp->add_option("input", cmp_in, "moment-problem JSON")->required();
    cmp->add_option("-o,--output", cmp_out, "comparison JSON path");
    cmp->add_flag("--damped", damped, "use damped Newton for the baseline");
    opt.attach(cmp);

    CLI11_PARSE(app, argc, argv);

    try {
        if (mom->parsed()) return cmd_moments(csv_in, mom_out, dim, order, opt);
        if (sol->parsed()) return cmd_solve(sol_in, sol_out, method, opt);
        if (ev->parsed()) return cmd_eval(ev_in, ev_out, grid, original, marginals, opt);
        if (cmp->parsed()) return cmd_compare(cmp_in, cmp_out, damped, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
