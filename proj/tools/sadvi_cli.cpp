// Command-line runner: trains the variational families on the conjugate
// benchmark cases, runs hyperparameter sweeps, executes the invariant suites
// and the projection-rate study, and writes reproducible CSV outputs.
//
// Exit codes: 0 success, 1 validation failure, 2 configuration error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sadvi/config.hpp"
#include "sadvi/evaluation.hpp"
#include "sadvi/models.hpp"
#include "sadvi/train.hpp"
#include "sadvi/validate.hpp"

namespace {

sadvi::RunConfig load_config(const std::string& path) {
    if (path.empty()) return sadvi::RunConfig{};
    return sadvi::RunConfig::parse_file(path);
}

int cmd_run(const std::string& config_path, int case_id, const std::string& method_name,
            const std::string& out_dir, std::uint64_t seed, int jobs) {
    sadvi::RunConfig cfg = load_config(config_path);
    if (case_id > 0) cfg.case_id = case_id;
    if (seed != 0) cfg.seed_base = seed;
    cfg = cfg.resolved();
    const sadvi::Method method = sadvi::method_from_string(method_name);
    const sadvi::ConjugateModel model = sadvi::conjugate_case(cfg.case_id, cfg.case5_as_variance);

    const auto t0 = std::chrono::steady_clock::now();
    const sadvi::CaseRunResult result = sadvi::run_replicates(cfg, model, method, jobs);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sadvi::write_run_outputs(out_dir, cfg, method, result, wall);

    std::printf("case %d (%s), method %s: %d replicates in %.1fs -> %s\n", cfg.case_id,
                model.name.c_str(), method_name.c_str(), cfg.train_replicates, wall,
                out_dir.c_str());
    for (const sadvi::AggregateCell& cell : sadvi::run_report(result.rows))
        std::printf("  x=%-6s n=%-3d rise %s (%s)  kl %s\n", cell.x_label.c_str(), cell.n,
                    sadvi::format_double(cell.rise_mean).c_str(),
                    cell.missing_sd ? "NA" : sadvi::format_double(cell.rise_sd).c_str(),
                    sadvi::format_double(cell.kl_mean).c_str());
    long skipped = 0;
    for (const long s : result.skipped_steps) skipped += s;
    if (skipped > 0) std::printf("  skipped steps: %ld\n", skipped);
    return 0;
}

int cmd_sweep(const std::string& config_path, int case_id, const std::string& method_name,
              const std::string& out_dir, std::uint64_t seed, const std::string& axis,
              const std::vector<std::string>& values) {
    sadvi::RunConfig cfg = load_config(config_path);
    if (case_id > 0) cfg.case_id = case_id;
    if (seed != 0) cfg.seed_base = seed;
    if (!sadvi::is_sweep_axis(axis)) throw sadvi::ConfigError("unknown sweep axis '" + axis + "'");
    const sadvi::Method method = sadvi::method_from_string(method_name);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<sadvi::SweepCell> cells = sadvi::sweep(cfg, method, axis, values);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sadvi::write_sweep_outputs(out_dir, cfg.resolved(), method, axis, cells, wall);
    std::printf("sweep over %s (%zu values) in %.1fs -> %s\n", axis.c_str(), values.size(), wall,
                out_dir.c_str());
    return 0;
}

int cmd_validate(const std::string& suite_name) {
    const sadvi::Suite suite = sadvi::suite_from_string(suite_name);
    const std::vector<sadvi::PropertyResult> results = sadvi::run_suite(suite);
    int failures = 0;
    for (const sadvi::PropertyResult& r : results) {
        std::printf("[%s] %-42s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu properties passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}

int cmd_project_rate(const std::string& out_dir, std::vector<int> degrees, std::vector<int> knots) {
    if (degrees.empty()) degrees = {3};
    if (knots.empty()) knots = {2, 4, 8, 16};
    const auto beta73 = [](double z) {
        if (z <= 0.0 || z >= 1.0) return 0.0;
        return std::exp(6.0 * std::log(z) + 2.0 * std::log(1.0 - z) -
                        (std::lgamma(7.0) + std::lgamma(3.0) - std::lgamma(10.0)));
    };
    const std::vector<sadvi::ProjectionCell> cells =
        sadvi::projection_rate_study(beta73, degrees, knots);
    std::string csv = "degree,H,l2_error,converged\n";
    for (const sadvi::ProjectionCell& c : cells) {
        csv += std::to_string(c.degree) + ',' + std::to_string(c.h) + ',' +
               sadvi::format_double(c.l2_error) + ',' + (c.converged ? "true" : "false") + '\n';
        std::printf("degree %d, H %-3d l2 error %-14s %s\n", c.degree, c.h,
                    sadvi::format_double(c.l2_error).c_str(),
                    c.converged ? "" : "(not converged)");
    }
    std::filesystem::create_directories(out_dir);
    sadvi::atomic_write_file(out_dir + "/projection_rate.csv", csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spline variational inference benchmark runner"};
    app.require_subcommand(1);

    std::string config_path, method_name = "sadvi", out_dir = "out", suite_name = "all";
    std::string axis;
    std::vector<std::string> values;
    std::vector<int> degrees, knots;
    int case_id = 0, jobs = 0;
    std::uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "train one case and evaluate against the posterior");
    run->add_option("--config", config_path, "config file (key = value)");
    run->add_option("--case", case_id, "conjugate case 1..5 (overrides config)");
    run->add_option("--method", method_name, "sadvi | gaussian | truncated-gaussian");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "base seed (overrides config)");
    run->add_option("--jobs", jobs, "worker count (0 = hardware)");

    CLI::App* sw = app.add_subcommand("sweep", "repeat a run across one hyperparameter axis");
    sw->add_option("--config", config_path, "config file (key = value)");
    sw->add_option("--case", case_id, "conjugate case 1..5 (overrides config)");
    sw->add_option("--method", method_name, "sadvi | gaussian | truncated-gaussian");
    sw->add_option("--out", out_dir, "output directory");
    sw->add_option("--seed", seed, "base seed (overrides config)");
    sw->add_option("--axis", axis, "obj.lambda | anneal.rate | obj.T | spline.H | anneal.kind")
        ->required();
    sw->add_option("--values", values, "axis values")->delimiter(',');

    CLI::App* va = app.add_subcommand("validate", "run the invariant suites");
    va->add_option("--suite", suite_name, "splines | sampler | gradients | models | all");

    CLI::App* pr = app.add_subcommand("project-rate", "spline approximation-rate study");
    pr->add_option("--out", out_dir, "output directory");
    pr->add_option("--degrees", degrees, "spline degrees")->delimiter(',');
    pr->add_option("--H", knots, "interior knot counts")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, case_id, method_name, out_dir, seed, jobs);
        if (sw->parsed()) return cmd_sweep(config_path, case_id, method_name, out_dir, seed, axis, values);
        if (va->parsed()) return cmd_validate(suite_name);
        if (pr->parsed()) return cmd_project_rate(out_dir, degrees, knots);
    } catch (const sadvi::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
