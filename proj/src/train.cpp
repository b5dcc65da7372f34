#include "sadvi/train.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace sadvi {

Method method_from_string(const std::string& s) {
    if (s == "sadvi") return Method::sadvi;
    if (s == "gaussian") return Method::gaussian;
    if (s == "truncated-gaussian") return Method::truncated_gaussian;
    throw ConfigError("unknown method '" + s + "' (expected sadvi, gaussian or truncated-gaussian)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::sadvi: return "sadvi";
        case Method::gaussian: return "gaussian";
        default: return "truncated-gaussian";
    }
}

std::vector<std::optional<Interval>> truncation_for(Method method, const ConjugateModel& model) {
    if (method == Method::truncated_gaussian &&
        (std::isfinite(model.support.lo) || std::isfinite(model.support.hi)))
        return {model.support};
    return {std::nullopt};
}

namespace {

struct FittedDensity {
    std::function<double(double)> pdf;
    double lo, hi;  // effective support used to widen the evaluation grid
};

FittedDensity fitted_density(Method method, const Encoder::PlainOutputs& out,
                             const SplineSpace& space,
                             const std::vector<std::optional<Interval>>& trunc) {
    if (method == Method::sadvi) {
        const double mu = out.mu[0], sigma = out.sigma[0];
        return {spline_posterior_pdf(mu, sigma, out.gamma[0], space), mu, mu + sigma};
    }
    const double m = out.mu[0], s = out.sigma[0];
    double lo = m - 8.0 * s, hi = m + 8.0 * s;
    if (trunc[0]) {
        if (std::isfinite(trunc[0]->lo)) lo = std::fmax(trunc[0]->lo, lo);
        if (std::isfinite(trunc[0]->hi)) hi = std::fmin(trunc[0]->hi, hi);
        lo = std::fmin(lo, hi);  // degenerate fits still yield a valid interval
    }
    return {gaussian_posterior_pdf(m, s, trunc[0]), lo, hi};
}

}  // namespace

TrainResult train_case(const RunConfig& raw_cfg, const ConjugateModel& model, Method method,
                       std::uint64_t seed) {
    const auto t_start = std::chrono::steady_clock::now();
    const RunConfig cfg = raw_cfg.resolved();
    if (cfg.case_id != model.id) throw ConfigError("config case.id does not match the model");

    RngStream root(seed);
    RngStream data_rng = root.fork(rng_tag::data);
    Dataset data = generate_dataset(model, cfg.case_n, data_rng);

    const SplineSpace space = make_equispaced_space(cfg.spline_degree, cfg.spline_h);
    const PenaltyMatrix penalty = space.penalty_matrix();
    const AnnealingSchedule schedule = cfg.annealing();
    const auto trunc = truncation_for(method, model);

    RngStream init_rng = cfg.net_seed != 0 ? RngStream(cfg.net_seed) : root.fork(rng_tag::init);
    const int mixture_k = method == Method::sadvi ? space.basis_count() : 0;
    Encoder encoder(1, cfg.net_hidden, cfg.latent_j, mixture_k, init_rng);

    ObjectiveConfig obj_cfg;
    obj_cfg.t = cfg.obj_t;
    obj_cfg.lambda = cfg.obj_lambda;
    obj_cfg.kappa = cfg.obj_kappa;

    Adam adam(encoder.params().size(), cfg.opt_lr);
    BasisSamplerBank bank(space, cfg.latent_j, MhChainConfig{cfg.mh_burn_in, cfg.mh_thin});
    RngStream train_rng = root.fork(rng_tag::train);

    std::vector<double> objective_trace;
    long total_steps = 0, degenerate_steps = 0;
    std::vector<int> order(data.x.size());
    std::iota(order.begin(), order.end(), 0);

    Tape tape(1 << 20);
    std::vector<double> grads(encoder.params().size());

    for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
        adam.set_lr(cfg.opt_lr * std::pow(cfg.opt_decay, epoch));
        const double temperature = schedule.at(epoch);
        train_rng.shuffle(order);
        double epoch_objective = 0.0;
        long epoch_examples = 0;

        for (std::size_t begin = 0; begin < order.size(); begin += cfg.train_batch) {
            const std::size_t end = std::min(order.size(), begin + cfg.train_batch);
            ++total_steps;
            tape.clear();
            const std::vector<Value> leaves = encoder.make_leaves(tape);
            Value total = tape.constant(0.0);
            bool step_ok = true;
            try {
                for (std::size_t i = begin; i < end && step_ok; ++i) {
                    const double x = data.x[order[i]];
                    const Encoder::Outputs outs = encoder.forward(tape, leaves, x);
                    std::optional<Value> obj;
                    if (method == Method::sadvi)
                        obj = sadvi_example_objective(tape, outs, model, x, obj_cfg, temperature,
                                                      space, penalty, &bank, &train_rng);
                    else
                        obj = gaussian_advi_objective(tape, outs, model, x, obj_cfg, trunc,
                                                      &train_rng);
                    if (!obj) {
                        step_ok = false;  // every importance sample vanished
                        break;
                    }
                    total = total + *obj;
                }
            } catch (const TrainingStepError&) {
                step_ok = false;
            }
            if (!step_ok || !std::isfinite(total.val())) {
                ++degenerate_steps;
                continue;
            }
            const std::vector<double>& adj = tape.backward(total);
            for (std::size_t i = 0; i < grads.size(); ++i) grads[i] = -adj[i];  // maximize
            adam.step(encoder.params(), grads);
            epoch_objective += total.val();
            epoch_examples += static_cast<long>(end - begin);
        }
        objective_trace.push_back(epoch_examples > 0 ? epoch_objective / epoch_examples : kNegInf);
    }

    // post-training evaluation at the probe observations
    std::vector<EvalRow> rows;
    for (const double x : model.probe_x) {
        const Encoder::PlainOutputs out = encoder.forward_values(x);
        const FittedDensity q = fitted_density(method, out, space, trunc);
        const EvalGrid grid = make_eval_grid(model, x, q.lo, q.hi, cfg.eval_grid_n);
        const auto p = model.posterior_pdf(x);
        EvalRow row;
        row.case_id = cfg.case_id;
        row.method = to_string(method);
        row.x = x;
        row.seed = seed;
        row.h = cfg.spline_h;
        row.degree = cfg.spline_degree;
        row.t = cfg.obj_t;
        row.lambda = cfg.obj_lambda;
        row.rise = rise(q.pdf, p, grid);
        row.kl = kl_estimate(q.pdf, p, grid);
        rows.push_back(row);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    for (EvalRow& row : rows) row.runtime_s = wall;

    const long skipped = degenerate_steps + adam.skipped();
    return TrainResult{.rows = std::move(rows),
                       .objective_trace = std::move(objective_trace),
                       .skipped_steps = skipped,
                       .total_steps = total_steps,
                       .unstable = total_steps > 0 && skipped * 10 > total_steps,
                       .runtime_s = wall,
                       .encoder = std::move(encoder),
                       .dataset = std::move(data)};
}

CaseRunResult run_replicates(const RunConfig& raw_cfg, const ConjugateModel& model, Method method,
                             int jobs) {
    const RunConfig cfg = raw_cfg.resolved();
    const int reps = cfg.train_replicates;
    if (jobs <= 0) jobs = cfg.train_jobs;
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs <= 0) jobs = 1;
    jobs = std::min(jobs, reps);

    std::vector<std::optional<TrainResult>> slots(reps);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= reps) return;
            slots[static_cast<std::size_t>(i)] = train_case(cfg, model, method, cfg.seed_base + i);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    CaseRunResult out;
    for (int i = 0; i < reps; ++i) {
        TrainResult& r = *slots[static_cast<std::size_t>(i)];
        out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
        out.traces.push_back(std::move(r.objective_trace));
        out.seeds.push_back(cfg.seed_base + i);
        out.skipped_steps.push_back(r.skipped_steps);
        out.unstable.push_back(r.unstable);
        out.datasets.push_back(std::move(r.dataset));
    }
    return out;
}

std::uint64_t determinism_hash(const std::vector<EvalRow>& rows) {
    std::string s;
    for (const EvalRow& r : rows) {
        s += std::to_string(r.case_id) + ',' + r.method + ',' + format_double(r.x) + ',' +
             std::to_string(r.seed) + ',' + std::to_string(r.h) + ',' + std::to_string(r.degree) +
             ',' + std::to_string(r.t) + ',' + format_double(r.lambda) + ',' +
             format_double(r.rise) + ',' + format_double(r.kl) + '\n';
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool is_sweep_axis(const std::string& axis) {
    return axis == "obj.lambda" || axis == "anneal.rate" || axis == "obj.T" ||
           axis == "spline.H" || axis == "anneal.kind";
}

RunConfig apply_axis_value(const RunConfig& cfg, const std::string& axis,
                           const std::string& value) {
    // reuse the strict parser so types and ranges are validated uniformly
    if (!is_sweep_axis(axis)) throw ConfigError("unknown sweep axis '" + axis + "'");
    RunConfig base = cfg;
    const std::string patch = base.serialize() + axis + " = " + value + "\n";
    return RunConfig::parse(patch);
}

std::vector<SweepCell> sweep(const RunConfig& cfg, Method method, const std::string& axis,
                             const std::vector<std::string>& values) {
    std::vector<SweepCell> cells;
    for (const std::string& v : values) {
        const RunConfig cell_cfg = apply_axis_value(cfg, axis, v).resolved();
        const ConjugateModel model = conjugate_case(cell_cfg.case_id, cell_cfg.case5_as_variance);
        cells.push_back(SweepCell{v, run_replicates(cell_cfg, model, method, 0)});
    }
    return cells;
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

namespace {

nlohmann::json config_json(const RunConfig& cfg) {
    nlohmann::json j;
    std::istringstream in(cfg.serialize());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

std::string trace_csv(const CaseRunResult& result) {
    std::string out = "epoch,replicate,objective\n";
    for (std::size_t rep = 0; rep < result.traces.size(); ++rep)
        for (std::size_t e = 0; e < result.traces[rep].size(); ++e)
            out += std::to_string(e) + ',' + std::to_string(rep) + ',' +
                   format_double(result.traces[rep][e]) + '\n';
    return out;
}

std::string dataset_csv(const CaseRunResult& result) {
    std::string out = "replicate,index,x,z\n";
    for (std::size_t rep = 0; rep < result.datasets.size(); ++rep) {
        const Dataset& d = result.datasets[rep];
        for (std::size_t i = 0; i < d.x.size(); ++i)
            out += std::to_string(rep) + ',' + std::to_string(i) + ',' + format_double(d.x[i]) +
                   ',' + format_double(d.z[i]) + '\n';
    }
    return out;
}

nlohmann::json manifest_json(const RunConfig& cfg, Method method, const CaseRunResult& result,
                             double wall_clock_s, bool final_pass,
                             const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["config_hash"] = cfg.content_hash();
    j["case"] = cfg.case_id;
    j["method"] = to_string(method);
    j["seeds"] = result.seeds;
    j["outputs"] = outputs;
    if (final_pass) {
        j["wall_clock_s"] = wall_clock_s;
        j["skipped_steps"] = result.skipped_steps;
        j["unstable"] = result.unstable;
        j["objective_trace"] = result.traces;
    } else {
        j["wall_clock_s"] = nullptr;
    }
    return j;
}

}  // namespace

void write_run_outputs(const std::string& out_dir, const RunConfig& raw_cfg, Method method,
                       const CaseRunResult& result, double wall_clock_s) {
    const RunConfig cfg = raw_cfg.resolved();
    std::filesystem::create_directories(out_dir);
    const std::vector<std::string> outputs = {"results.csv", "trace.csv", "dataset.csv",
                                              "summary.csv"};
    const std::string manifest_path = out_dir + "/manifest.json";
    atomic_write_file(manifest_path,
                      manifest_json(cfg, method, result, 0.0, false, outputs).dump(2) + "\n");
    atomic_write_file(out_dir + "/results.csv", results_csv(result.rows));
    atomic_write_file(out_dir + "/trace.csv", trace_csv(result));
    atomic_write_file(out_dir + "/dataset.csv", dataset_csv(result));
    atomic_write_file(out_dir + "/summary.csv", summary_csv(run_report(result.rows)));
    atomic_write_file(manifest_path,
                      manifest_json(cfg, method, result, wall_clock_s, true, outputs).dump(2) + "\n");
}

void write_sweep_outputs(const std::string& out_dir, const RunConfig& raw_cfg, Method method,
                         const std::string& axis, const std::vector<SweepCell>& cells,
                         double wall_clock_s) {
    const RunConfig cfg = raw_cfg.resolved();
    std::filesystem::create_directories(out_dir);
    std::string csv = "case,method,x,seed,H,degree,T,lambda,rise,kl,runtime_s," + axis + "\n";
    for (const SweepCell& cell : cells) {
        const std::string body = results_csv(cell.result.rows);
        std::istringstream in(body);
        std::string line;
        std::getline(in, line);  // drop the inner header
        while (std::getline(in, line)) csv += line + ',' + cell.value + '\n';
    }
    atomic_write_file(out_dir + "/sweep_results.csv", csv);

    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["config_hash"] = cfg.content_hash();
    j["method"] = to_string(method);
    j["axis"] = axis;
    nlohmann::json values = nlohmann::json::array();
    for (const SweepCell& cell : cells) values.push_back(cell.value);
    j["values"] = values;
    j["wall_clock_s"] = wall_clock_s;
    atomic_write_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

}  // namespace sadvi
