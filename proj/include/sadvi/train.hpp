#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sadvi/config.hpp"
#include "sadvi/encoder.hpp"
#include "sadvi/evaluation.hpp"
#include "sadvi/models.hpp"
#include "sadvi/objectives.hpp"

namespace sadvi {

enum class Method { sadvi, gaussian, truncated_gaussian };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

// Truncation intervals used by the gaussian families: the true posterior's
// support for the truncated variant (a no-op for unbounded supports), none
// for the plain variant.
std::vector<std::optional<Interval>> truncation_for(Method method, const ConjugateModel& model);

struct TrainResult {
    std::vector<EvalRow> rows;            // one row per probe x
    std::vector<double> objective_trace;  // per-epoch mean objective
    long skipped_steps = 0;
    long total_steps = 0;
    bool unstable = false;  // skipped > 10% of steps
    double runtime_s = 0.0;
    Encoder encoder;  // trained parameters, for bound diagnostics
    Dataset dataset;
};

// Full training loop for one replicate: per epoch anneal the temperature,
// shuffle, and for each minibatch build the objective tape and take one Adam
// step on the summed per-example objectives; then evaluate RISE/KL against
// the exact posterior at the case's probe points.
TrainResult train_case(const RunConfig& cfg, const ConjugateModel& model, Method method,
                       std::uint64_t seed);

struct CaseRunResult {
    std::vector<EvalRow> rows;  // replicate-major, probe-minor
    std::vector<std::vector<double>> traces;
    std::vector<std::uint64_t> seeds;
    std::vector<long> skipped_steps;
    std::vector<bool> unstable;
    std::vector<Dataset> datasets;
};

// Replicates at seeds seed.base + 0 .. seed.base + (replicates-1), run on a
// small worker pool; results land in per-replicate slots so the output is
// identical for any job count.
CaseRunResult run_replicates(const RunConfig& cfg, const ConjugateModel& model, Method method,
                             int jobs);

// Hash of the results rows with the runtime_s column excluded; wall-clock is
// the one field that legitimately differs between reruns.
std::uint64_t determinism_hash(const std::vector<EvalRow>& rows);

struct SweepCell {
    std::string value;
    CaseRunResult result;
};

// One replicate batch per axis value, sharing the base seed offsets. Valid
// axes: obj.lambda, anneal.rate, obj.T, spline.H, anneal.kind.
std::vector<SweepCell> sweep(const RunConfig& cfg, Method method, const std::string& axis,
                             const std::vector<std::string>& values);

bool is_sweep_axis(const std::string& axis);

RunConfig apply_axis_value(const RunConfig& cfg, const std::string& axis,
                           const std::string& value);

// Write manifest.json, results.csv, trace.csv, dataset.csv and summary.csv
// under out_dir. The manifest is written atomically before the results, then
// finalized with timing and traces.
void write_run_outputs(const std::string& out_dir, const RunConfig& cfg, Method method,
                       const CaseRunResult& result, double wall_clock_s);

void write_sweep_outputs(const std::string& out_dir, const RunConfig& cfg, Method method,
                         const std::string& axis, const std::vector<SweepCell>& cells,
                         double wall_clock_s);

void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace sadvi
