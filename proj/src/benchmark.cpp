#include "spva/benchmark.hpp"

#include "spva/error.hpp"
#include "spva/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

namespace spva {

void BenchConfig::validate() const
{
    scene.validate();
    occluder.validate(scene.frames);
    solver.validate();
    occlusion.validate();
    window.validate();
    prior.validate();
    if (!(corruption.sigma >= 0.0) || !std::isfinite(corruption.sigma))
        throw InvalidInput("bench.corruption.sigma must be >= 0 and finite");
    if (modes.empty() && gamma_sweep.empty())
        throw InvalidInput("bench: no configurations to run");
    for (double g : gamma_sweep)
        if (!(g >= 0.0) || !std::isfinite(g))
            throw InvalidInput("bench.gamma_sweep values must be >= 0 and finite");
    if (!gamma_sweep.empty() && sweep_mode == PriorMode::none)
        throw InvalidInput("bench.sweep_mode must name a prior mode");
    if (!scene.render)
        throw InvalidInput("bench needs rendered images for the occlusion analysis");
}

BenchInputs prepare_bench_inputs(const BenchConfig& config)
{
    config.validate();
    BenchInputs in;
    in.scene = generate_sheet_scene(config.scene);
    in.occluded = apply_occluder(in.scene, config.occluder, config.corruption);
    in.w = center_measurements(in.occluded.w_corrupt.data, in.scene.gt_w.reference_index);

    const auto flows = flows_from_tracks(in.scene, in.occluded.dense_tracks);
    in.tensor = occlusion_tensor(in.occluded.images, flows, in.scene.gt_w.reference_index,
                                 config.occlusion);
    in.ti = ti_series(in.tensor, &in.scene.mask);
    in.prior_window = select_prior_window(in.ti, config.window);

    in.init = rigid_init(in.w);
    in.weights_frame = build_weights(in.tensor, in.scene.mask, PriorMode::per_frame, config.weights);
    in.weights_pixel = build_weights(in.tensor, in.scene.mask, PriorMode::per_pixel, config.weights);
    in.prior = acquire_prior(in.w, &in.scene.mask, in.prior_window, in.weights_pixel.pixel_weights,
                             in.init, config.solver, config.prior);
    return in;
}

PriorSpec bench_prior_spec(const BenchInputs& inputs, PriorMode mode)
{
    switch (mode) {
    case PriorMode::none: return PriorSpec::none();
    case PriorMode::per_sequence: return PriorSpec::per_sequence(inputs.prior.aligned_prior);
    case PriorMode::per_frame:
        return PriorSpec::per_frame(inputs.prior.aligned_prior, inputs.weights_frame.frame_weights);
    case PriorMode::per_pixel:
        return PriorSpec::per_pixel_from_frame_map(inputs.prior.aligned_prior,
                                                   inputs.weights_pixel.pixel_weights);
    }
    throw InvalidInput("unknown prior mode");
}

bool energy_nonincreasing(const std::vector<std::pair<int, double>>& trace, double slack)
{
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double prev = trace[i - 1].second, next = trace[i].second;
        if (!std::isfinite(next) || next > prev + slack * std::abs(prev))
            return false;
    }
    return true;
}

namespace {

struct Job {
    std::string configuration;
    PriorMode mode;
    double gamma;
};

BenchRow run_job(const Job& job, const BenchInputs& in, const SolverParams& base, int first, int last)
{
    SolverParams params = base;
    params.gamma = job.mode == PriorMode::none ? 0.0 : job.gamma;
    const Initialization init{in.init.poses, in.init.shapes};

    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult r = solve(in.w, bench_prior_spec(in, job.mode), &in.scene.mask, params, init);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    BenchRow row;
    row.configuration = job.configuration;
    row.mode = job.mode;
    row.gamma = params.gamma;
    const RmsReport aligned = mean_rms(r.shape, in.scene.gt_shapes, Alignment::procrustes_reflection);
    const RmsReport raw = mean_rms(r.shape, in.scene.gt_shapes, Alignment::none);
    row.e3d_whole = aligned.e3d;
    row.e3d_whole_unaligned = raw.e3d;
    if (first <= last) {
        row.e3d_occluded = mean_over_frames(aligned.per_frame, first, last);
        row.e3d_occluded_unaligned = mean_over_frames(raw.per_frame, first, last);
    }
    row.seconds = seconds;
    row.outer_iterations = r.iterations.outer;
    row.converged = r.converged;
    row.energy_trace = r.energy_trace;
    row.energy_nonincreasing = energy_nonincreasing(r.energy_trace);
    return row;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& config)
{
    const BenchInputs in = prepare_bench_inputs(config);

    BenchReport report;
    report.prior_window = in.prior_window;
    report.occluded_first = std::max(1, config.occluder.first_frame);
    report.occluded_last = std::min(config.scene.frames, config.occluder.last_frame);
    report.rigid_e3d = mean_rms(in.init.shapes, in.scene.gt_shapes, Alignment::procrustes_reflection).e3d;
    report.prior_e3d = mean_rms(in.prior.aligned_prior, in.scene.gt_shapes, Alignment::procrustes_reflection).e3d;
    report.warning = in.occluded.warning;
    report.timings_reliable = !config.parallel;

    std::vector<Job> jobs;
    for (PriorMode m : config.modes)
        jobs.push_back({m == PriorMode::none ? "baseline" : "spva", m, config.solver.gamma});
    for (double g : config.gamma_sweep)
        jobs.push_back({"sweep", config.sweep_mode, g});

    const int first = report.occluded_first, last = report.occluded_last;
    if (config.parallel) {
        std::vector<std::future<BenchRow>> futures;
        for (const Job& job : jobs)
            futures.push_back(std::async(std::launch::async, [&, job] {
                return run_job(job, in, config.solver, first, last);
            }));
        for (auto& f : futures)
            report.rows.push_back(f.get());
    } else {
        for (const Job& job : jobs)
            report.rows.push_back(run_job(job, in, config.solver, first, last));
    }
    return report;
}

std::string BenchReport::csv() const
{
    using io::format_double;
    io::CsvWriter csv({"configuration", "gamma", "mode", "e3D_whole", "e3D_occluded", "seconds",
                       "e3D_whole_unaligned", "e3D_occluded_unaligned", "outer_iterations",
                       "converged", "energy_nonincreasing"});
    for (const BenchRow& r : rows)
        csv.row({r.configuration, format_double(r.gamma), to_string(r.mode),
                 format_double(r.e3d_whole), format_double(r.e3d_occluded),
                 format_double(r.seconds), format_double(r.e3d_whole_unaligned),
                 format_double(r.e3d_occluded_unaligned), std::to_string(r.outer_iterations),
                 r.converged ? "1" : "0", r.energy_nonincreasing ? "1" : "0"});
    return csv.str();
}

std::string BenchReport::summary() const
{
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << "prior window F_sp = " << prior_window << "\n";
    out << "occluded frames " << occluded_first << ".." << occluded_last << "\n";
    out << "rigid initialization e3D = " << rigid_e3d << "\n";
    out << "aligned prior e3D = " << prior_e3d << "\n";
    if (!warning.empty())
        out << "warning: " << warning << "\n";
    if (!timings_reliable)
        out << "configurations ran concurrently; timings are unreliable\n";
    out << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %-13s %10s %10s %10s %8s\n", "config", "mode", "gamma",
                  "whole", "occluded", "seconds");
    out << line;
    for (const BenchRow& r : rows) {
        std::snprintf(line, sizeof(line), "%-10s %-13s %10.3g %10.5f %10.5f %8.2f%s\n",
                      r.configuration.c_str(), to_string(r.mode).c_str(), r.gamma, r.e3d_whole,
                      r.e3d_occluded, r.seconds, r.energy_nonincreasing ? "" : "  energy increased");
        out << line;
    }
    return out.str();
}

}  // namespace spva
