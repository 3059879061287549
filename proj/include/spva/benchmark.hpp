#pragma once

#include "spva/factorization.hpp"
#include "spva/occlusion.hpp"
#include "spva/shape_prior.hpp"
#include "spva/solver.hpp"
#include "spva/synth.hpp"

#include <string>
#include <utility>
#include <vector>

namespace spva {

struct BenchConfig {
    SheetSceneConfig scene;
    OccluderSpec occluder;
    CorruptionSpec corruption;
    SolverParams solver;
    OcclusionParams occlusion;
    WindowParams window;
    WeightOptions weights;
    PriorOptions prior;
    /// Configurations run at solver.gamma (mode none runs at gamma = 0).
    std::vector<PriorMode> modes{PriorMode::none, PriorMode::per_sequence, PriorMode::per_frame,
                                 PriorMode::per_pixel};
    std::vector<double> gamma_sweep{0.0, 1e2, 1e3, 1e4, 1e6, 1e9};
    PriorMode sweep_mode = PriorMode::per_sequence;
    /// Run configurations concurrently; timings are then marked unreliable.
    bool parallel = false;

    void validate() const;
};

/// Everything the configurations share: scene, corruption, occlusion
/// analysis, rigid initialization and the acquired prior.
struct BenchInputs {
    SyntheticScene scene;
    OccludedScene occluded;
    MeasurementMatrix w;  // centred corrupted measurements
    OcclusionTensor tensor;
    TiSeries ti;
    int prior_window = 0;
    RigidFactorization init;
    PriorEstimate prior;
    PriorWeights weights_frame;
    PriorWeights weights_pixel;
};

BenchInputs prepare_bench_inputs(const BenchConfig& config);

/// Prior specification for `mode` from the shared inputs.
PriorSpec bench_prior_spec(const BenchInputs& inputs, PriorMode mode);

struct BenchRow {
    std::string configuration;  // "baseline", "spva" or "sweep"
    PriorMode mode = PriorMode::none;
    double gamma = 0.0;
    double e3d_whole = 0.0;      // after the global similarity fit (reflection allowed)
    double e3d_occluded = 0.0;
    double e3d_whole_unaligned = 0.0;
    double e3d_occluded_unaligned = 0.0;
    double seconds = 0.0;
    int outer_iterations = 0;
    bool converged = false;
    bool energy_nonincreasing = false;
    std::vector<std::pair<int, double>> energy_trace;
};

struct BenchReport {
    int prior_window = 0;
    int occluded_first = 0;  // 1-based inclusive range used for the occluded split
    int occluded_last = 0;
    double rigid_e3d = 0.0;
    double prior_e3d = 0.0;
    bool timings_reliable = true;
    std::string warning;
    std::vector<BenchRow> rows;

    /// configuration,gamma,mode,e3D_whole,e3D_occluded,seconds plus the
    /// unaligned errors and solver diagnostics.
    std::string csv() const;
    std::string summary() const;
};

/// Outer energy trace nonincreasing within slack * |energy|.
bool energy_nonincreasing(const std::vector<std::pair<int, double>>& trace, double slack = 1e-6);

BenchReport run_benchmark(const BenchConfig& config);

}  // namespace spva
