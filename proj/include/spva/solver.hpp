#pragma once

#include "spva/factorization.hpp"
#include "spva/tv.hpp"
#include "spva/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spva {

struct SolverParams {
    double lambda = 1e4;    // data term weight
    double gamma = 5e4;     // shape prior weight
    double tau = 1e4;       // nuclear norm weight
    double theta = 1e-5;    // proximal coupling
    double sigma_dual = 1.0;
    int max_outer = 30;
    int max_pd = 100;
    int max_si = 20;
    double tol_outer = 1e-6;
    double tol_pd = 1e-5;
    double tol_si = 1e-5;
    bool tv_enabled = true;

    /// Soft-impute threshold; always theta * tau.
    double eta() const { return theta * tau; }

    /// Throws InvalidInput naming the offending field.
    void validate() const;
};

enum class PriorMode { none, per_sequence, per_frame, per_pixel };

std::string to_string(PriorMode mode);
PriorMode prior_mode_from_string(const std::string& name);

/// Shape prior and its weighting. Weights are the diagonal of Gamma^T Gamma,
/// i.e. they enter the normal equations as given.
struct PriorSpec {
    PriorMode mode = PriorMode::none;
    ShapeSequence s_prior;
    Vector frame_weights;  // F, per_frame
    Matrix pixel_weights;  // 3F x N, per_pixel

    static PriorSpec none();
    static PriorSpec per_sequence(ShapeSequence prior);
    static PriorSpec per_frame(ShapeSequence prior, Vector weights);
    static PriorSpec per_pixel(ShapeSequence prior, Matrix weights_3f_by_n);
    /// Expands F x N per-pixel weights to 3F x N by repeating each row 3 times.
    static PriorSpec per_pixel_from_frame_map(ShapeSequence prior, const Matrix& weights_f_by_n);

    /// Dense 3F x N weight matrix for any mode (zeros in mode none).
    Matrix dense_weights(Index frames, Index points) const;

    void validate(Index frames, Index points) const;
};

struct EnergyTerms {
    double data = 0.0;     // (lambda/2) ||W - R S||^2
    double prior = 0.0;    // (gamma/2) sum w (S - S_prior)^2
    double tv = 0.0;       // sum ||grad S||
    double nuclear = 0.0;  // tau ||P(S)||_*
    double total() const { return data + prior + tv + nuclear; }
};

EnergyTerms energy_terms(const MeasurementMatrix& w, const CameraPoseSet& poses,
                         const ShapeSequence& s, const PriorSpec& prior,
                         const PixelGridMask* mask, const SolverParams& params);

double energy(const MeasurementMatrix& w, const CameraPoseSet& poses, const ShapeSequence& s,
              const PriorSpec& prior, const PixelGridMask* mask, const SolverParams& params);

/// Exact minimizer of the smooth part of the primal-dual subproblem:
/// (lambda R^T R + gamma Gamma + I/theta) S = lambda R^T W + S_bar/theta
///                                            + gamma Gamma S_prior - D_q,
/// solved per frame (scalar weights) or per frame and point (pixel weights).
ShapeSequence primal_step(const MeasurementMatrix& w, const CameraPoseSet& poses,
                          const ShapeSequence& s_bar, const Matrix& dq,
                          const PriorSpec& prior, const SolverParams& params);

/// Singular value shrinkage of an F x 3N matrix by eta.
Matrix soft_impute_step(const Matrix& b, double eta);

/// Called after every dual update with (soft-impute iteration, primal-dual
/// iteration, dual field). Used for instrumentation.
using DualObserver = std::function<void(int, int, const DualField&)>;

struct ShapeStepResult {
    ShapeSequence shape;
    ShapeSequence shape_bar;
    int soft_impute_iterations = 0;
    int primal_dual_iterations = 0;
};

ShapeStepResult shape_step(const MeasurementMatrix& w, const CameraPoseSet& poses,
                           const ShapeSequence& s_init, const PriorSpec& prior,
                           const PixelGridMask* mask, const SolverParams& params,
                           const DualObserver& observer = {});

struct IterationCounts {
    int outer = 0;
    int soft_impute = 0;
    int primal_dual = 0;
};

struct SolveResult {
    ShapeSequence shape;
    CameraPoseSet poses;
    std::vector<std::pair<int, double>> energy_trace;
    bool converged = false;
    IterationCounts iterations;
};

struct Initialization {
    CameraPoseSet poses;
    ShapeSequence shape;
};

/// Alternating convex search: rotation step, then the shape step, until
/// the relative energy change drops below tol_outer or max_outer is hit.
/// Without `init` the rigid factorization seeds both blocks.
SolveResult solve(const MeasurementMatrix& w, const PriorSpec& prior, const PixelGridMask* mask,
                  const SolverParams& params, const std::optional<Initialization>& init = {},
                  const DualObserver& observer = {});

}  // namespace spva
