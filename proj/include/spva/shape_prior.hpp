#pragma once

#include "spva/factorization.hpp"
#include "spva/procrustes.hpp"
#include "spva/solver.hpp"
#include "spva/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spva {

/// How prior frames after the clean window are filled.
enum class ExtensionPolicy { mean, hold };

std::string to_string(ExtensionPolicy p);
ExtensionPolicy extension_policy_from_string(const std::string& name);

/// Initialization of the window solve: a rigid factorization of the window
/// itself, the sequence-wide one restricted to the window frames, or the
/// sequence-wide cameras with a rigid shape refitted to the window.
enum class WindowSeed { window_rigid, sequence_rigid, sequence_poses };

std::string to_string(WindowSeed s);
WindowSeed window_seed_from_string(const std::string& name);

struct PriorOptions {
    int min_window = 5;
    ExtensionPolicy policy = ExtensionPolicy::mean;
    WindowSeed seed = WindowSeed::sequence_poses;
    /// Similarity with scale; false gives a rigid (rotation + translation) fit.
    bool estimate_scale = true;
    /// Mirror the window reconstruction in depth when that fits the
    /// initialization better than any proper rotation.
    bool resolve_mirror = true;
    int min_anchors = 15;
    int max_anchors = 20;

    void validate() const;
};

struct PriorEstimate {
    int window = 0;
    ShapeSequence shapes_window;  // raw window reconstruction
    ShapeSequence aligned_prior;  // 3F x N
    Similarity similarity;
    bool mirrored = false;
    std::vector<Index> anchor_points;
};

/// Window reconstruction without a prior (the gamma = 0 solver).
ShapeSequence estimate_prior_window(const MeasurementMatrix& w_window, const PixelGridMask* mask,
                                    const SolverParams& params, int min_window = 5,
                                    const std::optional<Initialization>& init = {});

/// Points used for the alignment: those with zero weight in every window
/// frame, or the min_anchors lowest-weight points when there are too few,
/// then thinned to max_anchors spread uniformly over the image (a lattice
/// over the candidates' bounding box with a mask, an index stride without).
/// `weights` is F x N and may be empty, meaning no occlusion evidence.
std::vector<Index> select_anchor_points(const Matrix& weights, Index points, int window,
                                        const PixelGridMask* mask = nullptr,
                                        int min_anchors = 15, int max_anchors = 20);

struct WindowAlignment {
    Similarity similarity;
    bool mirrored = false;
    ShapeSequence aligned;  // window shapes mapped into the target gauge
};

/// Fits a similarity from the first window frame to `target` on the anchor
/// points and applies it to every window frame.
WindowAlignment align_window(const ShapeSequence& window_shapes, const Matrix3X& target,
                             const std::vector<Index>& anchors, const PriorOptions& options = {});

/// Fills all F frames: the aligned window first, then per `policy`.
ShapeSequence build_full_prior(const ShapeSequence& aligned_window, Index frames,
                               ExtensionPolicy policy);

/// Window solve, anchor selection, alignment to frame 1 of the rigid
/// initialization and extension to the full sequence.
PriorEstimate acquire_prior(const MeasurementMatrix& w, const PixelGridMask* mask, int window,
                            const Matrix& occlusion_weights, const RigidFactorization& init,
                            const SolverParams& params, const PriorOptions& options = {});

}  // namespace spva
