#pragma once

#include "spva/types.hpp"

namespace spva {

/// Removes each frame's 2D centroid. Throws InvalidInput on non-finite
/// entries or malformed shapes, DegenerateError when N < 3.
MeasurementMatrix center_measurements(const Matrix& w_raw, int reference_index = 1);

struct RigidFactorization {
    CameraPoseSet poses;
    ShapeSequence shapes;  // rigid shape replicated per frame
    Vector3 leading_singular_values;
};

/// Rank-3 orthographic factorization with metric upgrade. The symmetric
/// metric matrix Q = G G^T is solved by least squares over the constraints
/// M_f Q M_f^T = I_2; non-PSD estimates are repaired by clamping eigenvalues.
RigidFactorization rigid_init(const MeasurementMatrix& w);

/// Least-squares shape shared by all frames for fixed cameras. Throws
/// DegenerateError when the cameras leave depth unobservable.
Matrix3X fit_rigid_shape(const MeasurementMatrix& w, const CameraPoseSet& poses);

struct RotationOptions {
    /// Upper bound on cond(S_f S_f^T) before a frame is declared degenerate.
    double condition_cap = 1e12;
    /// Monotone majorize-minimize polishing sweeps applied after the
    /// closed-form least-squares-then-project estimate. 0 disables.
    int refine_iterations = 10;
};

/// Closed-form rotation step: A_f^T = W_f S_f^T (S_f S_f^T)^{-1} projected onto
/// matrices with orthonormal rows. When `seed` is given, the result never has
/// a larger per-frame data term than the seed poses.
CameraPoseSet estimate_rotations(const MeasurementMatrix& w, const ShapeSequence& s,
                                 const CameraPoseSet* seed = nullptr,
                                 const RotationOptions& options = {});

/// Fills full3x3 from rows2x3: rows orthonormalized, third row = r1 x r2.
CameraPoseSet complete_rotations(const CameraPoseSet& poses);

/// Builds a pose set from 2 x 3 rows only.
CameraPoseSet poses_from_rows(std::vector<Matrix23> rows);

/// sum_f ||W_f - R_f S_f||_F^2 (unweighted data term).
double data_term(const MeasurementMatrix& w, const CameraPoseSet& poses,
                 const ShapeSequence& s);

double frame_data_term(const MeasurementMatrix& w, const Matrix23& r,
                       const ShapeSequence& s, Index f);

}  // namespace spva
