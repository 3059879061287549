#pragma once

#include "spva/types.hpp"

#include <vector>

namespace spva {

/// y ~ scale * rotation * x + translation.
struct Similarity {
    Matrix3 rotation = Matrix3::Identity();
    double scale = 1.0;
    Vector3 translation = Vector3::Zero();

    Matrix3X apply(const Matrix3X& points) const;
};

struct ProcrustesOptions {
    bool estimate_scale = true;
    /// Allow det(rotation) = -1. Off for shape-prior alignment, on for
    /// gauge fixing during evaluation.
    bool allow_reflection = false;
};

/// Closed-form similarity fit on the selected columns (all columns when
/// `samples` is empty) via the centered cross-covariance SVD with the
/// determinant sign correction. Throws DegenerateError for fewer than 4
/// samples or collinear source points.
Similarity procrustes_align(const Matrix3X& source, const Matrix3X& target,
                            const std::vector<Index>& samples = {},
                            const ProcrustesOptions& options = {});

}  // namespace spva
