#pragma once

#include "spva/types.hpp"

namespace spva {

/// Forward differences of every row of a 3F x N field over the mask grid.
/// Differences that would leave the mask are zero (Neumann boundary).
struct GradientField {
    Matrix du;  // 3F x N, x+1 neighbour minus self
    Matrix dv;  // 3F x N, y+1 neighbour minus self
};

GradientField gradient_field(const Matrix& s, const PixelGridMask& mask);

/// Adjoint of gradient_field: <grad S, q> = <S, grad^* q>, grad^* = -div.
Matrix gradient_adjoint(const Matrix& qu, const Matrix& qv, const PixelGridMask& mask);

/// Isotropic TV: sum over (f, i, p) of ||grad S_f^i(p)||_2.
double total_variation(const Matrix& s, const PixelGridMask& mask);

/// Dual variable of the TV term. Each (qu(r, p), qv(r, p)) pair lies in the
/// closed unit disc; dq caches grad^* q.
struct DualField {
    Matrix qu;
    Matrix qv;
    Matrix dq;

    static DualField zero(Index rows, Index cols);

    /// max over entries of ||q_f^i(p)||_2.
    double max_norm() const;
};

/// q <- (q + sigma grad S) / max(1, ||q + sigma grad S||), then dq = grad^* q.
DualField dual_update(const DualField& q, const Matrix& s, double sigma,
                      const PixelGridMask& mask);

}  // namespace spva
