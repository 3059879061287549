#include "spva/tv.hpp"

#include "spva/error.hpp"

#include <algorithm>
#include <cmath>

namespace spva {

namespace {

void check_mask(const Matrix& s, const PixelGridMask& mask)
{
    if (s.cols() != mask.points())
        throw InvalidInput("field has " + std::to_string(s.cols()) + " columns but mask has " +
                           std::to_string(mask.points()) + " active pixels");
}

}  // namespace

GradientField gradient_field(const Matrix& s, const PixelGridMask& mask)
{
    check_mask(s, mask);
    GradientField g{Matrix::Zero(s.rows(), s.cols()), Matrix::Zero(s.rows(), s.cols())};
    for (Index p = 0; p < mask.points(); ++p) {
        if (const Index r = mask.right(p); r >= 0)
            g.du.col(p) = s.col(r) - s.col(p);
        if (const Index d = mask.down(p); d >= 0)
            g.dv.col(p) = s.col(d) - s.col(p);
    }
    return g;
}

Matrix gradient_adjoint(const Matrix& qu, const Matrix& qv, const PixelGridMask& mask)
{
    check_mask(qu, mask);
    Matrix out = Matrix::Zero(qu.rows(), qu.cols());
    for (Index p = 0; p < mask.points(); ++p) {
        if (const Index r = mask.right(p); r >= 0) {
            out.col(r) += qu.col(p);
            out.col(p) -= qu.col(p);
        }
        if (const Index d = mask.down(p); d >= 0) {
            out.col(d) += qv.col(p);
            out.col(p) -= qv.col(p);
        }
    }
    return out;
}

double total_variation(const Matrix& s, const PixelGridMask& mask)
{
    const GradientField g = gradient_field(s, mask);
    return (g.du.array().square() + g.dv.array().square()).sqrt().sum();
}

DualField DualField::zero(Index rows, Index cols)
{
    return DualField{Matrix::Zero(rows, cols), Matrix::Zero(rows, cols),
                     Matrix::Zero(rows, cols)};
}

double DualField::max_norm() const
{
    if (qu.size() == 0)
        return 0.0;
    return (qu.array().square() + qv.array().square()).sqrt().maxCoeff();
}

DualField dual_update(const DualField& q, const Matrix& s, double sigma,
                      const PixelGridMask& mask)
{
    const GradientField g = gradient_field(s, mask);
    DualField out;
    out.qu = q.qu + sigma * g.du;
    out.qv = q.qv + sigma * g.dv;
    const Eigen::ArrayXXd scale =
        (out.qu.array().square() + out.qv.array().square()).sqrt().max(1.0);
    out.qu.array() /= scale;
    out.qv.array() /= scale;
    out.dq = gradient_adjoint(out.qu, out.qv, mask);
    return out;
}

}  // namespace spva
