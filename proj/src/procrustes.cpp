#include "spva/procrustes.hpp"

#include "spva/error.hpp"

#include <Eigen/SVD>

namespace spva {

Matrix3X Similarity::apply(const Matrix3X& points) const
{
    Matrix3X out = scale * rotation * points;
    out.colwise() += translation;
    return out;
}

Similarity procrustes_align(const Matrix3X& source, const Matrix3X& target,
                            const std::vector<Index>& samples, const ProcrustesOptions& options)
{
    if (source.cols() != target.cols())
        throw InvalidInput("procrustes_align: point count mismatch");
    Matrix3X x, y;
    if (samples.empty()) {
        x = source;
        y = target;
    } else {
        x.resize(3, static_cast<Index>(samples.size()));
        y.resize(3, static_cast<Index>(samples.size()));
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const Index p = samples[k];
            if (p < 0 || p >= source.cols())
                throw InvalidInput("procrustes_align: sample index out of range");
            x.col(static_cast<Index>(k)) = source.col(p);
            y.col(static_cast<Index>(k)) = target.col(p);
        }
    }
    const Index n = x.cols();
    if (n < 4)
        throw DegenerateError("procrustes_align: at least 4 sample points are required");

    const Vector3 mu_x = x.rowwise().mean();
    const Vector3 mu_y = y.rowwise().mean();
    const Matrix3X xc = x.colwise() - mu_x;
    const Matrix3X yc = y.colwise() - mu_y;

    Eigen::JacobiSVD<Matrix> spread(xc, Eigen::ComputeThinU);
    const auto& sv = spread.singularValues();
    if (sv(0) == 0.0 || sv(1) <= 1e-10 * sv(0))
        throw DegenerateError("procrustes_align: sample points are collinear");

    const Matrix3 cov = yc * xc.transpose() / static_cast<double>(n);
    Eigen::JacobiSVD<Matrix3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix3 c = Matrix3::Identity();
    if (!options.allow_reflection && (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0)
        c(2, 2) = -1.0;

    Similarity sim;
    sim.rotation = svd.matrixU() * c * svd.matrixV().transpose();
    if (options.estimate_scale) {
        const double var_x = xc.squaredNorm() / static_cast<double>(n);
        sim.scale = (svd.singularValues().asDiagonal() * c).trace() / var_x;
        if (!(sim.scale > 0.0))
            throw DegenerateError("procrustes_align: non-positive scale estimate");
    }
    sim.translation = mu_y - sim.scale * sim.rotation * mu_x;
    return sim;
}

}  // namespace spva
