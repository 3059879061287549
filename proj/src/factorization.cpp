#include "spva/factorization.hpp"

#include "spva/error.hpp"
#include "spva/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <tuple>
#include <sstream>

namespace spva {

MeasurementMatrix center_measurements(const Matrix& w_raw, int reference_index)
{
    if (w_raw.rows() < 2 || w_raw.rows() % 2 != 0)
        throw InvalidInput("measurement matrix needs an even, positive row count");
    if (!w_raw.allFinite())
        throw InvalidInput("measurement matrix contains non-finite entries");
    if (w_raw.cols() < 3)
        throw DegenerateError("underdetermined: at least 3 points are required, got " +
                              std::to_string(w_raw.cols()));
    MeasurementMatrix out(w_raw, reference_index);
    const Index frames = out.frames();
    for (Index f = 0; f < frames; ++f) {
        for (Index c = 0; c < 2; ++c) {
            const double mean = out.data.row(2 * f + c).mean();
            out.data.row(2 * f + c).array() -= mean;
            out.translations(f, c) = mean;
        }
    }
    return out;
}

namespace {

// Coefficients of a^T Q b in the 6 unknowns of a symmetric Q.
Eigen::Matrix<double, 1, 6> metric_row(const Vector3& a, const Vector3& b)
{
    Eigen::Matrix<double, 1, 6> r;
    r << a(0) * b(0), a(0) * b(1) + a(1) * b(0), a(0) * b(2) + a(2) * b(0),
        a(1) * b(1), a(1) * b(2) + a(2) * b(1), a(2) * b(2);
    return r;
}

// Least-squares shared shape for fixed cameras; `fallback` is used when all
// cameras share one viewing direction and depth is unobservable.
Matrix3X rigid_shape(const MeasurementMatrix& w, const CameraPoseSet& poses, const Matrix3X& fallback)
{
    Matrix3 normal = Matrix3::Zero();
    Matrix3X rhs = Matrix3X::Zero(3, w.points());
    for (Index f = 0; f < w.frames(); ++f) {
        normal += poses.rows2x3[f].transpose() * poses.rows2x3[f];
        rhs += poses.rows2x3[f].transpose() * w.frame(f);
    }
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(normal);
    if (eig.eigenvalues()(0) > 1e-12 * eig.eigenvalues()(2))
        return normal.ldlt().solve(rhs);
    return fallback;
}

double rigid_residual(const MeasurementMatrix& w, const CameraPoseSet& poses, const Matrix3X& shape)
{
    double sum = 0.0;
    for (Index f = 0; f < w.frames(); ++f)
        sum += (w.frame(f) - poses.rows2x3[f] * shape).squaredNorm();
    return sum;
}

}  // namespace

Matrix3X fit_rigid_shape(const MeasurementMatrix& w, const CameraPoseSet& poses)
{
    if (poses.frames() != w.frames())
        throw InvalidInput("fit_rigid_shape: pose count does not match the frames");
    Matrix3X nan = Matrix3X::Constant(3, w.points(), std::numeric_limits<double>::quiet_NaN());
    Matrix3X shape = rigid_shape(w, poses, nan);
    if (!shape.allFinite())
        throw DegenerateError("fit_rigid_shape: cameras share one viewing direction");
    return shape;
}

RigidFactorization rigid_init(const MeasurementMatrix& w)
{
    const Index frames = w.frames();
    if (w.points() < 3 || frames < 1)
        throw DegenerateError("rigid_init: need at least one frame and three points");
    if (!w.data.allFinite())
        throw InvalidInput("rigid_init: non-finite measurements");

    const auto svd = thin_svd(w.data);
    Vector3 leading = Vector3::Zero();
    for (Index i = 0; i < std::min<Index>(3, svd.sigma.size()); ++i)
        leading(i) = svd.sigma(i);
    if (svd.sigma.size() < 3 || leading(0) <= 0.0 || leading(2) <= 1e-9 * leading(0)) {
        std::ostringstream msg;
        msg << "degenerate motion: measurement rank < 3 (leading singular values "
            << leading(0) << ", " << leading(1) << ", " << leading(2) << ")";
        throw DegenerateError(msg.str());
    }

    const Vector3 root = leading.cwiseSqrt();
    const Matrix m_hat = svd.u.leftCols(3) * root.asDiagonal();
    const Matrix s_hat = root.asDiagonal() * svd.v.leftCols(3).transpose();

    Eigen::Matrix<double, Eigen::Dynamic, 6> a(3 * frames, 6);
    Vector rhs(3 * frames);
    for (Index f = 0; f < frames; ++f) {
        const Vector3 m1 = m_hat.row(2 * f).transpose();
        const Vector3 m2 = m_hat.row(2 * f + 1).transpose();
        a.row(3 * f) = metric_row(m1, m1);
        a.row(3 * f + 1) = metric_row(m2, m2);
        a.row(3 * f + 2) = metric_row(m1, m2);
        rhs.segment<3>(3 * f) << 1.0, 1.0, 0.0;
    }
    const Eigen::Matrix<double, 6, 1> q = a.completeOrthogonalDecomposition().solve(rhs);
    Matrix3 qm;
    qm << q(0), q(1), q(2), q(1), q(3), q(4), q(2), q(4), q(5);

    Eigen::SelfAdjointEigenSolver<Matrix3> eig(qm);
    const Vector3 lambda = eig.eigenvalues();
    const double top = std::max(lambda(2), 1e-300);
    const double floor = 1e-10 * top;

    auto candidate = [&](const Vector3& clamped) {
        const Matrix3 g = eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal();
        const Matrix m = m_hat * g;
        std::vector<Matrix23> rows(frames);
        for (Index f = 0; f < frames; ++f)
            rows[f] = project_to_orthonormal_rows(Matrix23(m.middleRows(2 * f, 2)));
        CameraPoseSet poses = poses_from_rows(std::move(rows));
        Matrix3X shape = rigid_shape(w, poses, g.inverse() * s_hat);
        const double residual = rigid_residual(w, poses, shape);
        return std::make_tuple(std::move(poses), std::move(shape), residual);
    };

    auto [poses, shape, residual] = candidate(lambda.cwiseMax(floor));
    if (lambda(0) <= floor) {
        // Indefinite estimate: the smallest eigenvalue fixes the depth scale, so
        // pick the clamp that best explains W instead of the bare floor.
        const double hi = std::max(lambda(1), floor);
        const int steps = 60;
        for (int k = 0; k <= steps; ++k) {
            Vector3 clamped = lambda.cwiseMax(floor);
            clamped(0) = floor * std::pow(hi / floor, static_cast<double>(k) / steps);
            auto [p, sh, r] = candidate(clamped);
            if (r < residual) {
                poses = std::move(p);
                shape = std::move(sh);
                residual = r;
            }
        }
    }

    // Rigid alternation: rotations for the shared shape, then the shape.
    for (int it = 0; it < 50 && residual > 0.0; ++it) {
        const ShapeSequence replicated = ShapeSequence::replicate(shape, frames);
        CameraPoseSet next_poses;
        try {
            next_poses = estimate_rotations(w, replicated, &poses, RotationOptions{1e300, 10});
        } catch (const DegenerateError&) {
            break;  // planar shape: keep the factorization as it is
        }
        Matrix3X next_shape = rigid_shape(w, next_poses, shape);
        const double next = rigid_residual(w, next_poses, next_shape);
        if (!(next < residual))
            break;
        const double gain = (residual - next) / residual;
        poses = std::move(next_poses);
        shape = std::move(next_shape);
        residual = next;
        if (gain < 1e-10)
            break;
    }

    RigidFactorization out;
    out.poses = std::move(poses);
    out.shapes = ShapeSequence::replicate(shape, frames);
    out.leading_singular_values = leading;
    return out;
}

double frame_data_term(const MeasurementMatrix& w, const Matrix23& r,
                       const ShapeSequence& s, Index f)
{
    return (w.frame(f) - r * s.frame(f)).squaredNorm();
}

double data_term(const MeasurementMatrix& w, const CameraPoseSet& poses,
                 const ShapeSequence& s)
{
    if (w.frames() != s.frames() || w.points() != s.points() || poses.frames() != w.frames())
        throw InvalidInput("data_term: dimension mismatch");
    double sum = 0.0;
    for (Index f = 0; f < w.frames(); ++f)
        sum += frame_data_term(w, poses.rows2x3[f], s, f);
    return sum;
}

CameraPoseSet estimate_rotations(const MeasurementMatrix& w, const ShapeSequence& s,
                                 const CameraPoseSet* seed, const RotationOptions& options)
{
    const Index frames = w.frames();
    if (s.frames() != frames || s.points() != w.points())
        throw InvalidInput("estimate_rotations: W and S dimensions disagree");
    if (seed && seed->frames() != frames)
        throw InvalidInput("estimate_rotations: seed pose count mismatch");

    std::vector<Matrix23> rows(frames);
    for (Index f = 0; f < frames; ++f) {
        const auto sf = s.frame(f);
        const Matrix3 gram = sf * sf.transpose();
        Eigen::SelfAdjointEigenSolver<Matrix3> eig(gram);
        const double lo = eig.eigenvalues()(0);
        const double hi = eig.eigenvalues()(2);
        if (!(lo > 0.0) || hi / lo > options.condition_cap) {
            std::ostringstream msg;
            msg << "degenerate frame " << (f + 1) << ": S_f S_f^T is singular (eigenvalues "
                << eig.eigenvalues().transpose() << ")";
            throw DegenerateError(msg.str());
        }
        const Eigen::Matrix<double, 2, 3> cross = w.frame(f) * sf.transpose();
        const Matrix23 a_t = gram.ldlt().solve(cross.transpose()).transpose();

        Matrix23 r = project_to_orthonormal_rows(a_t);
        double cost = frame_data_term(w, r, s, f);
        if (seed) {
            const double seed_cost = frame_data_term(w, seed->rows2x3[f], s, f);
            if (seed_cost < cost) {
                r = seed->rows2x3[f];
                cost = seed_cost;
            }
        }
        // R <- polar(W S^T + R (L I - S S^T)) never increases ||W - R S||^2.
        const Matrix3 shift = hi * Matrix3::Identity() - gram;
        for (int it = 0; it < options.refine_iterations; ++it) {
            const Matrix23 next = project_to_orthonormal_rows(cross + r * shift);
            const double next_cost = frame_data_term(w, next, s, f);
            if (!(next_cost < cost))
                break;
            const double change = (next - r).norm();
            r = next;
            cost = next_cost;
            if (change < 1e-14)
                break;
        }
        rows[f] = r;
    }
    return poses_from_rows(std::move(rows));
}

CameraPoseSet poses_from_rows(std::vector<Matrix23> rows)
{
    CameraPoseSet poses;
    poses.rows2x3 = std::move(rows);
    return complete_rotations(poses);
}

CameraPoseSet complete_rotations(const CameraPoseSet& poses)
{
    CameraPoseSet out;
    out.rows2x3.reserve(poses.rows2x3.size());
    out.full3x3.reserve(poses.rows2x3.size());
    for (const Matrix23& r : poses.rows2x3) {
        const Matrix23 ortho = project_to_orthonormal_rows(r);
        Matrix3 full;
        full.row(0) = ortho.row(0);
        full.row(1) = ortho.row(1);
        full.row(2) = ortho.row(0).cross(ortho.row(1));
        out.rows2x3.push_back(ortho);
        out.full3x3.push_back(full);
    }
    return out;
}

}  // namespace spva
