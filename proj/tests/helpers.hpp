#pragma once

#include "spva/types.hpp"

#include <cmath>
#include <random>

namespace spva::test {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0)
{
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = n(rng);
    return m;
}

// Uniform rotation from a normalized Gaussian quaternion.
inline Matrix3 random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline Matrix3 axis_rotation(int axis, double radians)
{
    return Eigen::AngleAxisd(radians, Vector3::Unit(axis)).toRotationMatrix();
}

inline CameraPoseSet poses_from_rotations(const std::vector<Matrix3>& rotations)
{
    CameraPoseSet p;
    for (const Matrix3& r : rotations) {
        p.rows2x3.push_back(r.topRows<2>());
        p.full3x3.push_back(r);
    }
    return p;
}

// Frame-wise centred copy of a shape sequence.
inline ShapeSequence centred(const ShapeSequence& s)
{
    ShapeSequence out = s;
    for (Index f = 0; f < s.frames(); ++f) {
        const Vector3 c = s.frame(f).rowwise().mean();
        out.frame(f).colwise() -= c;
    }
    return out;
}

// Euclidean mean of per-frame Frobenius errors relative to the reference,
// written directly from the definition.
inline double relative_error(const ShapeSequence& s, const ShapeSequence& ref)
{
    double sum = 0.0;
    for (Index f = 0; f < ref.frames(); ++f)
        sum += (ref.frame(f) - s.frame(f)).norm() / ref.frame(f).norm();
    return sum / static_cast<double>(ref.frames());
}

}  // namespace spva::test
