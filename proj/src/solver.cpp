#include "spva/solver.hpp"

#include "spva/error.hpp"
#include "spva/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace spva {

void SolverParams::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidInput(std::string("solver.") + name + " must be positive and finite");
    };
    auto nonnegative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidInput(std::string("solver.") + name + " must be >= 0 and finite");
    };
    nonnegative(lambda, "lambda");
    nonnegative(gamma, "gamma");
    nonnegative(tau, "tau");
    positive(theta, "theta");
    positive(sigma_dual, "sigma");
    positive(tol_outer, "tol_outer");
    positive(tol_pd, "tol_pd");
    positive(tol_si, "tol_si");
    if (max_outer < 1)
        throw InvalidInput("solver.max_outer must be >= 1");
    if (max_pd < 1)
        throw InvalidInput("solver.max_pd must be >= 1");
    if (max_si < 1)
        throw InvalidInput("solver.max_si must be >= 1");
}

std::string to_string(PriorMode mode)
{
    switch (mode) {
    case PriorMode::none: return "none";
    case PriorMode::per_sequence: return "per_sequence";
    case PriorMode::per_frame: return "per_frame";
    case PriorMode::per_pixel: return "per_pixel";
    }
    return "none";
}

PriorMode prior_mode_from_string(const std::string& name)
{
    if (name == "none") return PriorMode::none;
    if (name == "per_sequence") return PriorMode::per_sequence;
    if (name == "per_frame") return PriorMode::per_frame;
    if (name == "per_pixel") return PriorMode::per_pixel;
    throw InvalidInput("unknown prior mode '" + name + "'");
}

PriorSpec PriorSpec::none()
{
    return PriorSpec{};
}

PriorSpec PriorSpec::per_sequence(ShapeSequence prior)
{
    PriorSpec spec;
    spec.mode = PriorMode::per_sequence;
    spec.s_prior = std::move(prior);
    return spec;
}

PriorSpec PriorSpec::per_frame(ShapeSequence prior, Vector weights)
{
    PriorSpec spec;
    spec.mode = PriorMode::per_frame;
    spec.s_prior = std::move(prior);
    spec.frame_weights = std::move(weights);
    return spec;
}

PriorSpec PriorSpec::per_pixel(ShapeSequence prior, Matrix weights_3f_by_n)
{
    PriorSpec spec;
    spec.mode = PriorMode::per_pixel;
    spec.s_prior = std::move(prior);
    spec.pixel_weights = std::move(weights_3f_by_n);
    return spec;
}

PriorSpec PriorSpec::per_pixel_from_frame_map(ShapeSequence prior, const Matrix& weights_f_by_n)
{
    Matrix expanded(3 * weights_f_by_n.rows(), weights_f_by_n.cols());
    for (Index f = 0; f < weights_f_by_n.rows(); ++f)
        for (Index i = 0; i < 3; ++i)
            expanded.row(3 * f + i) = weights_f_by_n.row(f);
    return per_pixel(std::move(prior), std::move(expanded));
}

Matrix PriorSpec::dense_weights(Index frames, Index points) const
{
    switch (mode) {
    case PriorMode::none:
        return Matrix::Zero(3 * frames, points);
    case PriorMode::per_sequence:
        return Matrix::Ones(3 * frames, points);
    case PriorMode::per_frame: {
        Matrix out(3 * frames, points);
        for (Index f = 0; f < frames; ++f)
            out.middleRows(3 * f, 3).setConstant(frame_weights(f));
        return out;
    }
    case PriorMode::per_pixel:
        return pixel_weights;
    }
    return Matrix::Zero(3 * frames, points);
}

void PriorSpec::validate(Index frames, Index points) const
{
    if (mode == PriorMode::none)
        return;
    if (s_prior.data.rows() != 3 * frames || s_prior.data.cols() != points)
        throw InvalidInput("prior dimensions " + std::to_string(s_prior.data.rows()) + "x" +
                           std::to_string(s_prior.data.cols()) + " do not match problem " +
                           std::to_string(3 * frames) + "x" + std::to_string(points));
    if (!s_prior.data.allFinite())
        throw InvalidInput("prior contains non-finite entries");
    if (mode == PriorMode::per_frame) {
        if (frame_weights.size() != frames)
            throw InvalidInput("per_frame prior needs one weight per frame");
        if (!frame_weights.allFinite() || frame_weights.minCoeff() < 0.0)
            throw InvalidInput("per_frame prior weights must be finite and >= 0");
    }
    if (mode == PriorMode::per_pixel) {
        if (pixel_weights.rows() != 3 * frames || pixel_weights.cols() != points)
            throw InvalidInput("per_pixel prior weights must be 3F x N");
        if (!pixel_weights.allFinite() || pixel_weights.minCoeff() < 0.0)
            throw InvalidInput("per_pixel prior weights must be finite and >= 0");
    }
}

namespace {

void check_problem(const MeasurementMatrix& w, const CameraPoseSet& poses, const ShapeSequence& s)
{
    if (s.frames() != w.frames() || s.points() != w.points() || poses.frames() != w.frames())
        throw InvalidInput("dimension mismatch between W (" + std::to_string(w.data.rows()) + "x" +
                           std::to_string(w.data.cols()) + "), S (" +
                           std::to_string(s.data.rows()) + "x" + std::to_string(s.data.cols()) +
                           ") and " + std::to_string(poses.frames()) + " poses");
}

double relative_change(const Matrix& next, const Matrix& prev)
{
    const double denom = std::max(prev.norm(), std::numeric_limits<double>::min());
    return (next - prev).norm() / denom;
}

void check_finite(const Matrix& m, const char* level, int iteration)
{
    if (!m.allFinite()) {
        std::ostringstream msg;
        msg << "divergence: non-finite iterate in " << level << " loop at iteration "
            << iteration;
        throw DivergenceError(msg.str());
    }
}

}  // namespace

EnergyTerms energy_terms(const MeasurementMatrix& w, const CameraPoseSet& poses,
                         const ShapeSequence& s, const PriorSpec& prior,
                         const PixelGridMask* mask, const SolverParams& params)
{
    check_problem(w, poses, s);
    prior.validate(w.frames(), w.points());
    if (params.tv_enabled && !mask)
        throw InvalidInput("TV term enabled but no mask supplied");

    EnergyTerms e;
    e.data = 0.5 * params.lambda * data_term(w, poses, s);
    if (prior.mode != PriorMode::none) {
        const Matrix weights = prior.dense_weights(w.frames(), w.points());
        e.prior = 0.5 * params.gamma *
                  (weights.array() * (s.data - prior.s_prior.data).array().square()).sum();
    }
    if (params.tv_enabled)
        e.tv = total_variation(s.data, *mask);
    e.nuclear = params.tau * nuclear_norm(permute_frames(s.data));
    return e;
}

double energy(const MeasurementMatrix& w, const CameraPoseSet& poses, const ShapeSequence& s,
              const PriorSpec& prior, const PixelGridMask* mask, const SolverParams& params)
{
    return energy_terms(w, poses, s, prior, mask, params).total();
}

ShapeSequence primal_step(const MeasurementMatrix& w, const CameraPoseSet& poses,
                          const ShapeSequence& s_bar, const Matrix& dq,
                          const PriorSpec& prior, const SolverParams& params)
{
    check_problem(w, poses, s_bar);
    const Index frames = w.frames();
    const Index n = w.points();
    if (dq.rows() != 3 * frames || dq.cols() != n)
        throw InvalidInput("primal_step: D_q must be 3F x N");

    const double inv_theta = 1.0 / params.theta;
    const bool has_prior = prior.mode != PriorMode::none;
    ShapeSequence out(Matrix(3 * frames, n));

#pragma omp parallel for schedule(static)
    for (Index f = 0; f < frames; ++f) {
        const Matrix23& r = poses.rows2x3[f];
        const Matrix3 data_block = params.lambda * r.transpose() * r;
        Matrix3X rhs = params.lambda * r.transpose() * w.frame(f) + inv_theta * s_bar.frame(f) -
                       dq.middleRows(3 * f, 3);

        if (prior.mode == PriorMode::per_pixel) {
            const auto wf = prior.pixel_weights.middleRows(3 * f, 3);
            rhs.array() += params.gamma * wf.array() * prior.s_prior.frame(f).array();
            for (Index p = 0; p < n; ++p) {
                Matrix3 a = data_block;
                a.diagonal().array() += inv_theta + params.gamma * wf.col(p).array();
                out.frame(f).col(p) = a.ldlt().solve(rhs.col(p));
            }
            continue;
        }

        double weight = 0.0;
        if (prior.mode == PriorMode::per_sequence)
            weight = 1.0;
        else if (prior.mode == PriorMode::per_frame)
            weight = prior.frame_weights(f);
        Matrix3 a = data_block;
        a.diagonal().array() += inv_theta + params.gamma * weight;
        if (has_prior && weight != 0.0)
            rhs += params.gamma * weight * prior.s_prior.frame(f);
        out.frame(f) = a.ldlt().solve(rhs);
    }
    return out;
}

Matrix soft_impute_step(const Matrix& b, double eta)
{
    if (!b.allFinite())
        throw InvalidInput("soft_impute_step: non-finite input");
    return soft_threshold_singular_values(b, eta);
}

ShapeStepResult shape_step(const MeasurementMatrix& w, const CameraPoseSet& poses,
                           const ShapeSequence& s_init, const PriorSpec& prior,
                           const PixelGridMask* mask, const SolverParams& params,
                           const DualObserver& observer)
{
    check_problem(w, poses, s_init);
    if (params.tv_enabled && !mask)
        throw InvalidInput("TV term enabled but no mask supplied");
    if (params.tv_enabled && mask->points() != w.points())
        throw InvalidInput("mask active pixel count does not match the number of points");

    ShapeStepResult result;
    result.shape = s_init;
    result.shape_bar = s_init;
    const Index rows = s_init.data.rows();
    const Index cols = s_init.data.cols();

    for (int si = 1; si <= params.max_si; ++si) {
        const Matrix s_before = result.shape.data;

        // Primal-dual phase for the TV-regularized subproblem, q reset to 0.
        DualField q = DualField::zero(rows, cols);
        const int pd_cap = params.tv_enabled ? params.max_pd : 1;
        for (int pd = 1; pd <= pd_cap; ++pd) {
            ShapeSequence next = primal_step(w, poses, result.shape_bar, q.dq, prior, params);
            check_finite(next.data, "primal-dual", pd);
            const double change = relative_change(next.data, result.shape.data);
            result.shape = std::move(next);
            ++result.primal_dual_iterations;
            if (!params.tv_enabled)
                break;
            q = dual_update(q, result.shape.data, params.sigma_dual, *mask);
            if (observer)
                observer(si, pd, q);
            if (pd > 1 && change < params.tol_pd)
                break;
        }

        // Soft-impute phase: S_bar = shrink(P(S)) by eta = theta * tau.
        result.shape_bar.data =
            unpermute_frames(soft_impute_step(permute_frames(result.shape.data), params.eta()));
        check_finite(result.shape_bar.data, "soft-impute", si);
        result.soft_impute_iterations = si;

        if (relative_change(result.shape.data, s_before) < params.tol_si)
            break;
    }
    return result;
}

SolveResult solve(const MeasurementMatrix& w, const PriorSpec& prior, const PixelGridMask* mask,
                  const SolverParams& params, const std::optional<Initialization>& init,
                  const DualObserver& observer)
{
    params.validate();
    prior.validate(w.frames(), w.points());
    if (params.tv_enabled && !mask)
        throw InvalidInput("tv_enabled requires a pixel mask");
    if (mask && mask->points() != w.points())
        throw InvalidInput("mask active pixel count does not match the number of points");
    const double scale = std::max(1.0, w.data.cwiseAbs().maxCoeff());
    for (Index r = 0; r < w.data.rows(); ++r)
        if (std::abs(w.data.row(r).mean()) > 1e-9 * scale)
            throw InvalidInput("solve: measurements are not centered (row " + std::to_string(r) +
                               ")");

    SolveResult result;
    if (init) {
        result.poses = init->poses;
        result.shape = init->shape;
        check_problem(w, result.poses, result.shape);
    } else {
        RigidFactorization rigid = rigid_init(w);
        result.poses = std::move(rigid.poses);
        result.shape = std::move(rigid.shapes);
    }

    double previous = energy(w, result.poses, result.shape, prior, mask, params);
    for (int outer = 1; outer <= params.max_outer; ++outer) {
        result.poses = estimate_rotations(w, result.shape, &result.poses);

        ShapeStepResult step =
            shape_step(w, result.poses, result.shape, prior, mask, params, observer);
        result.iterations.soft_impute += step.soft_impute_iterations;
        result.iterations.primal_dual += step.primal_dual_iterations;
        result.iterations.outer = outer;
        result.shape = std::move(step.shape);

        const double current = energy(w, result.poses, result.shape, prior, mask, params);
        if (!std::isfinite(current)) {
            std::ostringstream msg;
            msg << "divergence: non-finite energy in outer loop at iteration " << outer;
            throw DivergenceError(msg.str());
        }
        result.energy_trace.emplace_back(outer, current);
        const double change = std::abs(previous - current) / std::max(std::abs(current), 1e-300);
        previous = current;
        if (change < params.tol_outer) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace spva
