#include "spva/shape_prior.hpp"

#include "spva/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spva {

std::string to_string(ExtensionPolicy p)
{
    return p == ExtensionPolicy::hold ? "hold" : "mean";
}

std::string to_string(WindowSeed s)
{
    switch (s) {
    case WindowSeed::sequence_rigid: return "sequence_rigid";
    case WindowSeed::sequence_poses: return "sequence_poses";
    default: return "window_rigid";
    }
}

WindowSeed window_seed_from_string(const std::string& name)
{
    if (name == "window_rigid") return WindowSeed::window_rigid;
    if (name == "sequence_rigid") return WindowSeed::sequence_rigid;
    if (name == "sequence_poses") return WindowSeed::sequence_poses;
    throw InvalidInput("unknown window seed '" + name + "'");
}

ExtensionPolicy extension_policy_from_string(const std::string& name)
{
    if (name == "mean") return ExtensionPolicy::mean;
    if (name == "hold") return ExtensionPolicy::hold;
    throw InvalidInput("unknown extension policy '" + name + "'");
}

void PriorOptions::validate() const
{
    if (min_window < 2)
        throw InvalidInput("prior.min_window must be >= 2");
    if (min_anchors < 4 || max_anchors < min_anchors)
        throw InvalidInput("prior anchors need 4 <= min_anchors <= max_anchors");
}

ShapeSequence estimate_prior_window(const MeasurementMatrix& w_window, const PixelGridMask* mask,
                                    const SolverParams& params, int min_window,
                                    const std::optional<Initialization>& init)
{
    if (w_window.frames() < min_window)
        throw InvalidInput("prior window of " + std::to_string(w_window.frames()) +
                           " frames is below the minimum of " + std::to_string(min_window));
    SolverParams p = params;
    p.gamma = 0.0;
    return solve(w_window, PriorSpec::none(), mask, p, init).shape;
}

std::vector<Index> select_anchor_points(const Matrix& weights, Index points, int window,
                                        const PixelGridMask* mask, int min_anchors,
                                        int max_anchors)
{
    if (points < 4)
        throw InvalidInput("anchor selection needs at least 4 points");
    if (mask && mask->points() != points)
        throw InvalidInput("anchor selection: mask does not match the point count");
    Vector score = Vector::Zero(points);
    if (weights.size() > 0) {
        if (weights.cols() != points || weights.rows() < window)
            throw InvalidInput("anchor selection: weights must be F x N covering the window");
        score = weights.topRows(window).colwise().sum().transpose();
    }

    std::vector<Index> candidates;
    for (Index p = 0; p < points; ++p)
        if (score(p) == 0.0)
            candidates.push_back(p);
    if (static_cast<Index>(candidates.size()) < min_anchors) {
        std::vector<Index> order(static_cast<std::size_t>(points));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return score(a) < score(b); });
        order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(min_anchors)));
        std::sort(order.begin(), order.end());
        candidates = std::move(order);
    }

    const std::size_t count = std::min<std::size_t>(candidates.size(), max_anchors);
    if (!mask || candidates.size() <= count) {
        std::vector<Index> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k)
            out.push_back(candidates[k * candidates.size() / count]);
        return out;
    }

    // Lattice over the candidates' bounding box; each node takes the nearest
    // unused candidate.
    int x0 = mask->width(), x1 = -1, y0 = mask->height(), y1 = -1;
    for (Index p : candidates) {
        x0 = std::min(x0, mask->pixel_x(p));
        x1 = std::max(x1, mask->pixel_x(p));
        y0 = std::min(y0, mask->pixel_y(p));
        y1 = std::max(y1, mask->pixel_y(p));
    }
    const double bw = x1 - x0 + 1.0, bh = y1 - y0 + 1.0;
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(count * bw / bh))));
    const int rows = static_cast<int>((count + cols - 1) / cols);
    std::vector<Index> out;
    std::vector<bool> used(candidates.size(), false);
    for (int r = 0; r < rows && out.size() < count; ++r) {
        for (int c = 0; c < cols && out.size() < count; ++c) {
            const double nx = x0 + (c + 0.5) * bw / cols - 0.5;
            const double ny = y0 + (r + 0.5) * bh / rows - 0.5;
            std::size_t best = candidates.size();
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                if (used[k])
                    continue;
                const double dx = mask->pixel_x(candidates[k]) - nx;
                const double dy = mask->pixel_y(candidates[k]) - ny;
                const double d = dx * dx + dy * dy;
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            used[best] = true;
            out.push_back(candidates[best]);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

double fit_residual(const Similarity& sim, const Matrix3X& source, const Matrix3X& target,
                    const std::vector<Index>& anchors)
{
    double sum = 0.0;
    for (Index p : anchors) {
        const Vector3 mapped = sim.scale * sim.rotation * source.col(p) + sim.translation;
        sum += (mapped - target.col(p)).squaredNorm();
    }
    return sum;
}

}  // namespace

WindowAlignment align_window(const ShapeSequence& window_shapes, const Matrix3X& target,
                             const std::vector<Index>& anchors, const PriorOptions& options)
{
    if (window_shapes.frames() < 1 || target.cols() != window_shapes.points())
        throw InvalidInput("align_window: shape and target dimensions disagree");

    ProcrustesOptions proper;
    proper.estimate_scale = options.estimate_scale;
    WindowAlignment out;
    out.aligned = window_shapes;
    const Matrix3X source = window_shapes.frame(0);
    out.similarity = procrustes_align(source, target, anchors, proper);

    if (options.resolve_mirror) {
        Matrix3X flipped = source;
        flipped.row(2) *= -1.0;
        const Similarity alt = procrustes_align(flipped, target, anchors, proper);
        if (fit_residual(alt, flipped, target, anchors) <
            fit_residual(out.similarity, source, target, anchors)) {
            out.similarity = alt;
            out.mirrored = true;
            for (Index f = 0; f < out.aligned.frames(); ++f)
                out.aligned.frame(f).row(2) *= -1.0;
        }
    }
    for (Index f = 0; f < out.aligned.frames(); ++f)
        out.aligned.frame(f) = out.similarity.apply(out.aligned.frame(f));
    return out;
}

ShapeSequence build_full_prior(const ShapeSequence& aligned_window, Index frames,
                               ExtensionPolicy policy)
{
    const Index window = aligned_window.frames();
    if (window < 1 || frames < window)
        throw InvalidInput("build_full_prior: window of " + std::to_string(window) +
                           " frames cannot fill " + std::to_string(frames));
    ShapeSequence out(Matrix(3 * frames, aligned_window.points()));
    out.data.topRows(3 * window) = aligned_window.data;
    if (frames == window)
        return out;

    Matrix3X fill;
    if (policy == ExtensionPolicy::mean) {
        fill = Matrix3X::Zero(3, aligned_window.points());
        for (Index f = 0; f < window; ++f)
            fill += aligned_window.frame(f);
        fill /= static_cast<double>(window);
    } else {
        fill = aligned_window.frame(window - 1);
    }
    for (Index f = window; f < frames; ++f)
        out.frame(f) = fill;
    return out;
}

PriorEstimate acquire_prior(const MeasurementMatrix& w, const PixelGridMask* mask, int window,
                            const Matrix& occlusion_weights, const RigidFactorization& init,
                            const SolverParams& params, const PriorOptions& options)
{
    options.validate();
    if (window < options.min_window)
        throw InsufficientCleanFrames("clean window of " + std::to_string(window) +
                                      " frames is below the minimum of " +
                                      std::to_string(options.min_window));
    if (window > w.frames())
        throw InvalidInput("prior window exceeds the sequence length");
    if (init.shapes.points() != w.points() || init.shapes.frames() < 1)
        throw InvalidInput("initialization does not match the measurements");

    PriorEstimate est;
    est.window = window;
    std::optional<Initialization> seed;
    const MeasurementMatrix w_window = w.window(0, window);
    if (options.seed != WindowSeed::window_rigid) {
        Initialization in;
        in.poses.rows2x3.assign(init.poses.rows2x3.begin(), init.poses.rows2x3.begin() + window);
        in.poses.full3x3.assign(init.poses.full3x3.begin(), init.poses.full3x3.begin() + window);
        if (options.seed == WindowSeed::sequence_rigid)
            in.shape = ShapeSequence(init.shapes.data.topRows(3 * window));
        else
            in.shape = ShapeSequence::replicate(fit_rigid_shape(w_window, in.poses), window);
        seed = std::move(in);
    }
    est.shapes_window = estimate_prior_window(w_window, mask, params, options.min_window, seed);
    est.anchor_points = select_anchor_points(occlusion_weights, w.points(), window, mask,
                                             options.min_anchors, options.max_anchors);
    WindowAlignment aligned =
        align_window(est.shapes_window, init.shapes.frame(0), est.anchor_points, options);
    est.similarity = aligned.similarity;
    est.mirrored = aligned.mirrored;
    est.aligned_prior = build_full_prior(aligned.aligned, w.frames(), options.policy);
    return est;
}

}  // namespace spva
