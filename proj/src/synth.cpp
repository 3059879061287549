#include "spva/synth.hpp"

#include "spva/error.hpp"
#include "spva/procrustes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace spva {

void SheetSceneConfig::validate() const
{
    if (grid_w < 8 || grid_h < 8)
        throw InvalidInput("scene.grid_w and scene.grid_h must be >= 8");
    if (frames < 10)
        throw InvalidInput("scene.frames must be >= 10");
    if (margin < 0)
        throw InvalidInput("scene.margin must be >= 0");
    if (!(wobble_period > 0.0))
        throw InvalidInput("scene.wobble_period must be positive");
    if (!std::isfinite(deform.amplitude) || !std::isfinite(deform.frequency) ||
        !std::isfinite(deform.phase_speed) || !std::isfinite(deform.bend) || !std::isfinite(view_tilt_deg) ||
        !std::isfinite(wobble_deg))
        throw InvalidInput("scene parameters must be finite");
    if (std::abs(view_tilt_deg) >= 80.0)
        throw InvalidInput("scene.view_tilt_deg must lie in (-80, 80)");
}

std::string to_string(OccluderPattern p)
{
    switch (p) {
    case OccluderPattern::grid: return "grid";
    case OccluderPattern::stripes: return "stripes";
    case OccluderPattern::box: return "box";
    }
    return "stripes";
}

OccluderPattern occluder_pattern_from_string(const std::string& name)
{
    if (name == "grid") return OccluderPattern::grid;
    if (name == "stripes") return OccluderPattern::stripes;
    if (name == "box") return OccluderPattern::box;
    throw InvalidInput("unknown occluder pattern '" + name + "'");
}

std::string to_string(CorruptionModel m)
{
    switch (m) {
    case CorruptionModel::freeze: return "freeze";
    case CorruptionModel::drift: return "drift";
    case CorruptionModel::noise: return "noise";
    }
    return "freeze";
}

CorruptionModel corruption_model_from_string(const std::string& name)
{
    if (name == "freeze") return CorruptionModel::freeze;
    if (name == "drift") return CorruptionModel::drift;
    if (name == "noise") return CorruptionModel::noise;
    throw InvalidInput("unknown corruption model '" + name + "'");
}

std::string to_string(Alignment a)
{
    switch (a) {
    case Alignment::none: return "none";
    case Alignment::procrustes: return "procrustes";
    case Alignment::procrustes_reflection: return "procrustes+reflection";
    }
    return "none";
}

Alignment alignment_from_string(const std::string& name)
{
    if (name == "none") return Alignment::none;
    if (name == "procrustes") return Alignment::procrustes;
    if (name == "procrustes+reflection") return Alignment::procrustes_reflection;
    throw InvalidInput("unknown alignment '" + name + "'");
}

void OccluderSpec::validate(int frames) const
{
    if (first_frame <= last_frame && (first_frame < 1 || last_frame > frames))
        throw InvalidInput("occluder.frame_range must lie within 1.." + std::to_string(frames));
    switch (pattern) {
    case OccluderPattern::stripes:
        if (stripe_width <= 0 || stripe_period <= 0 || stripe_width > stripe_period)
            throw InvalidInput("occluder stripes need 0 < stripe_width <= stripe_period");
        break;
    case OccluderPattern::grid:
        if (grid_pitch <= 0 || grid_thickness <= 0 || grid_thickness > grid_pitch)
            throw InvalidInput("occluder grid needs 0 < grid_thickness <= grid_pitch");
        break;
    case OccluderPattern::box:
        if (box_w <= 0 || box_h <= 0)
            throw InvalidInput("occluder box needs positive width and height");
        break;
    }
    if (!(color >= 0.0 && color <= 255.0))
        throw InvalidInput("occluder.color must lie in [0, 255]");
}

bool OccluderSpec::covers(double x, double y) const
{
    const long px = static_cast<long>(std::floor(x + 0.5));
    const long py = static_cast<long>(std::floor(y + 0.5));
    auto wrap = [](long v, long m) { return ((v % m) + m) % m; };
    switch (pattern) {
    case OccluderPattern::stripes:
        return wrap(px, stripe_period) < stripe_width;
    case OccluderPattern::grid:
        return wrap(px, grid_pitch) < grid_thickness || wrap(py, grid_pitch) < grid_thickness;
    case OccluderPattern::box:
        return px >= box_x && px < box_x + box_w && py >= box_y && py < box_y + box_h;
    }
    return false;
}

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Matrix3 camera_rotation(const SheetSceneConfig& c, int f)
{
    const double deg = std::numbers::pi / 180.0;
    const double yaw = c.wobble_deg * deg * std::sin(two_pi * f / c.wobble_period);
    const double pitch =
        0.5 * c.wobble_deg * deg * std::sin(two_pi * f / (1.618 * c.wobble_period));
    const Matrix3 ry = Eigen::AngleAxisd(yaw, Vector3::UnitY()).toRotationMatrix();
    const Matrix3 rx = Eigen::AngleAxisd(pitch, Vector3::UnitX()).toRotationMatrix();
    return ry * rx;
}

struct SheetGeometry {
    const SheetSceneConfig& c;
    double tilt;

    explicit SheetGeometry(const SheetSceneConfig& config)
        : c(config), tilt(config.view_tilt_deg * std::numbers::pi / 180.0) {}

    double wave(double i, int f) const
    {
        const double u = i / static_cast<double>(c.grid_w - 1);
        return c.deform.amplitude *
               std::sin(two_pi * (c.deform.frequency * u + c.deform.phase_speed * f));
    }

    // Reference surface: a tilted plane with a static bend. Frame f moves
    // each point along the plane normal by the change of the wave since f = 0,
    // so frame 0 sits exactly on the pixel grid.
    Vector3 point(double i, double j, int f) const
    {
        const double x = i - 0.5 * (c.grid_w - 1);
        const double y = j - 0.5 * (c.grid_h - 1);
        const double t = std::abs(2.0 * i / static_cast<double>(c.grid_w - 1) - 1.0);
        const double profile = t <= 1.0 ? t * t : 2.0 * t - 1.0;  // C1 outside the sheet
        const double w0 = wave(i, 0);
        const Vector3 base(x, y, std::tan(tilt) * y + c.deform.bend * profile + w0);
        const Vector3 normal(0.0, -std::sin(tilt), std::cos(tilt));
        return base + (wave(i, f) - w0) * normal;
    }
};

struct Texture {
    double phase[3][3];

    explicit Texture(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, two_pi);
        for (auto& row : phase)
            for (double& p : row)
                p = uni(rng);
    }

    double operator()(double i, double j, int c) const
    {
        return 128.0 + 50.0 * std::sin(two_pi * i / 61.0 + phase[c][0]) *
                           std::cos(two_pi * j / 73.0 + phase[c][1]) +
               20.0 * std::sin(two_pi * (i + j) / 89.0 + phase[c][2]);
    }
};

Image render_frame(const SyntheticScene& scene, const SheetGeometry& geo, const Texture& tex,
                   int f, const Vector3& centroid)
{
    const SheetSceneConfig& c = scene.config;
    const int width = scene.image_width, height = scene.image_height;
    const Matrix3& r = scene.gt_poses.full3x3[f];
    const int pad = c.margin + 12;
    const int i0 = -pad, i1 = c.grid_w + pad;  // vertex range [i0, i1)
    const int j0 = -pad, j1 = c.grid_h + pad;
    const int nw = i1 - i0, nh = j1 - j0;

    Eigen::Matrix3Xd proj(3, nw * nh);
    for (int j = j0; j < j1; ++j)
        for (int i = i0; i < i1; ++i) {
            Vector3 q = r * (geo.point(i, j, f) - centroid);
            q(0) += scene.offset_x;
            q(1) += scene.offset_y;
            proj.col((j - j0) * nw + (i - i0)) = q;
        }

    Image img(width, height, 3, 96.0);
    Matrix depth = Matrix::Constant(height, width, -std::numeric_limits<double>::infinity());
    auto raster = [&](int a, int b, int d, const Eigen::Vector2d& ta, const Eigen::Vector2d& tb,
                      const Eigen::Vector2d& td) {
        const Vector3 pa = proj.col(a), pb = proj.col(b), pd = proj.col(d);
        const double area = (pb(0) - pa(0)) * (pd(1) - pa(1)) - (pd(0) - pa(0)) * (pb(1) - pa(1));
        if (std::abs(area) < 1e-12)
            return;
        const int xmin = std::max(0, static_cast<int>(std::ceil(std::min({pa(0), pb(0), pd(0)}))));
        const int xmax = std::min(width - 1, static_cast<int>(std::floor(std::max({pa(0), pb(0), pd(0)}))));
        const int ymin = std::max(0, static_cast<int>(std::ceil(std::min({pa(1), pb(1), pd(1)}))));
        const int ymax = std::min(height - 1, static_cast<int>(std::floor(std::max({pa(1), pb(1), pd(1)}))));
        for (int y = ymin; y <= ymax; ++y) {
            for (int x = xmin; x <= xmax; ++x) {
                const double wb = ((x - pa(0)) * (pd(1) - pa(1)) - (pd(0) - pa(0)) * (y - pa(1))) / area;
                const double wd = ((pb(0) - pa(0)) * (y - pa(1)) - (x - pa(0)) * (pb(1) - pa(1))) / area;
                const double wa = 1.0 - wb - wd;
                if (wa < -1e-9 || wb < -1e-9 || wd < -1e-9)
                    continue;
                const double z = wa * pa(2) + wb * pb(2) + wd * pd(2);
                if (z <= depth(y, x))
                    continue;
                depth(y, x) = z;
                const Eigen::Vector2d t = wa * ta + wb * tb + wd * td;
                for (int ch = 0; ch < 3; ++ch)
                    img.channels[ch](y, x) = tex(t(0), t(1), ch);
            }
        }
    };
    for (int j = j0; j + 1 < j1; ++j) {
        for (int i = i0; i + 1 < i1; ++i) {
            const int a = (j - j0) * nw + (i - i0);
            const int b = a + 1, cc = a + nw + 1, d = a + nw;
            const Eigen::Vector2d ta(i, j), tb(i + 1, j), tc(i + 1, j + 1), td(i, j + 1);
            raster(a, b, cc, ta, tb, tc);
            raster(a, cc, d, ta, tc, td);
        }
    }
    return img;
}

}  // namespace

SyntheticScene generate_sheet_scene(const SheetSceneConfig& config)
{
    config.validate();
    SyntheticScene scene;
    scene.config = config;
    const int w = config.grid_w, h = config.grid_h, frames = config.frames, m = config.margin;
    scene.image_width = w + 2 * m;
    scene.image_height = h + 2 * m;
    scene.offset_x = m + 0.5 * (w - 1);
    scene.offset_y = m + 0.5 * (h - 1);

    std::vector<std::uint8_t> active(static_cast<std::size_t>(scene.image_width) * scene.image_height, 0);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i)
            active[(j + m) * scene.image_width + (i + m)] = 1;
    scene.mask = PixelGridMask(scene.image_width, scene.image_height, std::move(active));

    const SheetGeometry geo(config);
    const Index n = static_cast<Index>(w) * h;
    Matrix shapes(3 * frames, n);
    std::vector<Vector3> centroid(frames);
    std::vector<Matrix23> rows(frames);
    for (int f = 0; f < frames; ++f) {
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i)
                shapes.block<3, 1>(3 * f, static_cast<Index>(j) * w + i) = geo.point(i, j, f);
        centroid[f] = shapes.middleRows(3 * f, 3).rowwise().mean();
        shapes.middleRows(3 * f, 3).colwise() -= centroid[f];
        rows[f] = camera_rotation(config, f).topRows<2>();
    }
    scene.gt_shapes = ShapeSequence(std::move(shapes));
    scene.gt_poses.rows2x3 = rows;
    for (int f = 0; f < frames; ++f)
        scene.gt_poses.full3x3.push_back(camera_rotation(config, f));
    scene.gt_w = MeasurementMatrix(scene.gt_poses.project(scene.gt_shapes), 1);

    const int iw = scene.image_width, ih = scene.image_height;
    scene.dense_tracks.resize(2 * frames, static_cast<Index>(iw) * ih);
    for (int f = 0; f < frames; ++f) {
        for (int y = 0; y < ih; ++y)
            for (int x = 0; x < iw; ++x)
                scene.dense_tracks.block<2, 1>(2 * f, static_cast<Index>(y) * iw + x) =
                    rows[f] * (geo.point(x - m, y - m, f) - centroid[f]);
    }

    if (config.render) {
        const Texture tex(config.seed);
        scene.images.reserve(frames);
        for (int f = 0; f < frames; ++f)
            scene.images.push_back(render_frame(scene, geo, tex, f, centroid[f]));
    }
    return scene;
}

OccludedScene apply_occluder(const SyntheticScene& scene, const OccluderSpec& spec,
                             const CorruptionSpec& corruption)
{
    const int frames = scene.config.frames;
    spec.validate(frames);
    if (!(corruption.sigma >= 0.0))
        throw InvalidInput("corruption.sigma must be >= 0");

    OccludedScene out;
    out.dense_tracks = scene.dense_tracks;
    const Index dense_n = scene.dense_tracks.cols();
    const Index n = scene.gt_w.points();
    out.corrupted.setZero(frames, n);

    std::mt19937_64 rng(corruption.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> dense_hit;
    dense_hit.setZero(frames, dense_n);

    for (int f = 0; f < frames; ++f) {
        if (!spec.active_in(f + 1))
            continue;
        for (Index p = 0; p < dense_n; ++p) {
            const double gx = scene.dense_tracks(2 * f, p);
            const double gy = scene.dense_tracks(2 * f + 1, p);
            if (!spec.covers(gx + scene.offset_x, gy + scene.offset_y))
                continue;
            dense_hit(f, p) = 1;
            switch (corruption.model) {
            case CorruptionModel::freeze:
                if (f > 0)
                    out.dense_tracks.block<2, 1>(2 * f, p) = out.dense_tracks.block<2, 1>(2 * f - 2, p);
                break;
            case CorruptionModel::drift: {
                const Eigen::Vector2d step(normal(rng), normal(rng));
                const Eigen::Vector2d base = f > 0 ? Eigen::Vector2d(out.dense_tracks.block<2, 1>(2 * f - 2, p))
                                                   : Eigen::Vector2d(gx, gy);
                out.dense_tracks.block<2, 1>(2 * f, p) = base + corruption.sigma * step;
                break;
            }
            case CorruptionModel::noise: {
                const Eigen::Vector2d step(normal(rng), normal(rng));
                out.dense_tracks.block<2, 1>(2 * f, p) = Eigen::Vector2d(gx, gy) + corruption.sigma * step;
                break;
            }
            }
        }
    }

    const PixelGridMask& mask = scene.mask;
    Matrix w(2 * frames, n);
    for (Index p = 0; p < n; ++p) {
        const Index dense = static_cast<Index>(mask.pixel_y(p)) * scene.image_width + mask.pixel_x(p);
        w.col(p) = out.dense_tracks.col(dense);
        for (int f = 0; f < frames; ++f)
            out.corrupted(f, p) = dense_hit(f, dense);
    }
    out.w_corrupt = MeasurementMatrix(std::move(w), scene.gt_w.reference_index);
    if (out.corrupted.cast<int>().sum() == 0 && spec.first_frame <= spec.last_frame)
        out.warning = "occluder does not intersect any tracked point; W is unchanged";

    out.images = scene.images;
    for (int f = 0; f < static_cast<int>(out.images.size()); ++f) {
        if (!spec.active_in(f + 1))
            continue;
        Image& img = out.images[f];
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                if (spec.covers(x, y))
                    for (Matrix& c : img.channels)
                        c(y, x) = spec.color;
    }
    return out;
}

std::vector<FlowField> flows_from_tracks(const SyntheticScene& scene, const Matrix& dense_tracks)
{
    const int iw = scene.image_width, ih = scene.image_height;
    const int frames = static_cast<int>(dense_tracks.rows() / 2);
    if (dense_tracks.cols() != static_cast<Index>(iw) * ih)
        throw InvalidInput("flows_from_tracks: track count does not match the image size");
    const int ref = scene.gt_w.reference_index - 1;
    std::vector<FlowField> flows;
    for (int f = 0; f < frames; ++f) {
        if (f == ref)
            continue;
        FlowField flow = FlowField::zero(iw, ih, f + 1);
        for (int y = 0; y < ih; ++y)
            for (int x = 0; x < iw; ++x) {
                const Index p = static_cast<Index>(y) * iw + x;
                flow.u(y, x) = static_cast<float>(dense_tracks(2 * f, p) - dense_tracks(2 * ref, p));
                flow.v(y, x) = static_cast<float>(dense_tracks(2 * f + 1, p) - dense_tracks(2 * ref + 1, p));
            }
        flows.push_back(std::move(flow));
    }
    return flows;
}

RmsReport mean_rms(const ShapeSequence& s, const ShapeSequence& reference, Alignment align)
{
    if (s.data.rows() != reference.data.rows() || s.data.cols() != reference.data.cols())
        throw InvalidInput("mean_rms: shape dimensions differ");
    const Index frames = reference.frames();
    if (frames == 0)
        throw InvalidInput("mean_rms: empty sequence");

    Similarity sim;
    if (align != Alignment::none) {
        ProcrustesOptions options;
        options.allow_reflection = align == Alignment::procrustes_reflection;
        sim = procrustes_align(s.frame(0), reference.frame(0), {}, options);
    }

    RmsReport report;
    report.per_frame.resize(frames);
    for (Index f = 0; f < frames; ++f) {
        const double ref_norm = reference.frame(f).norm();
        if (!(ref_norm > 0.0))
            throw InvalidInput("mean_rms: invalid reference, frame " + std::to_string(f + 1) +
                               " has zero norm");
        const Matrix3X mapped = align == Alignment::none ? Matrix3X(s.frame(f))
                                                          : sim.apply(s.frame(f));
        report.per_frame(f) = (reference.frame(f) - mapped).norm() / ref_norm;
    }
    report.e3d = report.per_frame.mean();
    return report;
}

double mean_over_frames(const Vector& per_frame, int first, int last)
{
    if (first < 1 || last > per_frame.size() || first > last)
        throw InvalidInput("mean_over_frames: empty or out-of-range frame span");
    return per_frame.segment(first - 1, last - first + 1).mean();
}

}  // namespace spva
