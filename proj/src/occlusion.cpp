#include "spva/occlusion.hpp"

#include "spva/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace spva {

void OcclusionParams::validate() const
{
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw InvalidInput("occlusion.kernel_size must be a positive odd integer, got " +
                           std::to_string(kernel_size));
    if (!(kernel_sigma > 0.0) || !std::isfinite(kernel_sigma))
        throw InvalidInput("occlusion.kernel_sigma must be positive");
}

void WindowParams::validate() const
{
    if (!(epsilon >= 0.0) || !(epsilon_prime >= 0.0))
        throw InvalidInput("occlusion.epsilon and occlusion.epsilon_prime must be >= 0");
    if (min_window < 1)
        throw InvalidInput("prior.min_window must be >= 1");
}

Image backproject(const Image& frame, const FlowField& flow)
{
    const int w = frame.width();
    const int h = frame.height();
    if (flow.width() != w || flow.height() != h)
        throw InvalidInput("backproject: flow and frame sizes differ");

    Image out(w, h, frame.channel_count());
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sx = x + static_cast<double>(flow.u(y, x));
            const double sy = y + static_cast<double>(flow.v(y, x));
            if (!(sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1))
                continue;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0;
            const double fy = sy - y0;
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            for (int c = 0; c < frame.channel_count(); ++c) {
                const Matrix& src = frame.channels[c];
                const double top = (1.0 - fx) * src(y0, x0) + fx * src(y0, x1);
                const double bottom = (1.0 - fx) * src(y1, x0) + fx * src(y1, x1);
                out.channels[c](y, x) = (1.0 - fy) * top + fy * bottom;
            }
            valid[y * w + x] = 1;
        }
    }

    // Fill missing samples from the nearest valid pixel (BFS order).
    std::deque<int> queue;
    for (int i = 0; i < w * h; ++i)
        if (valid[i])
            queue.push_back(i);
    if (queue.empty())
        return frame;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        const int x = i % w, y = i / w;
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || valid[ny * w + nx])
                continue;
            for (int c = 0; c < out.channel_count(); ++c)
                out.channels[c](ny, nx) = out.channels[c](y, x);
            valid[ny * w + nx] = 1;
            queue.push_back(ny * w + nx);
        }
    }
    return out;
}

Matrix gaussian_kernel(int k, double sigma)
{
    if (k < 1 || k % 2 == 0)
        throw InvalidInput("Gaussian kernel width must be odd, got " + std::to_string(k));
    if (!(sigma > 0.0))
        throw InvalidInput("Gaussian kernel sigma must be positive");
    const int r = k / 2;
    Vector g(k);
    for (int i = -r; i <= r; ++i)
        g(i + r) = std::exp(-0.5 * i * i / (sigma * sigma));
    g /= g.sum();
    return g * g.transpose();
}

namespace {

Vector gaussian_1d(int k, double sigma)
{
    const int r = k / 2;
    Vector g(k);
    for (int i = -r; i <= r; ++i)
        g(i + r) = std::exp(-0.5 * i * i / (sigma * sigma));
    return g / g.sum();
}

}  // namespace

Matrix gaussian_blur(const Matrix& field, int k, double sigma)
{
    if (k < 1 || k % 2 == 0)
        throw InvalidInput("Gaussian kernel width must be odd, got " + std::to_string(k));
    const Vector g = gaussian_1d(k, sigma);
    const int r = k / 2;
    const Index h = field.rows(), w = field.cols();

    // Separable pass along x, then y; truncated taps are renormalized.
    Matrix tmp(h, w);
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int t = -r; t <= r; ++t) {
                const Index xx = x + t;
                if (xx < 0 || xx >= w)
                    continue;
                acc += g(t + r) * field(y, xx);
                wsum += g(t + r);
            }
            tmp(y, x) = acc / wsum;
        }
    }
    Matrix out(h, w);
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int t = -r; t <= r; ++t) {
                const Index yy = y + t;
                if (yy < 0 || yy >= h)
                    continue;
                acc += g(t + r) * tmp(yy, x);
                wsum += g(t + r);
            }
            out(y, x) = acc / wsum;
        }
    }
    return out;
}

Matrix occlusion_response(const Image& reference, const Image& frame, const FlowField& flow,
                          int k, double sigma)
{
    if (reference.width() != frame.width() || reference.height() != frame.height())
        throw InvalidInput("occlusion_map: reference and frame sizes differ");
    if (reference.channel_count() != frame.channel_count())
        throw InvalidInput("occlusion_map: reference and frame channel counts differ");
    if (k < 1 || k % 2 == 0)
        throw InvalidInput("occlusion_map: kernel width must be odd, got " + std::to_string(k));
    const Image warped = backproject(frame, flow);
    Matrix distance = Matrix::Zero(reference.height(), reference.width());
    for (int c = 0; c < reference.channel_count(); ++c)
        distance.array() += (warped.channels[c] - reference.channels[c]).array().square();
    distance = distance.cwiseSqrt();
    return gaussian_blur(distance, k, sigma);
}

namespace {

Matrix discretize(const Matrix& response, double divisor)
{
    if (!(divisor > 0.0))
        return Matrix::Zero(response.rows(), response.cols());
    return (response.array() * (255.0 / divisor)).round().min(255.0).max(0.0).matrix();
}

double fixed_divisor(int channels)
{
    return std::sqrt(static_cast<double>(channels)) * 255.0;
}

}  // namespace

Matrix occlusion_map(const Image& reference, const Image& frame, const FlowField& flow,
                     const OcclusionParams& params)
{
    params.validate();
    const Matrix response =
        occlusion_response(reference, frame, flow, params.kernel_size, params.kernel_sigma);
    const double divisor = params.normalization == OcclusionNormalization::fixed_range
                               ? fixed_divisor(reference.channel_count())
                               : response.maxCoeff();
    return discretize(response, divisor);
}

OcclusionTensor occlusion_tensor(const std::vector<Image>& sequence,
                                 const std::vector<FlowField>& flows, int reference_index,
                                 const OcclusionParams& params)
{
    params.validate();
    const Index frames = static_cast<Index>(sequence.size());
    if (frames < 1)
        throw InvalidInput("occlusion_tensor: empty sequence");
    if (reference_index < 1 || reference_index > frames)
        throw InvalidInput("occlusion_tensor: reference index out of range");
    if (static_cast<Index>(flows.size()) != frames - 1)
        throw InvalidInput("occlusion_tensor: expected " + std::to_string(frames - 1) +
                           " flow fields (one per non-reference frame), got " +
                           std::to_string(flows.size()));

    const Image& reference = sequence[reference_index - 1];
    std::vector<Matrix> responses(frames);
    std::vector<std::size_t> flow_of(frames, 0);
    for (Index f = 0, next = 0; f < frames; ++f)
        if (f != reference_index - 1)
            flow_of[f] = next++;
    for (Index f = 0; f < frames; ++f) {
        const Image& img = sequence[f];
        if (img.width() != reference.width() || img.height() != reference.height() ||
            img.channel_count() != reference.channel_count())
            throw InvalidInput("occlusion_tensor: frame " + std::to_string(f + 1) +
                               " differs in size or channels from the reference");
        if (f != reference_index - 1 && (flows[flow_of[f]].width() != reference.width() ||
                                         flows[flow_of[f]].height() != reference.height()))
            throw InvalidInput("occlusion_tensor: flow for frame " + std::to_string(f + 1) +
                               " has the wrong size");
    }

#pragma omp parallel for schedule(dynamic)
    for (Index f = 0; f < frames; ++f) {
        if (f == reference_index - 1) {
            responses[f] = Matrix::Zero(reference.height(), reference.width());
            continue;
        }
        responses[f] = occlusion_response(reference, sequence[f], flows[flow_of[f]],
                                          params.kernel_size, params.kernel_sigma);
    }

    double divisor = fixed_divisor(reference.channel_count());
    if (params.normalization == OcclusionNormalization::tensor_max) {
        divisor = 0.0;
        for (const Matrix& r : responses)
            divisor = std::max(divisor, r.maxCoeff());
    }

    OcclusionTensor tensor;
    tensor.kernel_size = params.kernel_size;
    tensor.kernel_sigma = params.kernel_sigma;
    tensor.reference_index = reference_index;
    tensor.maps.reserve(frames);
    for (Index f = 0; f < frames; ++f)
        tensor.maps.push_back(discretize(responses[f], divisor));
    tensor.maps[reference_index - 1].setZero();
    return tensor;
}

TiSeries ti_series(const OcclusionTensor& tensor, const PixelGridMask* domain)
{
    const Index frames = tensor.frames();
    TiSeries ti{Vector::Zero(frames), Vector::Zero(frames)};
    if (domain && (domain->width() != tensor.width() || domain->height() != tensor.height()))
        throw InvalidInput("ti_series: domain mask size differs from the tensor");
    for (Index f = 0; f < frames; ++f) {
        const Matrix& map = tensor.maps[f];
        double mass = 0.0;
        double area = 0.0;
        if (domain) {
            for (Index p = 0; p < domain->points(); ++p)
                mass += map(domain->pixel_y(p), domain->pixel_x(p));
            area = static_cast<double>(domain->points());
        } else {
            mass = map.sum();
            area = static_cast<double>(map.size());
        }
        ti.per_frame(f) = area > 0.0 ? mass / (255.0 * area) : 0.0;
        ti.cumulative(f) = ti.per_frame(f) + (f > 0 ? ti.cumulative(f - 1) : 0.0);
    }
    return ti;
}

double ti_derivative(const TiSeries& ti, Index f)
{
    const Index frames = ti.cumulative.size();
    auto at = [&](Index g) { return g < 0 ? 0.0 : ti.cumulative(g); };
    if (frames == 1)
        return ti.cumulative(0);
    if (f == frames - 1)
        return at(f) - at(f - 1);
    return 0.5 * (at(f + 1) - at(f - 1));
}

int select_prior_window(const TiSeries& ti, const WindowParams& params)
{
    params.validate();
    const Index frames = ti.cumulative.size();
    int window = 0;
    for (Index f = 0; f < frames; ++f) {
        if (ti.cumulative(f) > params.epsilon || ti_derivative(ti, f) > params.epsilon_prime)
            break;
        window = static_cast<int>(f + 1);
    }
    if (window < params.min_window)
        throw InsufficientCleanFrames("only " + std::to_string(window) +
                                      " clean frames satisfy the total-intensity criteria, "
                                      "minimum window is " +
                                      std::to_string(params.min_window));
    return window;
}

PriorWeights build_weights(const OcclusionTensor& tensor, const PixelGridMask& mask,
                           PriorMode mode, const WeightOptions& options)
{
    const Index frames = tensor.frames();
    const Index n = mask.points();
    if (mask.width() != tensor.width() || mask.height() != tensor.height())
        throw InvalidInput("build_weights: mask size differs from the tensor");

    Matrix pixel(frames, n);
    for (Index f = 0; f < frames; ++f)
        for (Index p = 0; p < n; ++p)
            pixel(f, p) = tensor.maps[f](mask.pixel_y(p), mask.pixel_x(p)) / 255.0;

    const Index ref = tensor.reference_index - 1;
    if (options.average_map && frames > 1) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(n);
        for (Index f = 0; f < frames; ++f)
            if (f != ref)
                mean += pixel.row(f);
        mean /= static_cast<double>(frames - 1);
        for (Index f = 0; f < frames; ++f)
            pixel.row(f) = f == ref ? Eigen::RowVectorXd::Zero(n) : mean;
    }

    auto binarize = [&](auto&& values) {
        const double peak = values.maxCoeff();
        if (peak <= 0.0)
            return;
        values = ((values.array() / peak) >= options.binarize_threshold).template cast<double>();
    };

    PriorWeights out;
    switch (mode) {
    case PriorMode::none:
        out.frame_weights = Vector::Zero(frames);
        out.pixel_weights = Matrix::Zero(frames, n);
        break;
    case PriorMode::per_sequence:
        out.frame_weights = Vector::Ones(frames);
        out.pixel_weights = Matrix::Ones(frames, n);
        break;
    case PriorMode::per_frame:
        out.frame_weights = n > 0 ? Vector(pixel.rowwise().mean()) : Vector(Vector::Zero(frames));
        if (options.binarize)
            binarize(out.frame_weights);
        out.pixel_weights = out.frame_weights.replicate(1, n);
        break;
    case PriorMode::per_pixel:
        out.pixel_weights = pixel;
        if (options.binarize)
            binarize(out.pixel_weights);
        out.frame_weights = out.pixel_weights.rowwise().mean();
        break;
    }
    return out;
}

}  // namespace spva
