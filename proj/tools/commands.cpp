#include "commands.hpp"

#include "spva/error.hpp"
#include "spva/io.hpp"

#include <openssl/evp.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cstdlib>
#include <iostream>

namespace spva::cli {

namespace {

using io::format_double;

std::string frame_name(const char* stem, int frame, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, frame, ext);
    return buf;
}

std::vector<fs::path> list_files(const std::string& dir, std::initializer_list<const char*> exts,
                                 const char* field)
{
    if (dir.empty())
        throw InvalidInput(std::string(field) + " is required for this command");
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw FormatError(std::string(field) + ": " + dir + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        const std::string ext = entry.path().extension().string();
        for (const char* e : exts)
            if (ext == e)
                out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

const std::string& required(const std::string& value, const char* field)
{
    if (value.empty())
        throw InvalidInput(std::string(field) + " is required for this command");
    return value;
}

class Manifest {
public:
    Manifest(std::string command, const RunConfig& config)
        : command_(std::move(command)), config_(config), dir_(config.paths.output_dir) {}

    fs::path path(const std::string& name) const { return dir_ / name; }

    const fs::path& add(const fs::path& p)
    {
        artifacts_.push_back(p);
        return artifacts_.back();
    }

    json extra = json::object();

    void write() const
    {
        json m;
        m["command"] = command_;
        m["version"] = "1.0.0";
        m["scene_seed"] = config_.bench.scene.seed;
        m["corruption_seed"] = config_.bench.corruption.seed;
        m["config"] = to_json(config_);
        m["results"] = extra;
        json list = json::array();
        for (const fs::path& p : artifacts_) {
            std::error_code ec;
            list.push_back({{"path", fs::relative(p, dir_, ec).generic_string()},
                            {"bytes", fs::file_size(p)},
                            {"sha256", sha256_file(p)}});
        }
        m["artifacts"] = list;
        io::write_file(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    const RunConfig& config_;
    fs::path dir_;
    std::vector<fs::path> artifacts_;
};

MeasurementMatrix load_centered(const RunConfig& c)
{
    const MeasurementMatrix raw = io::read_measurements(required(c.paths.measurements, "paths.measurements"));
    return center_measurements(raw.data, raw.reference_index);
}

PixelGridMask load_mask(const RunConfig& c, Index points)
{
    PixelGridMask mask = io::read_mask(required(c.paths.mask, "paths.mask"));
    if (mask.points() != points)
        throw InvalidInput("paths.mask: " + std::to_string(mask.points()) +
                           " active pixels but the measurements have " + std::to_string(points) +
                           " points");
    return mask;
}

OcclusionTensor load_tensor(const RunConfig& c, Index frames, const PixelGridMask& mask)
{
    const auto files = list_files(c.paths.occlusion_dir, {".pgm"}, "paths.occlusion_dir");
    if (static_cast<Index>(files.size()) != frames)
        throw InvalidInput("paths.occlusion_dir: " + std::to_string(files.size()) +
                           " maps for " + std::to_string(frames) + " frames");
    OcclusionTensor t;
    t.kernel_size = c.occlusion.params.kernel_size;
    t.kernel_sigma = c.occlusion.params.kernel_sigma;
    for (const auto& f : files) {
        Matrix m = io::read_pgm(f);
        if (m.cols() != mask.width() || m.rows() != mask.height())
            throw InvalidInput("occlusion map " + f.string() + " does not match the mask size");
        t.maps.push_back(std::move(m));
    }
    return t;
}

void write_poses(const CameraPoseSet& poses, const fs::path& path)
{
    io::CsvWriter csv({"frame", "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22"});
    for (Index f = 0; f < poses.frames(); ++f) {
        std::vector<std::string> row{std::to_string(f + 1)};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                row.push_back(format_double(poses.full3x3[f](i, j)));
        csv.row(row);
    }
    csv.save(path);
}

}  // namespace

std::string sha256_file(const fs::path& path)
{
    const std::string bytes = io::read_file(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw FormatError("sha256 failed for " + path.string());
    static const char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

void apply_thread_override()
{
    const char* env = std::getenv("SPVA_NUM_THREADS");
    if (!env || !*env)
        return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096)
        throw InvalidInput(std::string("SPVA_NUM_THREADS must be a positive integer, got '") + env + "'");
#ifdef _OPENMP
    omp_set_num_threads(static_cast<int>(n));
#endif
    Eigen::setNbThreads(static_cast<int>(n));
}

int cmd_synth(const RunConfig& c)
{
    Manifest m("synth", c);
    SheetSceneConfig sc = c.bench.scene;
    const SyntheticScene scene = generate_sheet_scene(sc);
    const OccludedScene occ = apply_occluder(scene, c.bench.occluder, c.bench.corruption);
    if (!occ.warning.empty())
        std::cerr << "warning: " << occ.warning << "\n";

    io::write_measurements(scene.gt_w, m.add(m.path("w_gt.spvaw")));
    io::write_measurements(occ.w_corrupt, m.add(m.path("w.spvaw")));
    io::write_shapes(scene.gt_shapes, m.add(m.path("shapes_gt.spvas")));
    write_poses(scene.gt_poses, m.add(m.path("poses_gt.csv")));
    io::write_mask(scene.mask, m.add(m.path("mask.pgm")));

    io::CsvWriter corrupted({"frame", "corrupted_tracks"});
    for (Index f = 0; f < occ.corrupted.rows(); ++f)
        corrupted.row({std::to_string(f + 1), std::to_string(occ.corrupted.row(f).cast<int>().sum())});
    corrupted.save(m.add(m.path("corrupted.csv")));

    if (c.write_frames) {
        for (std::size_t f = 0; f < occ.images.size(); ++f)
            io::write_ppm(occ.images[f], m.add(m.path("frames/" + frame_name("frame", static_cast<int>(f + 1), "ppm"))));
        for (const FlowField& flow : flows_from_tracks(scene, occ.dense_tracks))
            io::write_flo(flow, m.add(m.path("flows/" + frame_name("flow", flow.frame_index, "flo"))));
    }
    m.extra = {{"frames", sc.frames}, {"points", scene.gt_w.points()},
               {"image_width", scene.image_width}, {"image_height", scene.image_height}};
    m.write();
    std::cerr << "synth: " << sc.frames << " frames, " << scene.gt_w.points() << " points -> "
              << c.paths.output_dir << "\n";
    return 0;
}

int cmd_occlusion(const RunConfig& c)
{
    Manifest m("occlusion", c);
    const auto frame_files = list_files(c.paths.frames_dir, {".ppm", ".pgm", ".png"}, "paths.frames_dir");
    if (frame_files.size() < 2)
        throw InvalidInput("paths.frames_dir: need at least 2 frames");
    std::vector<Image> frames;
    for (const auto& f : frame_files)
        frames.push_back(io::read_image(f));
    const auto flow_files = list_files(c.paths.flows_dir, {".flo"}, "paths.flows_dir");
    if (flow_files.size() + 1 != frame_files.size())
        throw FormatError("paths.flows_dir: expected " + std::to_string(frame_files.size() - 1) +
                          " .flo files (one per non-reference frame), found " +
                          std::to_string(flow_files.size()));
    std::vector<FlowField> flows;
    for (std::size_t i = 0; i < flow_files.size(); ++i) {
        flows.push_back(io::read_flo(flow_files[i]));
        flows.back().frame_index = static_cast<int>(i + 2);
    }

    const OcclusionTensor tensor = occlusion_tensor(frames, flows, 1, c.occlusion.params);
    std::optional<PixelGridMask> mask;
    if (!c.paths.mask.empty())
        mask = io::read_mask(c.paths.mask);
    const TiSeries ti = ti_series(tensor, mask ? &*mask : nullptr);
    for (const auto& p : io::write_occlusion_maps(tensor, m.path("occlusion")))
        m.add(p);
    io::write_ti_csv(ti, m.add(m.path("ti.csv")));

    int window = 0;
    try {
        window = select_prior_window(ti, c.occlusion.window);
    } catch (const InsufficientCleanFrames&) {
        m.extra = {{"F_sp", nullptr}};
        m.write();
        throw;
    }
    m.extra = {{"F_sp", window}, {"frames", tensor.frames()}};
    m.write();
    std::cout << "F_sp " << window << "\n";
    return 0;
}

int cmd_prior(const RunConfig& c)
{
    Manifest m("prior", c);
    const MeasurementMatrix w = load_centered(c);
    const PixelGridMask mask = load_mask(c, w.points());

    if (!c.paths.prior.empty()) {
        const ShapeSequence external = io::read_shapes(c.paths.prior);
        if (external.frames() != w.frames() || external.points() != w.points())
            throw InvalidInput("paths.prior: prior is " + std::to_string(external.frames()) + " x " +
                               std::to_string(external.points()) + " but the measurements are " +
                               std::to_string(w.frames()) + " x " + std::to_string(w.points()));
        io::write_shapes(external, m.add(m.path("prior.spvas")));
        m.extra = {{"source", "external"}, {"window", nullptr}};
        m.write();
        std::cerr << "prior: using external prior, window solve skipped\n";
        return 0;
    }

    Matrix weights;
    int window = c.prior.window;
    if (!c.paths.occlusion_dir.empty()) {
        const OcclusionTensor tensor = load_tensor(c, w.frames(), mask);
        weights = build_weights(tensor, mask, PriorMode::per_pixel, c.occlusion.weights).pixel_weights;
        if (window == 0)
            window = select_prior_window(ti_series(tensor, &mask), c.occlusion.window);
    } else if (window == 0) {
        throw InvalidInput("prior.window is 0 and paths.occlusion_dir is empty; one of them is needed");
    }
    if (window > w.frames())
        throw InvalidInput("prior.window exceeds the sequence length");

    const RigidFactorization init = rigid_init(w);
    const PriorEstimate est = acquire_prior(w, &mask, window, weights, init, c.solver, c.prior.options);
    io::write_shapes(est.aligned_prior, m.add(m.path("prior.spvas")));
    io::write_shapes(est.shapes_window, m.add(m.path("prior_window.spvas")));
    io::write_shapes(init.shapes, m.add(m.path("init.spvas")));
    json rot = json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            rot.push_back(est.similarity.rotation(i, j));
    m.extra = {{"source", "window"},
               {"window", window},
               {"mirrored", est.mirrored},
               {"scale", est.similarity.scale},
               {"rotation", rot},
               {"translation", {est.similarity.translation(0), est.similarity.translation(1),
                                est.similarity.translation(2)}},
               {"anchor_points", est.anchor_points}};
    m.write();
    std::cerr << "prior: window of " << window << " frames\n";
    return 0;
}

int cmd_solve(const RunConfig& c)
{
    Manifest m("solve", c);
    const MeasurementMatrix w = load_centered(c);
    const PixelGridMask mask = load_mask(c, w.points());
    for (int f : c.ply_frames)
        if (f > w.frames())
            throw InvalidInput("output.ply_frames: frame " + std::to_string(f) + " exceeds " +
                               std::to_string(w.frames()));

    PriorSpec spec = PriorSpec::none();
    SolverParams params = c.solver;
    if (c.prior.mode == PriorMode::none) {
        params.gamma = 0.0;
    } else {
        ShapeSequence prior = io::read_shapes(required(c.paths.prior, "paths.prior"));
        if (prior.frames() != w.frames() || prior.points() != w.points())
            throw InvalidInput("paths.prior: prior is " + std::to_string(prior.frames()) + " x " +
                               std::to_string(prior.points()) + " but the measurements are " +
                               std::to_string(w.frames()) + " x " + std::to_string(w.points()));
        if (c.prior.mode == PriorMode::per_sequence) {
            spec = PriorSpec::per_sequence(std::move(prior));
        } else {
            const OcclusionTensor tensor = load_tensor(c, w.frames(), mask);
            const PriorWeights pw = build_weights(tensor, mask, c.prior.mode, c.occlusion.weights);
            spec = c.prior.mode == PriorMode::per_frame
                       ? PriorSpec::per_frame(std::move(prior), pw.frame_weights)
                       : PriorSpec::per_pixel_from_frame_map(std::move(prior), pw.pixel_weights);
        }
    }

    const SolveResult r = solve(w, spec, &mask, params);
    io::write_shapes(r.shape, m.add(m.path("shapes.spvas")));
    write_poses(r.poses, m.add(m.path("poses.csv")));
    io::CsvWriter trace({"iteration", "energy"});
    for (const auto& [it, e] : r.energy_trace)
        trace.row({std::to_string(it), format_double(e)});
    trace.save(m.add(m.path("energy.csv")));
    for (int f : c.ply_frames)
        io::write_ply(r.shape, f - 1, m.add(m.path(frame_name("frame", f, "ply"))));
    m.extra = {{"converged", r.converged},
               {"outer_iterations", r.iterations.outer},
               {"soft_impute_iterations", r.iterations.soft_impute},
               {"primal_dual_iterations", r.iterations.primal_dual}};
    m.write();
    std::cerr << "solve: " << r.iterations.outer << " outer iterations"
              << (r.converged ? ", converged" : "") << "\n";
    return 0;
}

int cmd_eval(const RunConfig& c)
{
    Manifest m("eval", c);
    const ShapeSequence s = io::read_shapes(required(c.paths.shapes, "paths.shapes"));
    const ShapeSequence ref = io::read_shapes(required(c.paths.reference, "paths.reference"));
    if (s.frames() != ref.frames() || s.points() != ref.points())
        throw InvalidInput("paths.shapes and paths.reference differ in size");
    const RmsReport rep = mean_rms(s, ref, c.eval.align);

    const int first = std::max(1, c.eval.occluded_first);
    const int last = std::min(static_cast<int>(s.frames()), c.eval.occluded_last);
    const double occluded = first <= last ? mean_over_frames(rep.per_frame, first, last)
                                          : std::numeric_limits<double>::quiet_NaN();
    io::CsvWriter metrics({"align", "e3D_whole", "e3D_occluded"});
    metrics.row({to_string(c.eval.align), format_double(rep.e3d), format_double(occluded)});
    metrics.save(m.add(m.path("metrics.csv")));
    io::CsvWriter per_frame({"frame", "e3D"});
    for (Index f = 0; f < rep.per_frame.size(); ++f)
        per_frame.row({std::to_string(f + 1), format_double(rep.per_frame(f))});
    per_frame.save(m.add(m.path("metrics_per_frame.csv")));
    m.extra = {{"e3D_whole", rep.e3d}, {"e3D_occluded", first <= last ? json(occluded) : json(nullptr)}};
    m.write();
    std::cout << metrics.str();
    return 0;
}

int cmd_bench(const RunConfig& c)
{
    Manifest m("bench", c);
    const BenchReport report = run_benchmark(c.bench);
    io::write_file(m.add(m.path("bench.csv")), report.csv());
    io::write_file(m.add(m.path("bench_summary.txt")), report.summary());
    m.extra = {{"F_sp", report.prior_window},
               {"rigid_e3D", report.rigid_e3d},
               {"prior_e3D", report.prior_e3d},
               {"timings_reliable", report.timings_reliable}};
    m.write();
    std::cout << report.summary();
    return 0;
}

}  // namespace spva::cli
