#include "helpers.hpp"

#include "spva/benchmark.hpp"
#include "spva/error.hpp"
#include "spva/io.hpp"
#include "spva/linalg.hpp"
#include "spva/solver.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

using namespace spva;
using namespace spva::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string id;
    double budget_seconds;  // 0 means no runtime bound
    std::function<Outcome()> check;
};

std::string fmt(double v, int digits = 4)
{
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

// ---------------------------------------------------------------------------

Outcome rotation_projection()
{
    std::mt19937_64 rng(101);
    double worst_orth = 0.0, worst_det = 0.0;
    int beaten = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Matrix3 a = random_matrix(rng, 3, 3);
        const Matrix3 r = project_to_rotation(a);
        worst_orth = std::max(worst_orth, (r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff());
        worst_det = std::max(worst_det, std::abs(r.determinant() - 1.0));
        const double d = (a - r).norm();
        for (int k = 0; k < 10000; ++k)
            if ((a - random_rotation(rng)).norm() < d - 1e-12) {
                ++beaten;
                break;
            }
    }
    return {beaten == 0 && worst_orth <= 1e-9 && worst_det <= 1e-9,
            "beaten in " + std::to_string(beaten) + "/1000, max |R^T R - I| " + fmt(worst_orth) +
                ", max |det - 1| " + fmt(worst_det)};
}

Matrix shrink_oracle(const Matrix& b, double eta)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.transpose() * b);
    Matrix z = Matrix::Zero(b.rows(), b.cols());
    for (Index k = 0; k < eig.eigenvalues().size(); ++k) {
        const double s = std::sqrt(std::max(0.0, eig.eigenvalues()(k)));
        if (s <= eta || s < 1e-12)
            continue;
        const Vector v = eig.eigenvectors().col(k);
        z += (s - eta) * (b * v / s) * v.transpose();
    }
    return z;
}

Outcome soft_impute_oracle()
{
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> rows(1, 20), cols(1, 60);
    std::uniform_real_distribution<double> eta_dist(0.0, 3.0);
    double worst = 0.0;
    int objective_violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix b = random_matrix(rng, rows(rng), cols(rng));
        const double eta = eta_dist(rng);
        const Matrix z = soft_impute_step(b, eta);
        worst = std::max(worst, (z - shrink_oracle(b, eta)).cwiseAbs().maxCoeff());
        auto objective = [&](const Matrix& x) {
            return 0.5 * (b - x).squaredNorm() + eta * nuclear_norm(x);
        };
        const double at_z = objective(z);
        for (int k = 0; k < 10; ++k)
            if (objective(z + random_matrix(rng, b.rows(), b.cols(), 1e-3)) < at_z - 1e-12)
                ++objective_violations;
    }
    return {worst <= 1e-9 && objective_violations == 0,
            "max oracle deviation " + fmt(worst) + ", perturbations with lower objective " +
                std::to_string(objective_violations)};
}

Outcome primal_stationarity()
{
    std::mt19937_64 rng(303);
    double worst_res = 0.0, worst_mode = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int frames = 2 + trial % 5;
        const Index n = 5 + trial % 7;
        std::vector<Matrix3> rot;
        for (int f = 0; f < frames; ++f)
            rot.push_back(random_rotation(rng));
        const CameraPoseSet poses = poses_from_rotations(rot);
        const MeasurementMatrix w(random_matrix(rng, 2 * frames, n));
        const ShapeSequence s_bar(random_matrix(rng, 3 * frames, n));
        const ShapeSequence prior(random_matrix(rng, 3 * frames, n));
        const Matrix dq = random_matrix(rng, 3 * frames, n);
        SolverParams p;
        p.lambda = std::exp(std::normal_distribution<double>(0.0, 2.0)(rng));
        p.gamma = std::exp(std::normal_distribution<double>(0.0, 2.0)(rng));
        p.theta = std::exp(std::normal_distribution<double>(-2.0, 1.0)(rng));

        const Vector fw = random_matrix(rng, frames, 1).cwiseAbs();
        const Matrix pw = random_matrix(rng, 3 * frames, n).cwiseAbs();
        Matrix fw_dense(3 * frames, n);
        for (int f = 0; f < frames; ++f)
            fw_dense.middleRows(3 * f, 3).setConstant(fw(f));

        const std::pair<PriorSpec, Matrix> cases[] = {
            {PriorSpec::per_sequence(prior), Matrix::Ones(3 * frames, n)},
            {PriorSpec::per_frame(prior, fw), fw_dense},
            {PriorSpec::per_pixel(prior, pw), pw},
        };
        for (const auto& [spec, weights] : cases) {
            const ShapeSequence s = primal_step(w, poses, s_bar, dq, spec, p);
            // lambda R^T (R S - W) + gamma G (S - S_prior) + (S - S_bar) / theta + D_q = 0
            Matrix res(3 * frames, n);
            double scale = 0.0;
            for (int f = 0; f < frames; ++f) {
                const Matrix23& r = poses.rows2x3[f];
                res.middleRows(3 * f, 3) = p.lambda * r.transpose() * (r * s.frame(f) - w.frame(f));
                scale += (p.lambda * r.transpose() * w.frame(f)).squaredNorm();
            }
            res.array() += p.gamma * weights.array() * (s.data - prior.data).array();
            res += (s.data - s_bar.data) / p.theta + dq;
            scale = std::sqrt(scale) + (p.gamma * weights.cwiseProduct(prior.data)).norm() +
                    s_bar.data.norm() / p.theta + dq.norm();
            worst_res = std::max(worst_res, res.norm() / scale);
        }

        const ShapeSequence a = primal_step(w, poses, s_bar, dq, PriorSpec::per_sequence(prior), p);
        const ShapeSequence b = primal_step(w, poses, s_bar, dq, PriorSpec::per_frame(prior, Vector::Ones(frames)), p);
        const ShapeSequence c = primal_step(w, poses, s_bar, dq, PriorSpec::per_pixel(prior, Matrix::Ones(3 * frames, n)), p);
        const double mag = std::max(1.0, a.data.cwiseAbs().maxCoeff());
        worst_mode = std::max({worst_mode, (a.data - b.data).cwiseAbs().maxCoeff() / mag,
                               (a.data - c.data).cwiseAbs().maxCoeff() / mag});
    }
    return {worst_res <= 1e-8 && worst_mode <= 1e-10,
            "max relative residual " + fmt(worst_res) + ", max mode disagreement " + fmt(worst_mode)};
}

Outcome tv_machinery()
{
    std::mt19937_64 rng(404);
    double worst_adj = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int gw = 3 + trial % 9, gh = 2 + trial % 7;
        std::vector<std::uint8_t> grid(static_cast<std::size_t>(gw) * gh);
        for (auto& g : grid)
            g = std::uniform_int_distribution<int>(0, 4)(rng) != 0;
        grid[0] = 1;
        const PixelGridMask mask(gw, gh, grid);
        const Matrix s = random_matrix(rng, 6, mask.points());
        const Matrix qu = random_matrix(rng, 6, mask.points());
        const Matrix qv = random_matrix(rng, 6, mask.points());
        const GradientField g = gradient_field(s, mask);
        const double lhs = (g.du.array() * qu.array()).sum() + (g.dv.array() * qv.array()).sum();
        const double rhs = (s.array() * gradient_adjoint(qu, qv, mask).array()).sum();
        worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }

    SheetSceneConfig sc;
    sc.grid_w = 12;
    sc.grid_h = 12;
    sc.frames = 12;
    sc.render = false;
    const SyntheticScene scene = generate_sheet_scene(sc);
    const MeasurementMatrix w = center_measurements(scene.gt_w.data);
    SolverParams p;
    p.max_outer = 5;
    double worst_q = 0.0;
    long updates = 0;
    solve(w, PriorSpec::per_sequence(ShapeSequence::replicate(scene.gt_shapes.frame(0), 12)),
          &scene.mask, p, std::nullopt, [&](int, int, const DualField& q) {
              worst_q = std::max(worst_q, q.max_norm());
              ++updates;
          });
    return {worst_adj <= 1e-10 && updates > 0 && worst_q <= 1.0 + 1e-12,
            "max adjoint mismatch " + fmt(worst_adj) + ", max |q| " + fmt(worst_q, 15) + " over " +
                std::to_string(updates) + " dual updates"};
}

Outcome rigid_end_to_end()
{
    SheetSceneConfig sc;
    sc.grid_w = 20;
    sc.grid_h = 20;
    sc.frames = 30;
    sc.deform.phase_speed = 0.0;
    sc.render = false;
    const SyntheticScene scene = generate_sheet_scene(sc);
    const MeasurementMatrix w = center_measurements(scene.gt_w.data);
    SolverParams p;
    p.gamma = 0.0;
    const SolveResult r = solve(w, PriorSpec::none(), &scene.mask, p);
    const double e = mean_rms(r.shape, scene.gt_shapes, Alignment::procrustes_reflection).e3d;
    return {e <= 1e-3, "e3D " + fmt(e) + " after " + std::to_string(r.iterations.outer) + " outer iterations"};
}

Outcome occlusion_pipeline()
{
    SheetSceneConfig sc;  // 40 frames
    const SyntheticScene scene = generate_sheet_scene(sc);

    OccluderSpec spec;
    spec.pattern = OccluderPattern::box;
    spec.box_x = sc.margin + 6;
    spec.box_y = sc.margin + 6;
    spec.box_w = 8;
    spec.box_h = 8;
    spec.first_frame = 12;
    spec.last_frame = sc.frames;
    const OccludedScene occ = apply_occluder(scene, spec, CorruptionSpec{});
    const OcclusionTensor t = occlusion_tensor(occ.images, flows_from_tracks(scene, occ.dense_tracks), 1);
    double inside = 0.0, outside = 0.0;
    long n_in = 0, n_out = 0;
    // Maps live on the reference image: a reference pixel is inside when its
    // track lands under the occluder in that frame.
    for (int f = spec.first_frame - 1; f < sc.frames; ++f)
        for (Index p = 0; p < scene.mask.points(); ++p) {
            const int x = scene.mask.pixel_x(p), y = scene.mask.pixel_y(p);
            if (occ.corrupted(f, p)) {
                inside += t.maps[f](y, x);
                ++n_in;
            } else {
                outside += t.maps[f](y, x);
                ++n_out;
            }
        }
    inside /= static_cast<double>(n_in);
    outside /= static_cast<double>(n_out);
    const double contrast = outside > 0.0 ? inside / outside : std::numeric_limits<double>::infinity();
    const int fsp = select_prior_window(ti_series(t, &scene.mask));

    OccluderSpec none = spec;
    none.first_frame = sc.frames + 1;
    const OccludedScene clean = apply_occluder(scene, none, CorruptionSpec{});
    const OcclusionTensor tc = occlusion_tensor(clean.images, flows_from_tracks(scene, clean.dense_tracks), 1);
    const int fsp_clean = select_prior_window(ti_series(tc, &scene.mask));

    return {contrast >= 5.0 && fsp <= 12 && fsp_clean == sc.frames,
            "contrast " + fmt(contrast) + " (inside " + fmt(inside) + ", outside " + fmt(outside) +
                "), F_sp " + std::to_string(fsp) + ", clean F_sp " + std::to_string(fsp_clean) + "/" +
                std::to_string(sc.frames)};
}

// The benchmark report is shared by three criteria.
const BenchReport& bench_report()
{
    static const BenchReport report = run_benchmark(BenchConfig{});
    return report;
}

const BenchRow* find_row(const BenchReport& r, const std::string& configuration, PriorMode mode)
{
    for (const BenchRow& row : r.rows)
        if (row.configuration == configuration && row.mode == mode)
            return &row;
    return nullptr;
}

Outcome spva_beats_baseline()
{
    const BenchReport& r = bench_report();
    const BenchRow* base = find_row(r, "baseline", PriorMode::none);
    const BenchRow* spva = find_row(r, "spva", PriorMode::per_pixel);
    if (!base || !spva)
        return {false, "benchmark rows missing"};
    const double whole = spva->e3d_whole / base->e3d_whole;
    const double occluded = spva->e3d_occluded / base->e3d_occluded;
    return {whole <= 0.8 && occluded <= 0.8,
            "per_pixel/baseline whole " + fmt(spva->e3d_whole) + "/" + fmt(base->e3d_whole) + " = " +
                fmt(whole, 3) + ", occluded " + fmt(spva->e3d_occluded) + "/" + fmt(base->e3d_occluded) +
                " = " + fmt(occluded, 3) + " (bound 0.8)"};
}

Outcome interior_gamma()
{
    const BenchReport& r = bench_report();
    std::vector<const BenchRow*> sweep;
    for (const BenchRow& row : r.rows)
        if (row.configuration == "sweep")
            sweep.push_back(&row);
    if (sweep.size() < 3)
        return {false, "sweep has fewer than 3 points"};
    std::size_t best = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i)
        if (sweep[i]->e3d_whole < sweep[best]->e3d_whole)
            best = i;
    const bool interior = best > 0 && best + 1 < sweep.size();
    const double gap = sweep.back()->e3d_whole / sweep[best]->e3d_whole - 1.0;
    std::string curve;
    for (const BenchRow* row : sweep)
        curve += (curve.empty() ? "" : " ") + fmt(row->gamma, 3) + ":" + fmt(row->e3d_whole);
    return {interior && gap >= 0.10,
            "argmin gamma " + fmt(sweep[best]->gamma, 3) + (interior ? " (interior)" : " (endpoint)") +
                ", e3D at largest gamma exceeds the minimum by " + fmt(100.0 * gap, 3) +
                "% (need 10%); sweep " + curve};
}

Outcome gamma_saturation()
{
    SheetSceneConfig sc;
    sc.render = false;
    const SyntheticScene scene = generate_sheet_scene(sc);
    const MeasurementMatrix w = center_measurements(scene.gt_w.data);
    const RigidFactorization init = rigid_init(w);
    const ShapeSequence prior = ShapeSequence::replicate(init.shapes.frame(0), sc.frames);
    SolverParams p;
    p.lambda = 0.0;
    p.gamma = 1e12;
    p.max_outer = 5;
    const SolveResult r = solve(w, PriorSpec::per_pixel(prior, Matrix::Ones(3 * sc.frames, w.points())),
                                &scene.mask, p, Initialization{init.poses, init.shapes});
    const double rel = (r.shape.data - prior.data).norm() / prior.data.norm();
    return {rel <= 1e-3, "||S - S_prior|| / ||S_prior|| = " + fmt(rel)};
}

Outcome energy_trend()
{
    const BenchReport& r = bench_report();
    int bad = 0;
    std::string which;
    for (const BenchRow& row : r.rows)
        if (!row.energy_nonincreasing) {
            ++bad;
            which += " " + row.configuration + "/" + to_string(row.mode) + "@" + fmt(row.gamma, 3);
        }
    return {bad == 0, std::to_string(r.rows.size() - bad) + "/" + std::to_string(r.rows.size()) +
                          " benchmark runs nonincreasing within 1e-6 relative slack" +
                          (bad ? ";" + which : "")};
}

template <typename T>
bool same_bits(const T& a, const T& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(typename T::Scalar) * a.size()) == 0;
}

Outcome determinism_io()
{
    std::vector<std::string> failures;

    // Same seed and configuration twice.
    BenchConfig cfg;
    cfg.scene.grid_w = 14;
    cfg.scene.grid_h = 14;
    cfg.scene.frames = 20;
    cfg.occluder.last_frame = 16;
    cfg.solver.max_outer = 6;
    const BenchInputs a = prepare_bench_inputs(cfg);
    const BenchInputs b = prepare_bench_inputs(cfg);
    if (!same_bits(a.w.data, b.w.data) || !same_bits(a.prior.aligned_prior.data, b.prior.aligned_prior.data))
        failures.push_back("pipeline inputs differ");
    for (std::size_t f = 0; f < a.tensor.maps.size(); ++f)
        if (!same_bits(a.tensor.maps[f], b.tensor.maps[f]))
            failures.push_back("occlusion map " + std::to_string(f + 1) + " differs");
    const SolveResult ra = solve(a.w, bench_prior_spec(a, PriorMode::per_pixel), &a.scene.mask, cfg.solver,
                                 Initialization{a.init.poses, a.init.shapes});
    const SolveResult rb = solve(b.w, bench_prior_spec(b, PriorMode::per_pixel), &b.scene.mask, cfg.solver,
                                 Initialization{b.init.poses, b.init.shapes});
    if (!same_bits(ra.shape.data, rb.shape.data))
        failures.push_back("solver output differs");

    // Every writer and reader.
    const fs::path dir = fs::temp_directory_path() / ("spva_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    io::write_shapes(ra.shape, dir / "s.spvas");
    if (!same_bits(io::read_shapes(dir / "s.spvas").data, ra.shape.data))
        failures.push_back("SPVA-SHAPE");
    io::write_measurements(a.w, dir / "w.spvaw");
    const MeasurementMatrix w2 = io::read_measurements(dir / "w.spvaw");
    if (!same_bits(w2.data, a.w.data) || w2.reference_index != a.w.reference_index)
        failures.push_back("SPVA-W");
    const std::vector<FlowField> flows = flows_from_tracks(a.scene, a.occluded.dense_tracks);
    io::write_flo(flows[3], dir / "f.flo");
    const FlowField f2 = io::read_flo(dir / "f.flo");
    if (!same_bits(f2.u, flows[3].u) || !same_bits(f2.v, flows[3].v))
        failures.push_back("flo");
    io::write_mask(a.scene.mask, dir / "m.pgm");
    if (io::read_mask(dir / "m.pgm").active_grid() != a.scene.mask.active_grid())
        failures.push_back("mask");
    io::write_pgm(a.tensor.maps[15], dir / "o.pgm");
    if (!same_bits(io::read_pgm(dir / "o.pgm"), a.tensor.maps[15]))
        failures.push_back("pgm");
    io::write_ppm(a.occluded.images[12], dir / "i.ppm");
    const Image img = io::read_ppm(dir / "i.ppm");
    for (int c = 0; c < 3; ++c) {
        const Matrix stored = a.occluded.images[12].channels[c].array().round().max(0.0).min(255.0).matrix();
        if (!same_bits(img.channels[c], stored))
            failures.push_back("ppm channel " + std::to_string(c));
    }
    io::write_ply(ra.shape, 4, dir / "p.ply");
    {
        std::ifstream in(dir / "p.ply");
        std::string line;
        while (std::getline(in, line) && line != "end_header") {
        }
        double worst = 0.0;
        for (Index p = 0; p < ra.shape.points(); ++p) {
            Vector3 v;
            in >> v(0) >> v(1) >> v(2);
            worst = std::max(worst, ((v - ra.shape.frame(4).col(p)).array().abs() /
                                     ra.shape.frame(4).col(p).array().abs().max(1e-300)).maxCoeff());
        }
        if (!(worst <= 1e-8))
            failures.push_back("ply (relative error " + fmt(worst) + ")");
    }
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int k = 0; k < 10000; ++k) {
        double x;
        const std::uint64_t u = bits(rng);
        std::memcpy(&x, &u, sizeof(x));
        if (std::isfinite(x) && std::strtod(io::format_double(x).c_str(), nullptr) != x) {
            failures.push_back("csv number formatting");
            break;
        }
    }
    fs::remove_all(dir);

    std::string detail = failures.empty()
                             ? "repeat runs bitwise identical; SPVA-SHAPE, SPVA-W, flo, mask, pgm, csv lossless; ppm exact at 8 bits; ply within 9 digits"
                             : "failures:";
    for (const std::string& f : failures)
        detail += " " + f;
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> allow;
    app.add_option("--allow-fail", allow,
                   "Criterion ids whose FAIL does not change the exit status");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {"rotation_projection", 10.0, rotation_projection},
        {"soft_impute_oracle", 5.0, soft_impute_oracle},
        {"primal_stationarity", 0.0, primal_stationarity},
        {"tv_machinery", 0.0, tv_machinery},
        {"rigid_end_to_end", 60.0, rigid_end_to_end},
        {"occlusion_pipeline", 30.0, occlusion_pipeline},
        {"spva_beats_baseline", 300.0, spva_beats_baseline},
        {"interior_gamma", 0.0, interior_gamma},
        {"gamma_saturation", 0.0, gamma_saturation},
        {"energy_trend", 0.0, energy_trend},
        {"determinism_io", 0.0, determinism_io},
    };
    const std::set<std::string> known(allow.begin(), allow.end());
    for (const std::string& id : known) {
        bool exists = false;
        for (const Criterion& c : criteria)
            exists = exists || c.id == id;
        if (!exists) {
            std::cerr << "unknown criterion id '" << id << "'\n";
            return 2;
        }
    }

    int failed = 0, tolerated = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_seconds > 0.0 && seconds > c.budget_seconds) {
            o.pass = false;
            o.detail += "; runtime over the " + fmt(c.budget_seconds) + " s budget";
        }
        std::printf("%s %-20s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id.c_str(), seconds, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) {
            if (known.count(c.id))
                ++tolerated;
            else
                ++failed;
        }
    }
    std::printf("%zu criteria: %zu passed, %d failed (%d of them listed with --allow-fail)\n",
                criteria.size(), criteria.size() - failed - tolerated, failed + tolerated, tolerated);
    return failed == 0 ? 0 : 1;
}
