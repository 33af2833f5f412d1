// Command-line surface: simulate datasets, optimize pose graphs, score
// trajectories, run ablation/sweep studies, and render SVG plots.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bev/evaluation.hpp"
#include "bev/lanemap.hpp"
#include "bev/optimizer.hpp"
#include "bev/simulator.hpp"
#include "../src/text_io.hpp"

namespace fs = std::filesystem;
using bev::detail::fmt17;

namespace {

std::string join(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void write_trajectory(const bev::TrajectoryEstimate& t, const std::string& path) {
    auto f = bev::detail::open_out(path);
    f << "frame,x,z,theta\n";
    for (const auto& [frame, p] : t.poses)
        f << frame << ',' << fmt17(p.x) << ',' << fmt17(p.z) << ',' << fmt17(p.theta) << '\n';
}

bev::TrajectoryEstimate read_trajectory(const std::string& path, int track) {
    auto f = bev::detail::open_in(path);
    bev::TrajectoryEstimate t;
    t.track = track;
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
        if (++ln == 1 || line.empty()) continue;
        const auto v = bev::detail::split(line, ',');
        if (v.size() != 4) throw bev::ParseError(ln, path + ": expected 4 fields");
        t.poses[static_cast<int>(bev::detail::parse_int(v[0], ln))] =
            bev::Pose2(bev::detail::parse_double(v[1], ln), bev::detail::parse_double(v[2], ln),
                       bev::detail::parse_double(v[3], ln));
    }
    return t;
}

// Shared flag bundles ------------------------------------------------------

struct BuildFlags {
    std::string mode = "se2";
    bev::BuildConfig cfg;

    void attach(CLI::App* app) {
        app->add_option("--graph-mode", mode, "Graph mode: se2 or se3")
            ->check(CLI::IsMember({"se2", "se3"}));
        app->add_option("--cc-weight", cfg.cc_weight, "Odometry edge weight lambda");
        app->add_option("--vv-weight", cfg.vv_weight, "Vehicle motion edge weight lambda");
        app->add_option("--cp-weight", cfg.cp_weight, "Landmark anchor edge weight lambda");
        app->add_option("--cv-weight", cfg.cv_weight_override,
                        "Fixed detection edge weight lambda (negative: depth-gauged)");
        app->add_option("--fuse-d-near", cfg.fuse.d_near, "Full near-source trust depth (m)");
        app->add_option("--fuse-d-far", cfg.fuse.d_far, "Full far-source trust depth (m)");
        app->add_option("--assoc-gate", cfg.assoc_gate, "Lane sample association gate (m)");
        app->add_option("--max-iterations", cfg.solver.max_iterations, "Batch solver iterations");
        app->add_option("--incremental-iterations", cfg.solver.incremental_iterations,
                        "Solver iterations per incremental step");
        app->add_option("--window", cfg.solver.incremental_window,
                        "Incremental sliding window (frames)");
        app->add_option("--landmark-depth-max", cfg.solver.landmark_depth_max,
                        "Landmark depth threshold T (m)");
    }

    bev::BuildConfig resolve() const {
        bev::BuildConfig out = cfg;
        out.mode = mode == "se3" ? bev::GraphMode::SE3 : bev::GraphMode::SE2;
        return out;
    }
};

// simulate -----------------------------------------------------------------

struct SimulateArgs {
    std::string out;
    std::string kind = "straight";
    bev::ScenarioSpec spec;
    bev::NoiseModel noise;
};

int cmd_simulate(const SimulateArgs& a) {
    bev::ScenarioSpec spec = a.spec;
    spec.kind = a.kind == "arc"       ? bev::PathKind::Arc
                : a.kind == "s-curve" ? bev::PathKind::SCurve
                                      : bev::PathKind::Straight;
    const bev::Scenario s = bev::generate_scenario(spec);
    const bev::Dataset d = bev::corrupt(s, a.noise);
    bev::write_dataset(d, a.out);
    std::cout << "seed " << a.noise.seed << ": " << spec.frames << " frames, "
              << spec.vehicle_count << " vehicles, " << d.detections.size() << " detections, "
              << s.lane_samples.size() << " lane samples -> " << a.out << '\n';
    return 0;
}

// optimize -----------------------------------------------------------------

struct OptimizeArgs {
    std::string dataset;
    std::string out;
    std::string solve_mode = "batch";
    double grid_resolution = 0.5;
    double lane_depth_cutoff = 25.0;
    BuildFlags build;
};

void emit_lane_map(const bev::Dataset& d, const bev::TrajectoryEstimate& ego,
                   const OptimizeArgs& a) {
    std::vector<std::vector<Eigen::Vector2d>> per_frame(d.lane_obs.size());
    std::vector<bev::Pose2> poses;
    for (size_t k = 0; k < d.lane_obs.size(); ++k) {
        auto it = ego.poses.find(static_cast<int>(k));
        poses.push_back(it != ego.poses.end() ? it->second : bev::Pose2());
        for (const bev::LaneSample& s : d.lane_obs[k]) per_frame[k].push_back(s.point_cam);
    }
    const auto points = bev::aggregate_window(per_frame, poses, static_cast<int>(poses.size()),
                                              a.lane_depth_cutoff);
    Eigen::Vector2d lo(0, 0), hi(1, 1);
    if (!points.empty()) {
        lo = hi = points.front();
        for (const auto& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    const Eigen::Vector2d origin = lo - Eigen::Vector2d::Constant(a.grid_resolution);
    const int w = static_cast<int>(std::ceil((hi.x() - origin.x()) / a.grid_resolution)) + 1;
    const int h = static_cast<int>(std::ceil((hi.y() - origin.y()) / a.grid_resolution)) + 1;
    bev::OccupancyGrid grid = bev::rasterize(points, a.grid_resolution, origin, w, h);
    grid = bev::density_filter(grid, 3, 1);
    bev::write_grid(grid, join(a.out, "lane_map_grid.txt"));

    const auto lines = bev::hough_lines(grid, 90, a.grid_resolution, 5);
    std::vector<bev::LanePointCloud> lanes;
    if (!lines.empty())
        lanes = bev::lane_constraint_points(grid, lines, 2.0 * a.grid_resolution);
    bev::write_lane_points(lanes, join(a.out, "lane_points.csv"));
}

int cmd_optimize(const OptimizeArgs& a) {
    const bev::Dataset d = bev::read_dataset(a.dataset);
    const bev::BuildConfig cfg = a.build.resolve();
    fs::create_directories(a.out);

    bev::PoseGraph g(cfg.mode);
    bev::SolveReport report;
    if (a.solve_mode == "incremental") {
        for (const bev::FrameData& fd : bev::build_frames(d, cfg)) {
            bev::SolveReport step = bev::optimize_incremental(g, cfg.solver, fd);
            report.iterations += step.iterations;
            if (fd.frame == 0) report.initial_cost = step.initial_cost;
            report.final_cost = step.final_cost;
            report.converged = step.converged;
            for (bev::IterationRecord r : step.steps) {
                r.iteration = static_cast<int>(report.steps.size());
                report.steps.push_back(r);
            }
        }
    } else {
        g = bev::build_graph(d, cfg);
        report = bev::optimize_batch(g, cfg.solver);
    }

    bev::write_graph(g, join(a.out, "graph_final.txt"));
    bev::write_report(report, join(a.out, "report.csv"));
    bev::TrajectoryEstimate ego;
    for (const bev::TrajectoryEstimate& t : bev::trajectories_from_graph(g)) {
        if (t.track < 0) {
            ego = t;
            write_trajectory(t, join(a.out, "traj_ego.csv"));
        } else {
            write_trajectory(t, join(a.out, "traj_vehicle_" + std::to_string(t.track) + ".csv"));
        }
    }
    emit_lane_map(d, ego, a);
    std::cout << "final cost " << fmt17(report.final_cost) << " after " << report.iterations
              << " accepted steps -> " << a.out << '\n';
    return 0;
}

// evaluate / ablate --------------------------------------------------------

struct EvaluateArgs {
    std::string dataset;
    std::string results;
    BuildFlags build;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const bev::Dataset d = bev::read_dataset(a.dataset);
    const bev::BuildConfig cfg = a.build.resolve();
    fs::create_directories(a.results);

    std::vector<bev::AteRow> rows;
    const std::string graph_path = join(a.results, "graph_final.txt");
    if (fs::exists(graph_path)) {
        const bev::PoseGraph g = bev::read_graph(graph_path);
        for (const bev::TrajectoryEstimate& t : bev::trajectories_from_graph(g)) {
            const bev::TrajectoryEstimate gt =
                t.track < 0 ? bev::gt_ego_trajectory(d) : bev::gt_vehicle_trajectory(d, t.track);
            const bev::AteResult r = bev::ate_rms(t, gt);
            rows.push_back({"optimized", t.track, static_cast<int>(r.per_frame_errors.size()),
                            r.rms});
        }
    } else {
        rows = bev::score_configuration(d, cfg, "optimized");
    }
    bev::write_ate_rows(rows, join(a.results, "ate.csv"));
    for (const bev::AteRow& r : rows)
        std::cout << r.config << ' ' << bev::agent_name(r.track) << ": " << r.ate_rms_m << " m\n";
    return 0;
}

struct AblateArgs {
    std::string dataset;
    std::string results;
    bool families = false;
    bool cp_sweep = false;
    bool depth_sweep = false;
    bool lanes = false;
    bool runtime = false;
    bool incremental = false;
    BuildFlags build;
};

int cmd_ablate(const AblateArgs& a) {
    const bev::Dataset d = bev::read_dataset(a.dataset);
    const bev::BuildConfig cfg = a.build.resolve();
    fs::create_directories(a.results);
    bool any = false;
    if (a.families) {
        bev::write_ate_rows(bev::ablate_families(d, cfg), join(a.results, "families.csv"));
        any = true;
    }
    if (a.cp_sweep) {
        bev::write_ate_rows(bev::sweep_cp_weight(d, cfg), join(a.results, "cp_weight_sweep.csv"));
        any = true;
    }
    if (a.depth_sweep) {
        bev::write_ate_rows(bev::sweep_depth(d, cfg), join(a.results, "depth_sweep.csv"));
        any = true;
    }
    if (a.lanes) {
        const bev::LaneAblation l = bev::lane_ablation(d, cfg);
        std::vector<bev::AteRow> rows = l.before;
        rows.insert(rows.end(), l.after.begin(), l.after.end());
        bev::write_ate_rows(rows, join(a.results, "lane_ablation.csv"));
        any = true;
    }
    if (a.runtime) {
        bev::write_timing(bev::runtime_profile(d, cfg, a.incremental),
                          join(a.results, "timing.csv"));
        any = true;
    }
    if (!any) {
        std::cerr << "ablate: select at least one study "
                     "(--families/--cp-sweep/--depth-sweep/--lanes/--runtime)\n";
        return 2;
    }
    std::cout << "studies written to " << a.results << '\n';
    return 0;
}

// plot ---------------------------------------------------------------------

struct PlotArgs {
    std::string results;
    std::string dataset;  // optional, enables ground-truth overlay
};

std::string svg_polyline(const std::vector<Eigen::Vector2d>& pts, const char* color) {
    std::string s = "<polyline fill=\"none\" stroke=\"";
    s += color;
    s += "\" stroke-width=\"1\" points=\"";
    char buf[64];
    for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%.3f,%.3f ", p.x(), p.y());
        s += buf;
    }
    s += "\"/>\n";
    return s;
}

int cmd_plot(const PlotArgs& a) {
    // Trajectory figure: estimate polylines (plus ground truth when a
    // dataset directory is given), mapped into a fixed 800x600 canvas.
    std::vector<std::pair<std::string, bev::TrajectoryEstimate>> series;
    const std::string ego_path = join(a.results, "traj_ego.csv");
    if (!fs::exists(ego_path)) {
        std::cerr << "plot: missing " << ego_path << '\n';
        return 1;
    }
    series.emplace_back("#d62728", read_trajectory(ego_path, -1));
    std::vector<std::string> vehicle_files;
    for (const auto& entry : fs::directory_iterator(a.results)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("traj_vehicle_", 0) == 0) vehicle_files.push_back(entry.path().string());
    }
    std::sort(vehicle_files.begin(), vehicle_files.end());
    for (const std::string& p : vehicle_files) series.emplace_back("#1f77b4", read_trajectory(p, 0));
    if (!a.dataset.empty()) {
        const bev::Dataset d = bev::read_dataset(a.dataset);
        series.emplace_back("#2ca02c", bev::gt_ego_trajectory(d));
        for (const auto& [track, poses] : d.gt_vehicles)
            series.emplace_back("#9467bd", bev::gt_vehicle_trajectory(d, track));
    }

    Eigen::Vector2d lo(1e30, 1e30), hi(-1e30, -1e30);
    for (const auto& [color, t] : series)
        for (const auto& [frame, p] : t.poses) {
            lo = lo.cwiseMin(p.translation());
            hi = hi.cwiseMax(p.translation());
        }
    const Eigen::Vector2d span = (hi - lo).cwiseMax(1e-9);
    const double scale = std::min(760.0 / span.x(), 560.0 / span.y());
    auto to_canvas = [&](const bev::Pose2& p) {
        return Eigen::Vector2d(20.0 + (p.x - lo.x()) * scale,
                               580.0 - (p.z - lo.y()) * scale);
    };

    {
        auto f = bev::detail::open_out(join(a.results, "trajectories.svg"));
        f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
             "viewBox=\"0 0 800 600\">\n<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
        for (const auto& [color, t] : series) {
            std::vector<Eigen::Vector2d> pts;
            for (const auto& [frame, p] : t.poses) pts.push_back(to_canvas(p));
            f << svg_polyline(pts, color.c_str());
        }
        f << "</svg>\n";
    }

    const std::string timing_path = join(a.results, "timing.csv");
    if (fs::exists(timing_path)) {
        auto in = bev::detail::open_in(timing_path);
        std::string line;
        std::vector<double> times;
        int ln = 0;
        while (std::getline(in, line)) {
            if (++ln == 1 || line.empty()) continue;
            const auto v = bev::detail::split(line, ',');
            if (v.size() != 3) throw bev::ParseError(ln, "timing.csv: expected 3 fields");
            times.push_back(bev::detail::parse_double(v[2], ln));
        }
        double t_max = 1e-9;
        for (double t : times) t_max = std::max(t_max, t);
        std::vector<Eigen::Vector2d> pts;
        for (size_t i = 0; i < times.size(); ++i)
            pts.emplace_back(20.0 + 760.0 * i / std::max<size_t>(1, times.size() - 1),
                             580.0 - 560.0 * times[i] / t_max);
        auto f = bev::detail::open_out(join(a.results, "timing.svg"));
        f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
             "viewBox=\"0 0 800 600\">\n<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
        f << svg_polyline(pts, "#d62728");
        f << "</svg>\n";
    }
    std::cout << "plots written to " << a.results << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ground-plane multibody pose-graph SLAM toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value configuration file");
    app.allow_config_extras(false);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
    simulate->add_option("--out", sim.out, "Output dataset directory")->required();
    simulate->add_option("--kind", sim.kind, "Path kind: straight, arc or s-curve")
        ->check(CLI::IsMember({"straight", "arc", "s-curve"}));
    simulate->add_option("--frames", sim.spec.frames, "Frame count (>= 2)")
        ->check(CLI::Range(2, 1000000));
    simulate->add_option("--speed", sim.spec.speed, "Ego speed (m/frame)");
    simulate->add_option("--vehicles", sim.spec.vehicle_count, "Vehicle count");
    simulate->add_option("--lanes", sim.spec.lane_count, "Lane count");
    simulate->add_option("--lane-spacing", sim.spec.lane_spacing, "Lane spacing (m)");
    simulate->add_option("--arc-radius", sim.spec.arc_radius, "Arc radius (m)");
    simulate->add_option("--seed", sim.noise.seed, "Noise seed");
    simulate->add_option("--odo-sigma-t", sim.noise.odo_sigma_t,
                         "Odometry translation noise (m/step)");
    simulate->add_option("--odo-sigma-r", sim.noise.odo_sigma_r,
                         "Odometry rotation noise (rad/step)");
    simulate->add_option("--det-sigma", sim.noise.det_sigma, "Detection noise (m)");
    simulate->add_option("--odo-scale", sim.noise.odo_scale, "Odometry scale factor");
    simulate->add_option("--dropout", sim.noise.dropout_prob, "Detection dropout probability")
        ->check(CLI::Range(0.0, 1.0));

    OptimizeArgs opt;
    CLI::App* optimize = app.add_subcommand("optimize", "Build and solve the pose graph");
    optimize->add_option("--dataset", opt.dataset, "Dataset directory")->required();
    optimize->add_option("--out", opt.out, "Output directory")->required();
    optimize->add_option("--mode", opt.solve_mode, "Solve mode: batch or incremental")
        ->check(CLI::IsMember({"batch", "incremental"}));
    optimize->add_option("--grid-resolution", opt.grid_resolution, "Lane map cell size (m)");
    optimize->add_option("--lane-depth-cutoff", opt.lane_depth_cutoff,
                         "Lane map aggregation depth cutoff (m)");
    opt.build.attach(optimize);

    EvaluateArgs eval;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Score trajectories against ground truth");
    evaluate->add_option("--dataset", eval.dataset, "Dataset directory")->required();
    evaluate->add_option("--results", eval.results, "Results directory")->required();
    eval.build.attach(evaluate);

    AblateArgs abl;
    CLI::App* ablate = app.add_subcommand("ablate", "Run ablation and sweep studies");
    ablate->add_option("--dataset", abl.dataset, "Dataset directory")->required();
    ablate->add_option("--results", abl.results, "Results directory")->required();
    ablate->add_flag("--families", abl.families, "Per-constraint-family ablation");
    ablate->add_flag("--cp-sweep", abl.cp_sweep, "Landmark anchor weight sweep");
    ablate->add_flag("--depth-sweep", abl.depth_sweep, "Landmark depth threshold sweep");
    ablate->add_flag("--lanes", abl.lanes, "Lane-constraint before/after comparison");
    ablate->add_flag("--runtime", abl.runtime, "Runtime profile");
    ablate->add_flag("--incremental", abl.incremental, "Profile the incremental solver");
    abl.build.attach(ablate);

    PlotArgs plot_args;
    CLI::App* plot = app.add_subcommand("plot", "Render SVG plots from result CSVs");
    plot->add_option("--results", plot_args.results, "Results directory")->required();
    plot->add_option("--dataset", plot_args.dataset, "Dataset directory (ground-truth overlay)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*optimize) return cmd_optimize(opt);
        if (*evaluate) return cmd_evaluate(eval);
        if (*ablate) return cmd_ablate(abl);
        if (*plot) return cmd_plot(plot_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
