#include "bev/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "bev/optimizer.hpp"
#include "text_io.hpp"

namespace bev {

AteResult ate_rms(const TrajectoryEstimate& est, const TrajectoryEstimate& gt) {
    AteResult r;
    r.track = est.track;
    for (const auto& [frame, p] : est.poses) {
        auto it = gt.poses.find(frame);
        if (it == gt.poses.end()) continue;
        r.per_frame_errors.push_back((p.translation() - it->second.translation()).norm());
    }
    if (r.per_frame_errors.empty())
        throw NoMeasurementError("ate_rms: trajectories share no frames");
    double acc = 0.0;
    for (double e : r.per_frame_errors) acc += e * e;
    r.rms = std::sqrt(acc / r.per_frame_errors.size());
    return r;
}

namespace {

Pose2 agent_pose2(const Node& n) {
    if (const Pose2* p = std::get_if<Pose2>(&n.estimate)) return *p;
    return project_to_se2(std::get<Pose3>(n.estimate));
}

}  // namespace

std::vector<TrajectoryEstimate> trajectories_from_graph(const PoseGraph& g) {
    TrajectoryEstimate ego;
    std::map<int, TrajectoryEstimate> vehicles;
    for (const auto& [id, n] : g.nodes()) {
        if (n.kind == NodeKind::Camera) {
            ego.poses[n.frame] = agent_pose2(n);
        } else if (n.kind == NodeKind::Vehicle) {
            vehicles[n.track].track = n.track;
            vehicles[n.track].poses[n.frame] = agent_pose2(n);
        }
    }
    std::vector<TrajectoryEstimate> out;
    out.push_back(std::move(ego));
    for (auto& [track, t] : vehicles) out.push_back(std::move(t));
    return out;
}

TrajectoryEstimate gt_ego_trajectory(const Dataset& d) {
    TrajectoryEstimate t;
    for (size_t k = 0; k < d.gt_ego.size(); ++k) t.poses[static_cast<int>(k)] = d.gt_ego[k];
    return t;
}

TrajectoryEstimate gt_vehicle_trajectory(const Dataset& d, int track) {
    auto it = d.gt_vehicles.find(track);
    if (it == d.gt_vehicles.end())
        throw NoMeasurementError("no ground truth for track " + std::to_string(track));
    TrajectoryEstimate t;
    t.track = track;
    for (const auto& [frame, p] : it->second) t.poses[frame] = p;
    return t;
}

std::vector<TrajectoryEstimate> raw_trajectories(const Dataset& d, const BuildConfig& cfg) {
    const std::vector<Pose2> ego = dead_reckon(d);
    TrajectoryEstimate ego_t;
    for (size_t k = 0; k < ego.size(); ++k) ego_t.poses[static_cast<int>(k)] = ego[k];

    std::map<int, TrajectoryEstimate> vehicles;
    for (const Detection& det : d.detections) {
        std::optional<Eigen::Vector3d> from_bev;
        if (det.bev3d)
            from_bev = Eigen::Vector3d(det.bev3d->center_x, det.bev3d->center_z, det.bev3d->yaw);
        std::optional<Eigen::Vector2d> from_box;
        try {
            from_box = vehicle_bev_from_box2d(det, d.camera);
        } catch (const HorizonSingularityError&) {
        } catch (const BehindCameraError&) {
        }
        const double depth = det.depth ? *det.depth : (det.bev3d ? det.bev3d->center_z : 0.0);
        const VehicleMeasurement m = fuse_vehicle_measurements(from_bev, from_box, depth, cfg.fuse);
        const Pose2 rel(m.position.x(), m.position.y(), m.yaw.value_or(0.0));
        vehicles[det.track_id].track = det.track_id;
        vehicles[det.track_id].poses[det.frame] =
            compose(ego_t.poses.at(det.frame), rel);
    }

    std::vector<TrajectoryEstimate> out;
    out.push_back(std::move(ego_t));
    for (auto& [track, t] : vehicles) out.push_back(std::move(t));
    return out;
}

std::string agent_name(int track) {
    return track < 0 ? std::string("ego") : "vehicle_" + std::to_string(track);
}

void write_ate_rows(const std::vector<AteRow>& rows, const std::string& path) {
    auto f = detail::open_out(path);
    f << "config,agent,frames,ate_rms_m\n";
    for (const AteRow& r : rows)
        f << r.config << ',' << agent_name(r.track) << ',' << r.frames << ','
          << detail::fmt17(r.ate_rms_m) << '\n';
}

std::vector<AteRow> score_configuration(const Dataset& d, const BuildConfig& cfg,
                                        const std::string& config_name) {
    return score_graph_configuration(d, cfg, config_name, nullptr);
}

namespace {

std::vector<AteRow> score_trajectories(const Dataset& d,
                                       const std::vector<TrajectoryEstimate>& trajs,
                                       const std::string& config_name) {
    std::vector<AteRow> rows;
    for (const TrajectoryEstimate& t : trajs) {
        AteRow row;
        row.config = config_name;
        row.track = t.track;
        try {
            const TrajectoryEstimate gt =
                t.track < 0 ? gt_ego_trajectory(d) : gt_vehicle_trajectory(d, t.track);
            const AteResult r = ate_rms(t, gt);
            row.frames = static_cast<int>(r.per_frame_errors.size());
            row.ate_rms_m = r.rms;
        } catch (const NoMeasurementError&) {
            row.ate_rms_m = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<AteRow> score_graph_configuration(const Dataset& d, const BuildConfig& cfg,
                                              const std::string& config_name,
                                              EdgeKind* zeroed_family) {
    PoseGraph g = build_graph(d, cfg);
    if (zeroed_family)
        for (Edge& e : g.edges())
            if (e.kind == *zeroed_family) e.scale = 0.0;
    try {
        optimize_batch(g, cfg.solver);
    } catch (const NumericalFailureError&) {
        std::vector<AteRow> rows;
        AteRow row;
        row.config = config_name;
        row.ate_rms_m = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(row));
        return rows;
    }
    return score_trajectories(d, trajectories_from_graph(g), config_name);
}

std::vector<AteRow> ablate_families(const Dataset& d, const BuildConfig& base) {
    std::vector<AteRow> rows;
    const std::pair<EdgeKind, const char*> families[] = {
        {EdgeKind::CC, "without_cc"},
        {EdgeKind::VV, "without_vv"},
        {EdgeKind::CV, "without_cv"},
        {EdgeKind::CP, "without_cp"},
    };
    for (auto [kind, name] : families) {
        auto sub = score_graph_configuration(d, base, name, &kind);
        rows.insert(rows.end(), sub.begin(), sub.end());
    }
    auto all = score_graph_configuration(d, base, "with_all", nullptr);
    rows.insert(rows.end(), all.begin(), all.end());
    return rows;
}

std::vector<AteRow> sweep_cp_weight(const Dataset& d, const BuildConfig& base) {
    std::vector<AteRow> rows;
    const std::pair<double, const char*> settings[] = {
        {1000.0, "cp_weight_low"},
        {10000.0, "cp_weight_medium"},
        {100000.0, "cp_weight_high"},
    };
    for (auto [w, name] : settings) {
        BuildConfig cfg = base;
        cfg.cp_weight = w;
        auto sub = score_configuration(d, cfg, name);
        rows.insert(rows.end(), sub.begin(), sub.end());
    }
    return rows;
}

std::vector<AteRow> sweep_depth(const Dataset& d, const BuildConfig& base) {
    std::vector<AteRow> rows;
    const std::pair<double, const char*> settings[] = {
        {12.0, "depth_12"},
        {15.0, "depth_15"},
        {18.0, "depth_18"},
        {20.0, "depth_20"},
        {std::numeric_limits<double>::infinity(), "depth_inf"},
    };
    for (auto [t, name] : settings) {
        BuildConfig cfg = base;
        cfg.solver.landmark_depth_max = t;
        auto sub = score_configuration(d, cfg, name);
        rows.insert(rows.end(), sub.begin(), sub.end());
    }
    return rows;
}

LaneAblation lane_ablation(const Dataset& d, const BuildConfig& base) {
    bool has_lanes = false;
    for (const auto& frame : d.lane_obs)
        if (!frame.empty()) has_lanes = true;
    if (!has_lanes) throw NoMeasurementError("lane_ablation: dataset has no lane samples");

    LaneAblation out;
    EdgeKind cp = EdgeKind::CP;
    out.before = score_graph_configuration(d, base, "before_lane_constraints", &cp);
    out.after = score_graph_configuration(d, base, "after_lane_constraints", nullptr);
    return out;
}

std::vector<TimingRow> runtime_profile(const Dataset& d, const BuildConfig& cfg,
                                       bool incremental) {
    using clock = std::chrono::steady_clock;
    std::vector<TimingRow> out;
    if (!incremental) {
        PoseGraph g = build_graph(d, cfg);
        const auto t0 = clock::now();
        optimize_batch(g, cfg.solver);
        const auto t1 = clock::now();
        TimingRow row;
        row.frame = static_cast<int>(d.gt_ego.size()) - 1;
        row.objects = static_cast<int>(d.gt_vehicles.size());
        row.time_s = std::chrono::duration<double>(t1 - t0).count();
        out.push_back(row);
        return out;
    }
    PoseGraph g(cfg.mode);
    for (const FrameData& fd : build_frames(d, cfg)) {
        const auto t0 = clock::now();
        optimize_incremental(g, cfg.solver, fd);
        const auto t1 = clock::now();
        TimingRow row;
        row.frame = fd.frame;
        row.objects = static_cast<int>(fd.vehicles.size());
        row.time_s = std::chrono::duration<double>(t1 - t0).count();
        out.push_back(row);
    }
    return out;
}

void write_timing(const std::vector<TimingRow>& rows, const std::string& path) {
    auto f = detail::open_out(path);
    f << "frame,objects,time_s\n";
    for (const TimingRow& r : rows)
        f << r.frame << ',' << r.objects << ',' << detail::fmt17(r.time_s) << '\n';
}

}  // namespace bev
