#include "bev/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "text_io.hpp"

namespace fs = std::filesystem;

namespace bev {

namespace {

constexpr NodeId kVehicleNodeBase = 1'000'000;
constexpr NodeId kLandmarkNodeBase = 100'000'000;
// Lane-sample noise relative to det_sigma (lane markings localize far
// better than full 3D objects, but not perfectly).
constexpr double kLaneNoiseFraction = 0.05;
// Camera-frame depth up to which lane samples are promoted to landmark
// anchors (near-field points are the reliably localized ones).
constexpr double kCpPickDepth = 5.0;

NodeId vehicle_node_id(int track, int frame) {
    return kVehicleNodeBase + static_cast<NodeId>(track) * 100'000 + frame;
}

struct PathNode {
    Pose2 pose;
};

// Polygonal constant-speed path; consecutive headings differ by exactly
// speed/radius on arcs.
std::vector<Pose2> make_path(const ScenarioSpec& spec, int nodes) {
    std::vector<Pose2> path;
    path.reserve(nodes);
    Pose2 p(0.0, 0.0, 0.0);
    for (int k = 0; k < nodes; ++k) {
        path.push_back(p);
        double rate = 0.0;
        if (spec.kind == PathKind::Arc) rate = spec.speed / spec.arc_radius;
        if (spec.kind == PathKind::SCurve)
            rate = (k < spec.frames / 2 ? 1.0 : -1.0) * spec.speed / spec.arc_radius;
        const Eigen::Vector2d t = p.translation() + rot2(p.theta) * Eigen::Vector2d(0.0, spec.speed);
        p = Pose2(t.x(), t.y(), p.theta + rate);
    }
    return path;
}

Pose2 offset_pose(const Pose2& base, double lateral) {
    return compose(base, Pose2(lateral, 0.0, 0.0));
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
    if (spec.frames < 2) throw Error("scenario needs at least 2 frames");
    if (spec.speed <= 0.0) throw Error("scenario speed must be positive");
    if (spec.vehicle_count < 0 || spec.lane_count < 1 || spec.lane_spacing <= 0.0 ||
        spec.arc_radius <= 0.0 || spec.lane_sample_spacing <= 0.0)
        throw Error("invalid scenario spec");

    Scenario s;
    s.spec = spec;
    s.camera = CameraModel::pinhole(700.0, 700.0, 600.0, 200.0, 1.5);

    int max_lead = 0;
    std::vector<int> leads(spec.vehicle_count);
    std::vector<double> laterals(spec.vehicle_count);
    for (int j = 0; j < spec.vehicle_count; ++j) {
        leads[j] = std::max(1, static_cast<int>(std::lround((8.0 + 3.0 * j) / spec.speed)));
        laterals[j] = spec.lane_spacing * (1.0 + j / 2) * (j % 2 == 0 ? 1.0 : -1.0) * 0.5;
        max_lead = std::max(max_lead, leads[j]);
    }

    const int extended = spec.frames + max_lead + 1;
    const std::vector<Pose2> path = make_path(spec, extended);
    s.ego_gt.assign(path.begin(), path.begin() + spec.frames);

    for (int j = 0; j < spec.vehicle_count; ++j) {
        auto& track = s.vehicles[j];
        for (int k = 0; k < spec.frames; ++k)
            track.emplace_back(k, offset_pose(path[k + leads[j]], laterals[j]));
    }

    for (int i = 0; i < spec.lane_count; ++i) {
        const double lateral = (i - 0.5 * (spec.lane_count - 1)) * spec.lane_spacing;
        std::vector<Eigen::Vector2d> lane;
        lane.reserve(path.size());
        for (const Pose2& p : path) lane.push_back(offset_pose(p, lateral).translation());
        s.lanes.push_back(std::move(lane));
    }

    // Fixed world sample points every lane_sample_spacing of arc length.
    for (size_t li = 0; li < s.lanes.size(); ++li) {
        const auto& lane = s.lanes[li];
        double next_s = 0.0, walked = 0.0;
        for (size_t v = 0; v + 1 < lane.size(); ++v) {
            const Eigen::Vector2d seg = lane[v + 1] - lane[v];
            const double len = seg.norm();
            while (next_s <= walked + len) {
                const double t = (next_s - walked) / len;
                s.lane_samples.push_back(lane[v] + t * seg);
                s.lane_of_sample.push_back(static_cast<int>(li));
                next_s += spec.lane_sample_spacing;
            }
            walked += len;
        }
    }
    return s;
}

Dataset corrupt(const Scenario& s, const NoiseModel& n) {
    Dataset d;
    d.camera = s.camera;
    d.ego_start = s.ego_gt.front();
    d.gt_ego = s.ego_gt;
    d.gt_vehicles = s.vehicles;
    d.spec = s.spec;
    d.noise = n;

    Pcg64 rng(n.seed);

    const int frames = s.spec.frames;
    for (int k = 0; k + 1 < frames; ++k) {
        const Pose2 rel = relative(s.ego_gt[k], s.ego_gt[k + 1]);
        d.odometry.emplace_back(rel.x * n.odo_scale + n.odo_sigma_t * rng.normal(),
                                rel.z * n.odo_scale + n.odo_sigma_t * rng.normal(),
                                rel.theta + n.odo_sigma_r * rng.normal());
    }

    const double fx = s.camera.k(0, 0), fy = s.camera.k(1, 1);
    const double cx = s.camera.k(0, 2), cy = s.camera.k(1, 2);
    for (int k = 0; k < frames; ++k) {
        for (const auto& [track, poses] : s.vehicles) {
            const Pose2& v = poses[k].second;
            const Pose2 rel = relative(s.ego_gt[k], v);
            if (rel.z < 0.5) continue;  // behind or at the camera
            const bool dropped = rng.uniform() < n.dropout_prob;
            if (dropped) continue;
            // Two independently noised localization sources.
            const double px1 = rel.x + n.det_sigma * rng.normal();
            const double pz1 = rel.z + n.det_sigma * rng.normal();
            double px2 = rel.x + n.det_sigma * rng.normal();
            double pz2 = rel.z + n.det_sigma * rng.normal();
            if (pz2 < 0.5) pz2 = 0.5;

            Detection det;
            det.frame = k;
            det.track_id = track;
            Detection::Bev3d b;
            b.center_x = px1;
            b.center_z = pz1;
            b.yaw = rel.theta;
            b.length = 4.0;
            b.width = 1.8;
            det.bev3d = b;
            det.depth = rel.z;

            const double u = fx * px2 / pz2 + cx;
            const double v_bottom = fy * s.camera.h / pz2 + cy;
            const double half_w = fx * 0.9 / pz2;
            det.box2d = Eigen::Vector4d(u - half_w, v_bottom - fy * 1.5 / pz2, u + half_w,
                                        v_bottom);
            d.detections.push_back(det);
        }
    }

    // Lane observations stand in for a lane-segmentation frontend. Lane
    // markings are ground-level, high-contrast features, so their
    // localization noise is a fraction of the full-object detection noise.
    double lane_frac = kLaneNoiseFraction;
    if (const char* e = std::getenv("BEV_LANE_FRAC")) lane_frac = std::atof(e);  // scan hook
    const double lane_sigma = lane_frac * n.det_sigma;
    d.lane_obs.resize(frames);
    for (int k = 0; k < frames; ++k) {
        // Whole-frame lane outage: occlusion by traffic or shadow takes out
        // the lane frontend for the entire image, not single points.
        if (rng.uniform() < n.dropout_prob) continue;
        const Eigen::Matrix2d rt = rot2(s.ego_gt[k].theta).transpose();
        const Eigen::Vector2d t = s.ego_gt[k].translation();
        for (const Eigen::Vector2d& w : s.lane_samples) {
            Eigen::Vector2d c = rt * (w - t);
            if (c.y() < 0.5 || c.y() > s.spec.lane_visibility_depth) continue;
            if (std::abs(c.x()) > 0.85 * c.y()) continue;  // rough field of view
            c.x() += lane_sigma * rng.normal();
            c.y() += lane_sigma * rng.normal();
            d.lane_obs[k].push_back({c});
        }
    }
    return d;
}

std::vector<Pose2> dead_reckon(const Dataset& d) {
    std::vector<Pose2> out;
    out.reserve(d.gt_ego.size());
    Pose2 p = d.ego_start;
    out.push_back(p);
    for (const Pose2& step : d.odometry) {
        p = compose(p, step);
        out.push_back(p);
    }
    return out;
}

namespace {

struct LaneTrack {
    NodeId landmark;
    int point_index;
    Eigen::Vector2d last_cam;
};

/// Chained frame-to-frame association of lane samples; returns per frame
/// the (landmark id, point index, camera point) triples.
struct AssociatedLanes {
    struct Obs {
        NodeId landmark;
        int point_index;
        Eigen::Vector2d point_cam;
    };
    std::vector<std::vector<Obs>> per_frame;
};

AssociatedLanes associate_lanes(const Dataset& d, double gate, double odo_scale = 1.0) {
    AssociatedLanes out;
    const int frames = static_cast<int>(d.gt_ego.size());
    out.per_frame.resize(frames);
    std::vector<LaneTrack> active;
    int next_index = 0;
    for (int k = 0; k < frames; ++k) {
        // Predict active samples into the current camera frame with the
        // (scale-corrected) odometry step; lane samples are metric, so a
        // raw scale-ambiguous translation would bias the prediction.
        if (k > 0) {
            const Pose2& step = d.odometry[k - 1];
            const Eigen::Matrix2d rt = rot2(step.theta).transpose();
            for (LaneTrack& t : active)
                t.last_cam = rt * (t.last_cam - odo_scale * step.translation());
        }
        // Whole-frame outages: keep predicting existing tracks so the
        // map survives short occlusions instead of fragmenting.
        if (k < static_cast<int>(d.lane_obs.size()) && d.lane_obs[k].empty()) continue;
        std::vector<LaneTrack> next_active;
        std::vector<bool> used(active.size(), false);
        for (const LaneSample& obs : k < static_cast<int>(d.lane_obs.size())
                                         ? d.lane_obs[k]
                                         : std::vector<LaneSample>{}) {
            int best = -1;
            double best_d = gate;
            for (size_t i = 0; i < active.size(); ++i) {
                if (used[i]) continue;
                const double dist = (active[i].last_cam - obs.point_cam).norm();
                if (dist <= best_d) {
                    best_d = dist;
                    best = static_cast<int>(i);
                }
            }
            LaneTrack t;
            if (best >= 0) {
                used[best] = true;
                t = active[best];
            } else {
                t.point_index = next_index++;
                t.landmark = kLandmarkNodeBase + t.point_index;
            }
            t.last_cam = obs.point_cam;
            next_active.push_back(t);
            out.per_frame[k].push_back({t.landmark, t.point_index, obs.point_cam});
        }
        active = std::move(next_active);
    }
    return out;
}

/// Reference camera poses for measurement construction: odometry chaining
/// refined by rigid frame-to-frame alignment (Procrustes with known
/// correspondences) of shared lane samples. Lane samples are metric, so the
/// refined steps are metric and nearly drift-free wherever samples overlap;
/// odometry fills the gaps. Pure function of the dataset.
std::vector<Pose2> reference_poses(const Dataset& d, const AssociatedLanes& lanes,
                                   double odo_scale) {
    const int frames = static_cast<int>(d.gt_ego.size());
    std::vector<Pose2> out;
    out.reserve(frames);
    Pose2 p = d.ego_start;
    out.push_back(p);
    // Align against the most recent frame that had lane samples so whole-frame
    // detection outages are bridged by a single relative estimate instead of
    // accumulating raw odometry noise across the gap.
    int base = lanes.per_frame.empty() || lanes.per_frame[0].empty() ? -1 : 0;
    Pose2 acc;  // odometry composed from `base` to the current frame
    for (int k = 1; k < frames; ++k) {
        Pose2 odo = d.odometry[k - 1];
        odo.x *= odo_scale;
        odo.z *= odo_scale;
        Pose2 step = base >= 0 ? compose(acc, odo) : odo;
        std::map<NodeId, Eigen::Vector2d> prev;
        if (base >= 0)
            for (const auto& o : lanes.per_frame[base]) prev[o.landmark] = o.point_cam;
        std::vector<Eigen::Vector2d> a, b;  // base-frame / cur-frame pairs
        for (const auto& o : lanes.per_frame[k]) {
            auto it = prev.find(o.landmark);
            if (it == prev.end()) continue;
            a.push_back(it->second);
            b.push_back(o.point_cam);
        }
        if (!a.empty()) {
            Eigen::Vector2d ma = Eigen::Vector2d::Zero(), mb = Eigen::Vector2d::Zero();
            for (size_t i = 0; i < a.size(); ++i) {
                ma += a[i];
                mb += b[i];
            }
            ma /= static_cast<double>(a.size());
            mb /= static_cast<double>(b.size());
            double theta = step.theta;
            if (a.size() >= 2) {
                // argmax_theta sum a_i . R(theta) b_i over centered pairs.
                double sin_acc = 0.0, cos_acc = 0.0;
                for (size_t i = 0; i < a.size(); ++i) {
                    const Eigen::Vector2d ca = a[i] - ma, cb = b[i] - mb;
                    cos_acc += ca.dot(cb);
                    sin_acc += ca.y() * cb.x() - ca.x() * cb.y();
                }
                if (std::hypot(sin_acc, cos_acc) > 1e-12) theta = std::atan2(sin_acc, cos_acc);
            }
            const Eigen::Vector2d t = ma - rot2(theta) * mb;
            step = Pose2(t.x(), t.y(), theta);
        }
        p = base >= 0 ? compose(out[base], step) : compose(p, step);
        out.push_back(p);
        if (k < static_cast<int>(lanes.per_frame.size()) && !lanes.per_frame[k].empty()) {
            base = k;
            acc = Pose2();
        } else if (base >= 0) {
            acc = compose(acc, odo);
        }
    }
    return out;
}

}  // namespace

std::vector<FrameData> build_frames(const Dataset& d, const BuildConfig& cfg) {
    if (d.gt_ego.empty()) throw Error("empty dataset");
    const int frames = static_cast<int>(d.gt_ego.size());

    // Group detections by frame, then track (file order is already sorted).
    std::map<int, std::vector<const Detection*>> by_frame;
    for (const Detection& det : d.detections) by_frame[det.frame].push_back(&det);
    // Latest detection frame per track, for VV chaining.
    std::map<int, std::vector<int>> track_frames;
    for (const Detection& det : d.detections) track_frames[det.track_id].push_back(det.frame);

    int anchor_stride = 1;
    if (const char* e = std::getenv("BEV_ANCHOR_STRIDE")) anchor_stride = std::atoi(e);  // scan hook

    // Monocular odometry is scale-ambiguous; pull it to metric scale with
    // the moving-median ratio against lane-derived metric step lengths
    // before it enters the graph.
    double odo_metric_scale = 1.0;
    if (!d.odometry.empty()) {
        std::vector<double> raw;
        raw.reserve(d.odometry.size());
        for (const Pose2& step : d.odometry) raw.push_back(step.translation().norm());
        try {
            const double s = estimate_scale(raw, metric_step_lengths_from_lanes(d, cfg), 11);
            if (std::isfinite(s) && s > 1e-6) odo_metric_scale = s;
        } catch (const Error&) {
        }
    }

    // Second association pass with scale-corrected prediction; the first
    // (raw) pass inside the scale estimate is robust enough for the median.
    const AssociatedLanes lanes = associate_lanes(d, cfg.assoc_gate, odo_metric_scale);
    const std::vector<Pose2> ref = reference_poses(d, lanes, odo_metric_scale);

    // Measured world pose per (track, frame): reference camera pose composed
    // with the fused detection; source of the constant-velocity VV
    // measurements so edges do not depend on optimization state.
    std::map<int, std::map<int, Pose2>> meas_world;
    // Recent measured steps per track; the constant-velocity measurement is
    // their mean, which is far less noisy than any single measured step.
    std::map<int, std::vector<Pose2>> meas_steps;
    constexpr int kVelocityWindow = 4;

    std::vector<FrameData> out;
    out.reserve(frames);
    for (int k = 0; k < frames; ++k) {
        FrameData fd;
        fd.frame = k;
        fd.camera_node = k;
        fd.prev_camera_node = k - 1;
        fd.has_odometry = k > 0;
        if (k > 0) {
            fd.odometry = d.odometry[k - 1];
            fd.odometry.x *= odo_metric_scale;
            fd.odometry.z *= odo_metric_scale;
        }
        fd.initial_pose = d.ego_start;
        fd.reference_pose = ref[k];
        fd.cc_lambda = cfg.cc_weight;
        fd.vv_lambda = cfg.vv_weight;
        fd.cp_lambda = cfg.cp_weight;

        auto it = by_frame.find(k);
        if (it != by_frame.end()) {
            for (const Detection* det : it->second) {
                std::optional<Eigen::Vector3d> from_bev;
                if (det->bev3d)
                    from_bev = Eigen::Vector3d(det->bev3d->center_x, det->bev3d->center_z,
                                               det->bev3d->yaw);
                std::optional<Eigen::Vector2d> from_box;
                try {
                    from_box = vehicle_bev_from_box2d(*det, d.camera);
                } catch (const HorizonSingularityError&) {
                } catch (const BehindCameraError&) {
                }
                const double depth = det->depth ? *det->depth
                                                : (det->bev3d ? det->bev3d->center_z : 0.0);
                const VehicleMeasurement m =
                    fuse_vehicle_measurements(from_bev, from_box, depth, cfg.fuse);

                FrameData::VehicleObs obs;
                obs.node = vehicle_node_id(det->track_id, k);
                obs.track = det->track_id;
                obs.position = m.position;
                obs.yaw = m.yaw;
                obs.lambda = cfg.cv_weight_override >= 0.0 ? cfg.cv_weight_override : m.weight;
                const auto& tf = track_frames[det->track_id];
                if (std::binary_search(tf.begin(), tf.end(), k - 1)) {
                    obs.prev_node = vehicle_node_id(det->track_id, k - 1);
                    if (std::binary_search(tf.begin(), tf.end(), k - 2))
                        obs.prev_prev_node = vehicle_node_id(det->track_id, k - 2);
                }

                auto& hist = meas_world[det->track_id];
                auto& steps = meas_steps[det->track_id];
                const Pose2 cur = compose(
                    ref[k], Pose2(m.position.x(), m.position.y(), m.yaw.value_or(0.0)));
                if (obs.prev_node >= 0) {
                    // Constant-velocity model: predict the step from the mean
                    // of recent measured steps; for the first pair, fall back
                    // to the current step itself.
                    if (!steps.empty()) {
                        double sx = 0.0, sz = 0.0, st = 0.0;
                        const size_t first =
                            steps.size() > kVelocityWindow ? steps.size() - kVelocityWindow : 0;
                        for (size_t i = first; i < steps.size(); ++i) {
                            sx += steps[i].x;
                            sz += steps[i].z;
                            st += steps[i].theta;
                        }
                        const double inv = 1.0 / static_cast<double>(steps.size() - first);
                        obs.vv_measurement = Pose2(sx * inv, sz * inv, st * inv);
                    } else {
                        obs.vv_measurement = relative(hist.at(k - 1), cur);
                    }
                    steps.push_back(relative(hist.at(k - 1), cur));
                }
                hist[k] = cur;
                fd.vehicles.push_back(obs);
            }
        }

        for (const auto& lo : lanes.per_frame[k]) {
            // Only near-field lane points become landmark constraints; far
            // samples are used for frame-to-frame tracking only, where their
            // growing localization error would otherwise leak into anchors.
            if (lo.point_cam.y() > kCpPickDepth) continue;
            if (lo.point_index % anchor_stride != 0) continue;
            fd.lanes.push_back({lo.landmark, lo.point_index, lo.point_cam});
        }
        out.push_back(std::move(fd));
    }
    return out;
}

PoseGraph build_graph(const Dataset& d, const BuildConfig& cfg) {
    PoseGraph g(cfg.mode);
    for (const FrameData& fd : build_frames(d, cfg)) append_frame(g, fd, cfg.solver);
    return g;
}

std::vector<double> metric_step_lengths_from_lanes(const Dataset& d, const BuildConfig& cfg) {
    const AssociatedLanes lanes = associate_lanes(d, cfg.assoc_gate);
    std::vector<double> out;
    const int frames = static_cast<int>(d.gt_ego.size());
    for (int k = 0; k + 1 < frames; ++k) {
        std::map<NodeId, Eigen::Vector2d> prev;
        for (const auto& o : lanes.per_frame[k]) prev[o.landmark] = o.point_cam;
        const Eigen::Matrix2d r_rel = rot2(d.odometry[k].theta);
        Eigen::Vector2d sum(0.0, 0.0);
        int count = 0;
        for (const auto& o : lanes.per_frame[k + 1]) {
            auto it = prev.find(o.landmark);
            if (it == prev.end()) continue;
            sum += it->second - r_rel * o.point_cam;
            ++count;
        }
        out.push_back(count > 0 ? (sum / count).norm() : 0.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

using detail::fmt17;

std::string path_join(const std::string& dir, const char* file) {
    return (fs::path(dir) / file).string();
}

const char* kind_name(PathKind k) {
    switch (k) {
        case PathKind::Straight: return "straight";
        case PathKind::Arc: return "arc";
        case PathKind::SCurve: return "s-curve";
    }
    return "?";
}

PathKind kind_from_name(const std::string& s) {
    if (s == "straight") return PathKind::Straight;
    if (s == "arc") return PathKind::Arc;
    if (s == "s-curve") return PathKind::SCurve;
    throw Error("unknown path kind " + s);
}

}  // namespace

void write_dataset(const Dataset& d, const std::string& dir) {
    fs::create_directories(dir);
    write_camera(d.camera, path_join(dir, "camera.txt"));

    {
        auto f = detail::open_out(path_join(dir, "odometry.csv"));
        f << "frame,dx,dz,dtheta\n";
        for (size_t k = 0; k < d.odometry.size(); ++k)
            f << k << ',' << fmt17(d.odometry[k].x) << ',' << fmt17(d.odometry[k].z) << ','
              << fmt17(d.odometry[k].theta) << '\n';
    }
    write_detections(d.detections, path_join(dir, "detections.csv"));
    {
        auto f = detail::open_out(path_join(dir, "lanes.csv"));
        f << "frame,x_cam,z_cam\n";
        for (size_t k = 0; k < d.lane_obs.size(); ++k)
            for (const LaneSample& s : d.lane_obs[k])
                f << k << ',' << fmt17(s.point_cam.x()) << ',' << fmt17(s.point_cam.y()) << '\n';
    }
    {
        auto f = detail::open_out(path_join(dir, "gt_ego.csv"));
        f << "frame,x,z,theta\n";
        for (size_t k = 0; k < d.gt_ego.size(); ++k)
            f << k << ',' << fmt17(d.gt_ego[k].x) << ',' << fmt17(d.gt_ego[k].z) << ','
              << fmt17(d.gt_ego[k].theta) << '\n';
    }
    {
        auto f = detail::open_out(path_join(dir, "gt_vehicles.csv"));
        f << "frame,track,x,z,theta\n";
        for (const auto& [track, poses] : d.gt_vehicles)
            for (const auto& [frame, p] : poses)
                f << frame << ',' << track << ',' << fmt17(p.x) << ',' << fmt17(p.z) << ','
                  << fmt17(p.theta) << '\n';
    }
    {
        auto f = detail::open_out(path_join(dir, "meta.txt"));
        f << "rng=pcg64-xsl-rr-128-64/box-muller\n";
        f << "seed=" << d.noise.seed << '\n';
        f << "kind=" << kind_name(d.spec.kind) << '\n';
        f << "frames=" << d.spec.frames << '\n';
        f << "speed=" << fmt17(d.spec.speed) << '\n';
        f << "vehicles=" << d.spec.vehicle_count << '\n';
        f << "lanes=" << d.spec.lane_count << '\n';
        f << "lane_spacing=" << fmt17(d.spec.lane_spacing) << '\n';
        f << "arc_radius=" << fmt17(d.spec.arc_radius) << '\n';
        f << "lane_sample_spacing=" << fmt17(d.spec.lane_sample_spacing) << '\n';
        f << "lane_visibility_depth=" << fmt17(d.spec.lane_visibility_depth) << '\n';
        f << "odo_sigma_t=" << fmt17(d.noise.odo_sigma_t) << '\n';
        f << "odo_sigma_r=" << fmt17(d.noise.odo_sigma_r) << '\n';
        f << "det_sigma=" << fmt17(d.noise.det_sigma) << '\n';
        f << "odo_scale=" << fmt17(d.noise.odo_scale) << '\n';
        f << "dropout_prob=" << fmt17(d.noise.dropout_prob) << '\n';
    }
}

Dataset read_dataset(const std::string& dir) {
    Dataset d;
    d.camera = read_camera(path_join(dir, "camera.txt"));
    {
        auto f = detail::open_in(path_join(dir, "odometry.csv"));
        std::string line;
        int ln = 0;
        while (std::getline(f, line)) {
            if (++ln == 1 || line.empty()) continue;
            const auto v = detail::split(line, ',');
            if (v.size() != 4) throw ParseError(ln, "odometry.csv: expected 4 fields");
            d.odometry.emplace_back(detail::parse_double(v[1], ln), detail::parse_double(v[2], ln),
                                    detail::parse_double(v[3], ln));
        }
    }
    d.detections = read_detections(path_join(dir, "detections.csv"));
    {
        auto f = detail::open_in(path_join(dir, "gt_ego.csv"));
        std::string line;
        int ln = 0;
        while (std::getline(f, line)) {
            if (++ln == 1 || line.empty()) continue;
            const auto v = detail::split(line, ',');
            if (v.size() != 4) throw ParseError(ln, "gt_ego.csv: expected 4 fields");
            d.gt_ego.emplace_back(detail::parse_double(v[1], ln), detail::parse_double(v[2], ln),
                                  detail::parse_double(v[3], ln));
        }
        if (d.gt_ego.empty()) throw Error("gt_ego.csv is empty");
        d.ego_start = d.gt_ego.front();
    }
    d.lane_obs.resize(d.gt_ego.size());
    {
        auto f = detail::open_in(path_join(dir, "lanes.csv"));
        std::string line;
        int ln = 0;
        while (std::getline(f, line)) {
            if (++ln == 1 || line.empty()) continue;
            const auto v = detail::split(line, ',');
            if (v.size() != 3) throw ParseError(ln, "lanes.csv: expected 3 fields");
            const int frame = static_cast<int>(detail::parse_int(v[0], ln));
            if (frame < 0 || frame >= static_cast<int>(d.lane_obs.size()))
                throw ParseError(ln, "lanes.csv: frame out of range");
            d.lane_obs[frame].push_back(
                {Eigen::Vector2d(detail::parse_double(v[1], ln), detail::parse_double(v[2], ln))});
        }
    }
    {
        auto f = detail::open_in(path_join(dir, "gt_vehicles.csv"));
        std::string line;
        int ln = 0;
        while (std::getline(f, line)) {
            if (++ln == 1 || line.empty()) continue;
            const auto v = detail::split(line, ',');
            if (v.size() != 5) throw ParseError(ln, "gt_vehicles.csv: expected 5 fields");
            const int frame = static_cast<int>(detail::parse_int(v[0], ln));
            const int track = static_cast<int>(detail::parse_int(v[1], ln));
            d.gt_vehicles[track].emplace_back(
                frame, Pose2(detail::parse_double(v[2], ln), detail::parse_double(v[3], ln),
                             detail::parse_double(v[4], ln)));
        }
    }
    {
        auto f = detail::open_in(path_join(dir, "meta.txt"));
        std::string line;
        while (std::getline(f, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 1);
            if (key == "seed") d.noise.seed = std::stoull(val);
            else if (key == "kind") d.spec.kind = kind_from_name(val);
            else if (key == "frames") d.spec.frames = std::stoi(val);
            else if (key == "speed") d.spec.speed = std::stod(val);
            else if (key == "vehicles") d.spec.vehicle_count = std::stoi(val);
            else if (key == "lanes") d.spec.lane_count = std::stoi(val);
            else if (key == "lane_spacing") d.spec.lane_spacing = std::stod(val);
            else if (key == "arc_radius") d.spec.arc_radius = std::stod(val);
            else if (key == "lane_sample_spacing") d.spec.lane_sample_spacing = std::stod(val);
            else if (key == "lane_visibility_depth") d.spec.lane_visibility_depth = std::stod(val);
            else if (key == "odo_sigma_t") d.noise.odo_sigma_t = std::stod(val);
            else if (key == "odo_sigma_r") d.noise.odo_sigma_r = std::stod(val);
            else if (key == "det_sigma") d.noise.det_sigma = std::stod(val);
            else if (key == "odo_scale") d.noise.odo_scale = std::stod(val);
            else if (key == "dropout_prob") d.noise.dropout_prob = std::stod(val);
        }
    }
    return d;
}

}  // namespace bev
