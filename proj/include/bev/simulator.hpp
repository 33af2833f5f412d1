#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bev/metrology.hpp"
#include "bev/optimizer.hpp"
#include "bev/posegraph.hpp"
#include "bev/rng.hpp"

// Synthetic scenario generation and corruption: ground-truth ego and
// vehicle trajectories plus lane geometry, a seeded noise model standing in
// for the perception frontend, dataset files, and graph construction.

namespace bev {

enum class PathKind { Straight, Arc, SCurve };

struct ScenarioSpec {
    PathKind kind = PathKind::Straight;
    int frames = 50;
    double speed = 1.0;         // meters per frame
    int vehicle_count = 0;
    int lane_count = 2;
    double lane_spacing = 3.5;  // meters
    double arc_radius = 50.0;   // meters, Arc and SCurve

    double lane_sample_spacing = 1.25;     // meters along each lane
    double lane_visibility_depth = 25.0;  // camera z cutoff for lane samples
};

struct Scenario {
    ScenarioSpec spec;
    CameraModel camera;
    std::vector<Pose2> ego_gt;                       // one per frame
    std::map<int, std::vector<std::pair<int, Pose2>>> vehicles;  // track -> (frame, pose)
    std::vector<std::vector<Eigen::Vector2d>> lanes;  // world polylines
    std::vector<Eigen::Vector2d> lane_samples;        // world lane sample points
    std::vector<int> lane_of_sample;                  // lane index per sample
};

struct NoiseModel {
    std::uint64_t seed = 0;
    double odo_sigma_t = 0.0;   // meters per step, per axis
    double odo_sigma_r = 0.0;   // radians per step
    double det_sigma = 0.0;     // meters, per axis, per source
    double odo_scale = 1.0;     // simulated monocular scale ambiguity
    double dropout_prob = 0.0;  // probability a detection is missing
};

struct LaneSample {
    Eigen::Vector2d point_cam;  // metric camera BEV frame
};

struct Dataset {
    CameraModel camera;
    Pose2 ego_start;
    std::vector<Pose2> odometry;                      // step k: frame k -> k+1
    std::vector<Detection> detections;                // sorted by frame, track
    std::vector<std::vector<LaneSample>> lane_obs;    // per frame
    std::vector<Pose2> gt_ego;
    std::map<int, std::vector<std::pair<int, Pose2>>> gt_vehicles;
    ScenarioSpec spec;
    NoiseModel noise;
};

Scenario generate_scenario(const ScenarioSpec& spec);
Dataset corrupt(const Scenario& s, const NoiseModel& n);

struct BuildConfig {
    GraphMode mode = GraphMode::SE2;
    double cc_weight = 10000.0;
    double vv_weight = 1.0;
    double cp_weight = 10000.0;
    FuseConfig fuse;
    SolverConfig solver;
    double assoc_gate = 1.0;  // meters, lane sample association
    // Negative: per-detection depth-gauged weight; >= 0: fixed override.
    double cv_weight_override = -1.0;
};

/// Per-frame payloads with node ids, fused vehicle measurements and lane
/// landmark identities assigned by frame-to-frame association chained on
/// the odometry (rotation is scale-free, so prediction survives scale
/// ambiguity).
std::vector<FrameData> build_frames(const Dataset& d, const BuildConfig& cfg);

/// Batch graph: all frames appended with dead-reckoned initialization.
PoseGraph build_graph(const Dataset& d, const BuildConfig& cfg);

/// Dead-reckoned ego trajectory (initialization / no-optimization baseline).
std::vector<Pose2> dead_reckon(const Dataset& d);

/// Per-step metric length estimates from lane samples tracked across
/// consecutive frames (scale-recovery input); zero when a step has no
/// tracked samples.
std::vector<double> metric_step_lengths_from_lanes(const Dataset& d, const BuildConfig& cfg);

void write_dataset(const Dataset& d, const std::string& dir);
Dataset read_dataset(const std::string& dir);

}  // namespace bev
