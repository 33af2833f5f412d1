#pragma once

#include <map>
#include <string>
#include <vector>

#include "bev/posegraph.hpp"
#include "bev/simulator.hpp"

// Trajectory scoring and study harnesses: absolute translation error (ATE),
// per-constraint-family ablations, weight and depth-threshold sweeps,
// lane-constraint before/after comparison, and runtime profiling.

namespace bev {

/// Ground-plane trajectory of one agent. track < 0 means the ego camera.
struct TrajectoryEstimate {
    int track = -1;
    std::map<int, Pose2> poses;  // frame -> pose
};

struct AteResult {
    int track = -1;
    double rms = 0.0;
    std::vector<double> per_frame_errors;  // intersection frames, ascending
};

/// RMS of per-frame Euclidean (x, z) errors over the frame intersection.
/// No alignment is applied: both trajectories live in the world frame
/// anchored by the fixed first camera. Throws NoMeasurementError when the
/// intersection is empty.
AteResult ate_rms(const TrajectoryEstimate& est, const TrajectoryEstimate& gt);

/// Ego plus one trajectory per vehicle track, read out of the graph
/// (SE(3) estimates are projected onto the ground plane).
std::vector<TrajectoryEstimate> trajectories_from_graph(const PoseGraph& g);

TrajectoryEstimate gt_ego_trajectory(const Dataset& d);
TrajectoryEstimate gt_vehicle_trajectory(const Dataset& d, int track);

/// Unoptimized baselines: dead-reckoned ego, and vehicles placed by
/// composing the dead-reckoned ego with each fused detection.
std::vector<TrajectoryEstimate> raw_trajectories(const Dataset& d, const BuildConfig& cfg);

/// One result-table row: `config,agent,frames,ate_rms_m`.
struct AteRow {
    std::string config;
    int track = -1;  // < 0: ego
    int frames = 0;
    double ate_rms_m = 0.0;
};

std::string agent_name(int track);
void write_ate_rows(const std::vector<AteRow>& rows, const std::string& path);

/// Optimizes a fresh copy of the dataset's graph and scores every agent
/// against ground truth. Solver failures are recorded as NaN rows.
std::vector<AteRow> score_configuration(const Dataset& d, const BuildConfig& cfg,
                                        const std::string& config_name);

/// As score_configuration, optionally zeroing one edge family's lambda
/// after construction (edges kept, zero information).
std::vector<AteRow> score_graph_configuration(const Dataset& d, const BuildConfig& cfg,
                                              const std::string& config_name,
                                              EdgeKind* zeroed_family);

/// Five configurations: each edge family zeroed out in turn (edges kept,
/// lambda = 0), then all families together.
std::vector<AteRow> ablate_families(const Dataset& d, const BuildConfig& base);

/// Landmark-anchor weight sweep: low 1000, medium 10000, high 100000.
std::vector<AteRow> sweep_cp_weight(const Dataset& d, const BuildConfig& base);

/// Landmark depth-threshold sweep: 12, 15, 18, 20, unbounded.
std::vector<AteRow> sweep_depth(const Dataset& d, const BuildConfig& base);

struct LaneAblation {
    std::vector<AteRow> before;  // landmark anchors zeroed
    std::vector<AteRow> after;   // full configuration
};

/// Throws NoMeasurementError when the dataset carries no lane samples.
LaneAblation lane_ablation(const Dataset& d, const BuildConfig& base);

/// One timing row: `frame,objects,time_s`.
struct TimingRow {
    int frame = 0;
    int objects = 0;
    double time_s = 0.0;
};

/// Incremental mode: one row per frame (objects = detections that frame).
/// Batch mode: a single row with the total solve time.
std::vector<TimingRow> runtime_profile(const Dataset& d, const BuildConfig& cfg,
                                       bool incremental);

void write_timing(const std::vector<TimingRow>& rows, const std::string& path);

}  // namespace bev
