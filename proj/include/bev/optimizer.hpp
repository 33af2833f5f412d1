#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bev/metrology.hpp"
#include "bev/posegraph.hpp"

// Sparse nonlinear least squares over the pose graph: Gauss-Newton
// linearization with analytic Jacobians, Levenberg-Marquardt stepping,
// batch and incremental (sliding window, feedback-initialized) solves.

namespace bev {

struct SolverConfig {
    int max_iterations = 50;
    int incremental_iterations = 5;
    double damping_init = 1e-4;
    double damping_up = 10.0;
    double damping_down = 0.1;
    double cost_tol = 1e-9;   // relative cost change
    double step_tol = 1e-10;  // max update norm
    int incremental_window = 10;
    double landmark_depth_max = 20.0;  // meters along camera z
};

struct IterationRecord {
    int iteration = 0;
    double cost = 0.0;
    double step_norm = 0.0;
    bool accepted = false;
    double time_s = 0.0;
};

struct SolveReport {
    int iterations = 0;  // accepted steps
    double initial_cost = 0.0;
    double final_cost = 0.0;
    bool converged = false;
    std::vector<IterationRecord> steps;
};

void write_report(const SolveReport& report, const std::string& path);

/// Maps free nodes to contiguous column blocks, ordered by node id.
struct VariableIndex {
    struct Block {
        NodeId id;
        int offset;
        int dim;
    };
    std::vector<Block> blocks;
    std::map<NodeId, int> block_of;  // node id -> index into blocks
    int total_dim = 0;

    static VariableIndex build(const PoseGraph& g);
};

struct LinearSystem {
    Eigen::SparseMatrix<double> h;
    Eigen::VectorXd b;
    VariableIndex index;
};

/// Normal equations H = sum J^T O J, b = sum J^T O e over the given edges
/// (all edges when empty), fixed nodes removed. Throws GaugeError when no
/// node is fixed.
LinearSystem linearize(const PoseGraph& g, const std::vector<int>& edge_subset = {});

/// Analytic residual Jacobians of one edge w.r.t. the local increment of
/// each endpoint, in endpoint order (src, dst).
std::vector<std::pair<NodeId, Eigen::MatrixXd>> edge_jacobians(const Edge& edge,
                                                               const PoseGraph& g);

/// Central-finite-difference fallback (and test oracle), h = 1e-6.
std::vector<std::pair<NodeId, Eigen::MatrixXd>> numeric_edge_jacobians(const Edge& edge,
                                                                       PoseGraph& g,
                                                                       double h = 1e-6);

SolveReport optimize_batch(PoseGraph& g, const SolverConfig& cfg);

/// Per-frame payload produced by the graph builder. Node ids are chosen by
/// the builder; measurements are SE(2) and embedded when the graph is SE(3).
struct FrameData {
    int frame = 0;
    NodeId camera_node = 0;
    NodeId prev_camera_node = -1;
    bool has_odometry = false;
    Pose2 odometry;           // relative step from the previous camera
    Pose2 initial_pose;       // absolute pose, used when has_odometry is false
    Pose2 reference_pose;     // measurement-construction camera pose
                              // (odometry chain refined by lane alignment);
                              // a pure function of the dataset, so batch and
                              // incremental modes build identical edges
    double cc_lambda = 10000.0;
    double vv_lambda = 1.0;
    double cp_lambda = 10000.0;

    struct VehicleObs {
        NodeId node = 0;
        NodeId prev_node = -1;       // same track, previous frame (-1: none)
        NodeId prev_prev_node = -1;  // same track, frame before that
        int track = 0;
        Eigen::Vector2d position{0, 0};  // camera BEV frame
        std::optional<double> yaw;       // relative yaw, camera frame
        double lambda = 10.0;
        // Constant-velocity relative-pose measurement for the VV edge to
        // prev_node, derived from dead-reckoned measurement poses.
        std::optional<Pose2> vv_measurement;
    };
    std::vector<VehicleObs> vehicles;

    struct LaneObs {
        NodeId landmark = 0;
        int point_index = 0;
        Eigen::Vector2d point_cam{0, 0};  // metric, camera BEV frame
    };
    std::vector<LaneObs> lanes;
};

/// Adds the frame's nodes and edges with feedback initialization (new
/// estimates composed from previous estimates and measurements). Lane
/// observations beyond cfg.landmark_depth_max are dropped. No solve.
void append_frame(PoseGraph& g, const FrameData& fd, const SolverConfig& cfg);

/// append_frame + sliding-window freeze + LM on the active window.
SolveReport optimize_incremental(PoseGraph& g, const SolverConfig& cfg, const FrameData& fd);

std::vector<GroundPoint> filter_landmarks_by_depth(const std::vector<GroundPoint>& points,
                                                   double t_max);

}  // namespace bev
