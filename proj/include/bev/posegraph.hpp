#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bev/errors.hpp"
#include "bev/geometry.hpp"

// Typed pose graph over camera, vehicle and landmark nodes with four edge
// families:
//   CC  camera-camera odometry          (binary, consecutive frames)
//   VV  vehicle-vehicle motion model    (binary, same track, consecutive)
//   CV  camera-vehicle detection        (binary, same frame)
//   CP  agent-landmark anchor           (unary style, no orientation)
// Every edge carries an information matrix Omega and a confidence scalar
// lambda; the effective information is lambda * Omega.

namespace bev {

using NodeId = std::int64_t;

enum class GraphMode { SE2, SE3 };
enum class NodeKind { Camera, Vehicle, Landmark };
enum class EdgeKind { CC, VV, CV, CP };

struct Node {
    NodeId id = 0;
    NodeKind kind = NodeKind::Camera;
    int frame = -1;        // Camera, Vehicle
    int track = -1;        // Vehicle
    int point_index = -1;  // Landmark
    bool fixed = false;
    // Pose2/Pose3 for agents, Vector2d/Vector3d for landmarks.
    std::variant<Pose2, Pose3, Eigen::Vector2d, Eigen::Vector3d> estimate;

    static Node camera(NodeId id, int frame, const Pose2& est, bool fixed = false);
    static Node camera(NodeId id, int frame, const Pose3& est, bool fixed = false);
    static Node vehicle(NodeId id, int track, int frame, const Pose2& est);
    static Node vehicle(NodeId id, int track, int frame, const Pose3& est);
    static Node landmark(NodeId id, int point_index, const Eigen::Vector2d& est);
    static Node landmark(NodeId id, int point_index, const Eigen::Vector3d& est);
};

struct Edge {
    EdgeKind kind = EdgeKind::CC;
    NodeId src = 0;  // agent for CP
    NodeId dst = 0;  // landmark for CP
    std::variant<Pose2, Pose3> measurement;  // binary kinds
    Eigen::VectorXd offset;                  // CP: 2-vector (SE2) / 3-vector (SE3)
    Eigen::MatrixXd information;             // symmetric PSD
    double scale = 1.0;                      // lambda >= 0 (0 used by ablations)
};

class PoseGraph {
public:
    explicit PoseGraph(GraphMode mode = GraphMode::SE2) : mode_(mode) {}

    GraphMode mode() const { return mode_; }
    /// Residual dimension: 3 for SE2, 6 for SE3.
    int error_dim() const { return mode_ == GraphMode::SE2 ? 3 : 6; }
    /// Landmark dimension: 2 for SE2, 3 for SE3.
    int point_dim() const { return mode_ == GraphMode::SE2 ? 2 : 3; }

    NodeId add_node(const Node& node);
    void add_edge(const Edge& edge);

    bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
    const Node& node(NodeId id) const;
    Node& node(NodeId id);
    const std::map<NodeId, Node>& nodes() const { return nodes_; }
    std::map<NodeId, Node>& nodes() { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<Edge>& edges() { return edges_; }

    /// Incremental-mode scheduler cursor: edges before this index connect
    /// only permanently frozen nodes and are skipped when building the
    /// per-step active set, keeping each step bounded by the window size.
    int first_active_edge = 0;

private:
    GraphMode mode_;
    std::map<NodeId, Node> nodes_;
    std::vector<Edge> edges_;
};

/// Eq-style binary residual: error of Z^-1 (T_S^W)^-1 T_D^W.
Eigen::VectorXd binary_residual(const Edge& edge, const PoseGraph& g);

/// Translation-only CP residual tr_A - X_p - offset, zero-padded to the
/// graph error dimension so orientation is never constrained.
Eigen::VectorXd unary_residual(const Edge& edge, const PoseGraph& g);

Eigen::VectorXd edge_residual(const Edge& edge, const PoseGraph& g);

/// e^T (lambda * Omega) e.
double edge_cost(const Edge& edge, const PoseGraph& g);

struct CostBreakdown {
    double total = 0.0;
    double dynamic_part = 0.0;  // CC + VV + CV
    double static_part = 0.0;   // CP
};
CostBreakdown total_cost(const PoseGraph& g);

/// Effective information of the CP residual, padded with zero rotation rows.
Eigen::MatrixXd padded_cp_information(const Edge& edge, const PoseGraph& g);

std::string serialize(const PoseGraph& g);
PoseGraph parse_graph(const std::string& text);
void write_graph(const PoseGraph& g, const std::string& path);
PoseGraph read_graph(const std::string& path);

}  // namespace bev
