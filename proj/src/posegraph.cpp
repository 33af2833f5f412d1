#include "bev/posegraph.hpp"

#include <sstream>

#include <Eigen/Dense>

#include "text_io.hpp"

namespace bev {

Node Node::camera(NodeId id, int frame, const Pose2& est, bool fixed) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Camera;
    n.frame = frame;
    n.fixed = fixed;
    n.estimate = est;
    return n;
}

Node Node::camera(NodeId id, int frame, const Pose3& est, bool fixed) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Camera;
    n.frame = frame;
    n.fixed = fixed;
    n.estimate = est;
    return n;
}

Node Node::vehicle(NodeId id, int track, int frame, const Pose2& est) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Vehicle;
    n.track = track;
    n.frame = frame;
    n.estimate = est;
    return n;
}

Node Node::vehicle(NodeId id, int track, int frame, const Pose3& est) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Vehicle;
    n.track = track;
    n.frame = frame;
    n.estimate = est;
    return n;
}

Node Node::landmark(NodeId id, int point_index, const Eigen::Vector2d& est) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Landmark;
    n.point_index = point_index;
    n.estimate = est;
    return n;
}

Node Node::landmark(NodeId id, int point_index, const Eigen::Vector3d& est) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Landmark;
    n.point_index = point_index;
    n.estimate = est;
    return n;
}

NodeId PoseGraph::add_node(const Node& node) {
    if (nodes_.count(node.id))
        throw DuplicateNodeError("duplicate node id " + std::to_string(node.id));
    const bool se2 = mode_ == GraphMode::SE2;
    if (node.kind == NodeKind::Landmark) {
        if (se2 != std::holds_alternative<Eigen::Vector2d>(node.estimate))
            throw GraphError("landmark estimate dimension does not match graph mode");
    } else {
        if (se2 != std::holds_alternative<Pose2>(node.estimate))
            throw GraphError("agent estimate group does not match graph mode");
    }
    nodes_[node.id] = node;
    return node.id;
}

const Node& PoseGraph::node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw MissingEndpointError("unknown node id " + std::to_string(id));
    return it->second;
}

Node& PoseGraph::node(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw MissingEndpointError("unknown node id " + std::to_string(id));
    return it->second;
}

namespace {

void check_information(const Eigen::MatrixXd& omega, int dim) {
    if (omega.rows() != dim || omega.cols() != dim)
        throw BadInformationError("information matrix has wrong dimension");
    if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw BadInformationError("information matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
    if (es.eigenvalues().minCoeff() < -1e-9)
        throw BadInformationError("information matrix is not positive semidefinite");
}

}  // namespace

void PoseGraph::add_edge(const Edge& edge) {
    const Node& a = node(edge.src);
    const Node& b = node(edge.dst);
    switch (edge.kind) {
        case EdgeKind::CC:
            if (a.kind != NodeKind::Camera || b.kind != NodeKind::Camera ||
                b.frame != a.frame + 1)
                throw KindMismatchError("CC edge must join cameras at consecutive frames");
            break;
        case EdgeKind::VV:
            if (a.kind != NodeKind::Vehicle || b.kind != NodeKind::Vehicle ||
                a.track != b.track || b.frame != a.frame + 1)
                throw KindMismatchError("VV edge must join one track at consecutive frames");
            break;
        case EdgeKind::CV:
            if (a.kind != NodeKind::Camera || b.kind != NodeKind::Vehicle ||
                a.frame != b.frame)
                throw KindMismatchError("CV edge must join a camera and a vehicle at one frame");
            break;
        case EdgeKind::CP:
            if (a.kind == NodeKind::Landmark || b.kind != NodeKind::Landmark)
                throw KindMismatchError("CP edge must join an agent and a landmark");
            break;
    }
    if (edge.kind == EdgeKind::CP) {
        if (edge.offset.size() != point_dim())
            throw GraphError("CP offset dimension does not match graph mode");
        check_information(edge.information, point_dim());
    } else {
        const bool se2 = mode_ == GraphMode::SE2;
        if (se2 != std::holds_alternative<Pose2>(edge.measurement))
            throw GraphError("edge measurement group does not match graph mode");
        check_information(edge.information, error_dim());
    }
    if (!(edge.scale >= 0.0)) throw GraphError("edge scale must be non-negative");
    edges_.push_back(edge);
}

namespace {

Eigen::Vector2d agent_translation2(const Node& n) {
    return std::get<Pose2>(n.estimate).translation();
}

Eigen::Vector3d agent_translation3(const Node& n) {
    return std::get<Pose3>(n.estimate).translation;
}

}  // namespace

Eigen::VectorXd binary_residual(const Edge& edge, const PoseGraph& g) {
    if (edge.kind == EdgeKind::CP) throw GraphError("binary_residual on CP edge");
    const Node& s = g.node(edge.src);
    const Node& d = g.node(edge.dst);
    if (g.mode() == GraphMode::SE2) {
        const Pose2 ups = compose(inverse(std::get<Pose2>(edge.measurement)),
                                  relative(std::get<Pose2>(s.estimate), std::get<Pose2>(d.estimate)));
        return error_from_transform(ups);
    }
    const Pose3 ups = compose(inverse(std::get<Pose3>(edge.measurement)),
                              relative(std::get<Pose3>(s.estimate), std::get<Pose3>(d.estimate)));
    return error_from_transform(ups);
}

Eigen::VectorXd unary_residual(const Edge& edge, const PoseGraph& g) {
    if (edge.kind != EdgeKind::CP) throw GraphError("unary_residual on binary edge");
    const Node& a = g.node(edge.src);
    const Node& p = g.node(edge.dst);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(g.error_dim());
    if (g.mode() == GraphMode::SE2) {
        e.head<2>() = agent_translation2(a) - std::get<Eigen::Vector2d>(p.estimate) -
                      Eigen::Vector2d(edge.offset);
    } else {
        e.head<3>() = agent_translation3(a) - std::get<Eigen::Vector3d>(p.estimate) -
                      Eigen::Vector3d(edge.offset);
    }
    return e;
}

Eigen::VectorXd edge_residual(const Edge& edge, const PoseGraph& g) {
    return edge.kind == EdgeKind::CP ? unary_residual(edge, g) : binary_residual(edge, g);
}

double edge_cost(const Edge& edge, const PoseGraph& g) {
    if (edge.kind == EdgeKind::CP) {
        const Eigen::VectorXd e = unary_residual(edge, g).head(g.point_dim());
        return edge.scale * e.dot(edge.information * e);
    }
    const Eigen::VectorXd e = binary_residual(edge, g);
    return edge.scale * e.dot(edge.information * e);
}

CostBreakdown total_cost(const PoseGraph& g) {
    CostBreakdown out;
    for (const Edge& e : g.edges()) {
        const double c = edge_cost(e, g);
        if (e.kind == EdgeKind::CP)
            out.static_part += c;
        else
            out.dynamic_part += c;
    }
    out.total = out.dynamic_part + out.static_part;
    return out;
}

Eigen::MatrixXd padded_cp_information(const Edge& edge, const PoseGraph& g) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(g.error_dim(), g.error_dim());
    const int d = g.point_dim();
    omega.topLeftCorner(d, d) = edge.information;
    return omega;
}

namespace {

using detail::fmt17;

void write_upper(std::ostream& os, const Eigen::MatrixXd& m) {
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i; j < m.cols(); ++j) os << ' ' << fmt17(m(i, j));
}

Eigen::MatrixXd read_upper(const std::vector<std::string>& f, size_t& pos, int dim, int line_no) {
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) {
            if (pos >= f.size()) throw ParseError(line_no, "truncated information matrix");
            m(i, j) = m(j, i) = detail::parse_double(f[pos++], line_no);
        }
    return m;
}

void write_node_tail(std::ostream& os, const Node& n) {
    switch (n.kind) {
        case NodeKind::Camera: os << " C " << n.frame; break;
        case NodeKind::Vehicle: os << " V " << n.track << ' ' << n.frame; break;
        case NodeKind::Landmark: os << " L " << n.point_index; break;
    }
    if (n.fixed) os << " FIXED";
}

void write_pose(std::ostream& os, const Pose2& p) {
    os << ' ' << fmt17(p.x) << ' ' << fmt17(p.z) << ' ' << fmt17(p.theta);
}

void write_pose(std::ostream& os, const Pose3& p) {
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) os << ' ' << fmt17(p.rotation(i, j));
        os << ' ' << fmt17(p.translation(i));
    }
}

const char* edge_tag(EdgeKind k) {
    switch (k) {
        case EdgeKind::CC: return "CC";
        case EdgeKind::VV: return "VV";
        case EdgeKind::CV: return "CV";
        case EdgeKind::CP: return "CP";
    }
    return "?";
}

}  // namespace

std::string serialize(const PoseGraph& g) {
    std::ostringstream os;
    const bool se2 = g.mode() == GraphMode::SE2;
    os << "MODE " << (se2 ? "SE2" : "SE3") << '\n';
    const char* node_tag = se2 ? "NODE_SE2" : "NODE_SE3";
    for (const auto& [id, n] : g.nodes()) {
        os << node_tag << ' ' << id;
        if (n.kind == NodeKind::Landmark) {
            if (se2) {
                const auto& v = std::get<Eigen::Vector2d>(n.estimate);
                write_pose(os, Pose2(v.x(), v.y(), 0.0));
            } else {
                const auto& v = std::get<Eigen::Vector3d>(n.estimate);
                write_pose(os, Pose3(Eigen::Matrix3d::Identity(), v));
            }
        } else if (se2) {
            write_pose(os, std::get<Pose2>(n.estimate));
        } else {
            write_pose(os, std::get<Pose3>(n.estimate));
        }
        write_node_tail(os, n);
        os << '\n';
    }
    for (const Edge& e : g.edges()) {
        os << "EDGE " << edge_tag(e.kind) << ' ' << e.src << ' ' << e.dst;
        if (e.kind == EdgeKind::CP) {
            if (se2)
                os << ' ' << fmt17(e.offset(0)) << ' ' << fmt17(e.offset(1));
            else
                os << ' ' << fmt17(e.offset(0)) << ' ' << fmt17(e.offset(2)) << ' '
                   << fmt17(e.offset(1));
        } else if (se2) {
            write_pose(os, std::get<Pose2>(e.measurement));
        } else {
            write_pose(os, std::get<Pose3>(e.measurement));
        }
        os << ' ' << fmt17(e.scale);
        write_upper(os, e.information);
        os << '\n';
    }
    return os.str();
}

namespace {

Pose2 parse_pose2(const std::vector<std::string>& f, size_t& pos, int line_no) {
    if (pos + 3 > f.size()) throw ParseError(line_no, "truncated SE2 pose");
    const double x = detail::parse_double(f[pos++], line_no);
    const double z = detail::parse_double(f[pos++], line_no);
    const double t = detail::parse_double(f[pos++], line_no);
    return {x, z, t};
}

Pose3 parse_pose3(const std::vector<std::string>& f, size_t& pos, int line_no) {
    if (pos + 12 > f.size()) throw ParseError(line_no, "truncated SE3 pose");
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = detail::parse_double(f[pos++], line_no);
        t(i) = detail::parse_double(f[pos++], line_no);
    }
    return {r, t};
}

}  // namespace

PoseGraph parse_graph(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    bool have_mode = false;
    PoseGraph g;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto f = detail::split(line, ' ');
        size_t pos = 0;
        const std::string& tag = f[pos++];
        if (tag == "MODE") {
            if (pos >= f.size()) throw ParseError(line_no, "missing mode");
            if (f[pos] == "SE2")
                g = PoseGraph(GraphMode::SE2);
            else if (f[pos] == "SE3")
                g = PoseGraph(GraphMode::SE3);
            else
                throw ParseError(line_no, "unknown mode " + f[pos]);
            have_mode = true;
            continue;
        }
        if (!have_mode) throw ParseError(line_no, "record before MODE line");
        if (tag == "NODE_SE2" || tag == "NODE_SE3") {
            const bool se2_line = tag == "NODE_SE2";
            if (se2_line != (g.mode() == GraphMode::SE2))
                throw ParseError(line_no, "node record does not match graph mode");
            if (pos >= f.size()) throw ParseError(line_no, "missing node id");
            const NodeId id = detail::parse_int(f[pos++], line_no);
            Pose2 p2;
            Pose3 p3;
            if (se2_line)
                p2 = parse_pose2(f, pos, line_no);
            else
                p3 = parse_pose3(f, pos, line_no);
            if (pos >= f.size()) throw ParseError(line_no, "missing node kind");
            const std::string kind = f[pos++];
            Node n;
            if (kind == "C") {
                if (pos >= f.size()) throw ParseError(line_no, "missing camera frame");
                const int frame = static_cast<int>(detail::parse_int(f[pos++], line_no));
                n = se2_line ? Node::camera(id, frame, p2) : Node::camera(id, frame, p3);
            } else if (kind == "V") {
                if (pos + 2 > f.size()) throw ParseError(line_no, "missing vehicle track/frame");
                const int track = static_cast<int>(detail::parse_int(f[pos++], line_no));
                const int frame = static_cast<int>(detail::parse_int(f[pos++], line_no));
                n = se2_line ? Node::vehicle(id, track, frame, p2)
                             : Node::vehicle(id, track, frame, p3);
            } else if (kind == "L") {
                if (pos >= f.size()) throw ParseError(line_no, "missing landmark index");
                const int pi = static_cast<int>(detail::parse_int(f[pos++], line_no));
                n = se2_line ? Node::landmark(id, pi, Eigen::Vector2d(p2.x, p2.z))
                             : Node::landmark(id, pi, Eigen::Vector3d(p3.translation));
            } else {
                throw ParseError(line_no, "unknown node kind " + kind);
            }
            if (pos < f.size() && f[pos] == "FIXED") {
                n.fixed = true;
                ++pos;
            }
            if (pos != f.size()) throw ParseError(line_no, "trailing fields on node record");
            g.add_node(n);
            continue;
        }
        if (tag == "EDGE") {
            if (pos >= f.size()) throw ParseError(line_no, "missing edge kind");
            const std::string kind = f[pos++];
            if (pos + 2 > f.size()) throw ParseError(line_no, "missing edge endpoints");
            Edge e;
            e.src = detail::parse_int(f[pos++], line_no);
            e.dst = detail::parse_int(f[pos++], line_no);
            const bool se2 = g.mode() == GraphMode::SE2;
            if (kind == "CP") {
                e.kind = EdgeKind::CP;
                const int d = se2 ? 2 : 3;
                if (pos + d > f.size()) throw ParseError(line_no, "truncated CP offset");
                e.offset.resize(d);
                if (se2) {
                    e.offset(0) = detail::parse_double(f[pos++], line_no);
                    e.offset(1) = detail::parse_double(f[pos++], line_no);
                } else {
                    e.offset(0) = detail::parse_double(f[pos++], line_no);
                    e.offset(2) = detail::parse_double(f[pos++], line_no);
                    e.offset(1) = detail::parse_double(f[pos++], line_no);
                }
            } else {
                if (kind == "CC")
                    e.kind = EdgeKind::CC;
                else if (kind == "VV")
                    e.kind = EdgeKind::VV;
                else if (kind == "CV")
                    e.kind = EdgeKind::CV;
                else
                    throw ParseError(line_no, "unknown edge kind " + kind);
                if (se2)
                    e.measurement = parse_pose2(f, pos, line_no);
                else
                    e.measurement = parse_pose3(f, pos, line_no);
            }
            if (pos >= f.size()) throw ParseError(line_no, "missing edge scale");
            e.scale = detail::parse_double(f[pos++], line_no);
            const int dim = kind == "CP" ? (se2 ? 2 : 3) : g.error_dim();
            e.information = read_upper(f, pos, dim, line_no);
            if (pos != f.size()) throw ParseError(line_no, "trailing fields on edge record");
            g.add_edge(e);
            continue;
        }
        throw ParseError(line_no, "unknown record tag " + tag);
    }
    return g;
}

void write_graph(const PoseGraph& g, const std::string& path) {
    auto f = detail::open_out(path);
    f << serialize(g);
}

PoseGraph read_graph(const std::string& path) {
    auto f = detail::open_in(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_graph(ss.str());
}

}  // namespace bev
