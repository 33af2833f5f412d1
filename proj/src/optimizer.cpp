#include "bev/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "text_io.hpp"

namespace bev {

void write_report(const SolveReport& report, const std::string& path) {
    auto f = detail::open_out(path);
    using detail::fmt17;
    f << "iteration,cost,step_norm,accepted,time_s\n";
    for (const IterationRecord& r : report.steps)
        f << r.iteration << ',' << fmt17(r.cost) << ',' << fmt17(r.step_norm) << ','
          << (r.accepted ? 1 : 0) << ',' << fmt17(r.time_s) << '\n';
}

VariableIndex VariableIndex::build(const PoseGraph& g) {
    VariableIndex idx;
    bool any_fixed = false;
    for (const auto& [id, n] : g.nodes()) {
        if (n.fixed) {
            any_fixed = true;
            continue;
        }
        const int dim = n.kind == NodeKind::Landmark ? g.point_dim() : g.error_dim();
        idx.block_of[id] = static_cast<int>(idx.blocks.size());
        idx.blocks.push_back({id, idx.total_dim, dim});
        idx.total_dim += dim;
    }
    if (!any_fixed) throw GaugeError("no fixed node; gauge freedom unresolved");
    return idx;
}

namespace {

const Eigen::Matrix2d kSpin = (Eigen::Matrix2d() << 0, -1, 1, 0).finished();

/// Variable index restricted to the endpoints of a subset of edges. Free
/// nodes untouched by the subset have zero gradient and would not move, so
/// omitting them gives the same solution without scanning the whole graph.
VariableIndex subset_index(const PoseGraph& g, const std::vector<int>& subset) {
    if (subset.empty()) return VariableIndex::build(g);
    VariableIndex idx;
    bool any_fixed = false;
    for (int ei : subset) {
        const Edge& e = g.edges()[ei];
        for (NodeId id : {e.src, e.dst}) {
            const Node& n = g.node(id);
            if (n.fixed) {
                any_fixed = true;
                continue;
            }
            if (idx.block_of.count(id)) continue;
            const int dim = n.kind == NodeKind::Landmark ? g.point_dim() : g.error_dim();
            idx.block_of[id] = static_cast<int>(idx.blocks.size());
            idx.blocks.push_back({id, idx.total_dim, dim});
            idx.total_dim += dim;
        }
    }
    if (!any_fixed) throw GaugeError("no fixed node; gauge freedom unresolved");
    return idx;
}

std::vector<std::pair<NodeId, Eigen::MatrixXd>> binary_jacobians_se2(const Edge& edge,
                                                                     const PoseGraph& g) {
    const Pose2& ts = std::get<Pose2>(g.node(edge.src).estimate);
    const Pose2& td = std::get<Pose2>(g.node(edge.dst).estimate);
    const Pose2& z = std::get<Pose2>(edge.measurement);
    const Eigen::Matrix2d rz_t = rot2(z.theta).transpose();
    const Eigen::Matrix2d rs_t = rot2(ts.theta).transpose();
    const Eigen::Vector2d dp = td.translation() - ts.translation();

    Eigen::MatrixXd js = Eigen::MatrixXd::Zero(3, 3);
    js.topLeftCorner<2, 2>() = -rz_t;
    js.block<2, 1>(0, 2) = -rz_t * rs_t * kSpin * dp;
    js(2, 2) = -1.0;

    Eigen::MatrixXd jd = Eigen::MatrixXd::Zero(3, 3);
    jd.topLeftCorner<2, 2>() = rz_t * rs_t * rot2(td.theta);
    jd(2, 2) = 1.0;
    return {{edge.src, js}, {edge.dst, jd}};
}

std::vector<std::pair<NodeId, Eigen::MatrixXd>> binary_jacobians_se3(const Edge& edge,
                                                                     const PoseGraph& g) {
    const Pose3& ts = std::get<Pose3>(g.node(edge.src).estimate);
    const Pose3& td = std::get<Pose3>(g.node(edge.dst).estimate);
    const Pose3& z = std::get<Pose3>(edge.measurement);
    const Eigen::Matrix3d rz_t = z.rotation.transpose();
    const Eigen::Matrix3d rs_t = ts.rotation.transpose();
    const Eigen::Matrix3d x = rs_t * td.rotation;
    const Eigen::Vector3d v = rs_t * (td.translation - ts.translation);
    const Eigen::Vector3d e_rot = log_so3(rz_t * x);
    const Eigen::Matrix3d jr_inv = right_jacobian_inv_so3(e_rot);

    Eigen::MatrixXd js = Eigen::MatrixXd::Zero(6, 6);
    js.topLeftCorner<3, 3>() = -rz_t;
    js.topRightCorner<3, 3>() = rz_t * skew(v);
    js.bottomRightCorner<3, 3>() = -jr_inv * x.transpose();

    Eigen::MatrixXd jd = Eigen::MatrixXd::Zero(6, 6);
    jd.topLeftCorner<3, 3>() = rz_t * x;
    jd.bottomRightCorner<3, 3>() = jr_inv;
    return {{edge.src, js}, {edge.dst, jd}};
}

std::vector<std::pair<NodeId, Eigen::MatrixXd>> cp_jacobians(const Edge& edge,
                                                             const PoseGraph& g) {
    const Node& a = g.node(edge.src);
    const int ed = g.error_dim();
    const int pd = g.point_dim();
    Eigen::MatrixXd ja = Eigen::MatrixXd::Zero(ed, ed);
    if (g.mode() == GraphMode::SE2)
        ja.topLeftCorner<2, 2>() = rot2(std::get<Pose2>(a.estimate).theta);
    else
        ja.topLeftCorner<3, 3>() = std::get<Pose3>(a.estimate).rotation;
    Eigen::MatrixXd jp = Eigen::MatrixXd::Zero(ed, pd);
    jp.topLeftCorner(pd, pd) = -Eigen::MatrixXd::Identity(pd, pd);
    return {{edge.src, ja}, {edge.dst, jp}};
}

/// Effective (lambda-scaled, CP-padded) information of an edge.
Eigen::MatrixXd effective_information(const Edge& edge, const PoseGraph& g) {
    if (edge.kind == EdgeKind::CP) return edge.scale * padded_cp_information(edge, g);
    return edge.scale * edge.information;
}

double subset_cost(const PoseGraph& g, const std::vector<int>& subset) {
    if (subset.empty()) return total_cost(g).total;
    double c = 0.0;
    for (int i : subset) c += edge_cost(g.edges()[i], g);
    return c;
}

struct Snapshot {
    std::vector<std::pair<NodeId, std::variant<Pose2, Pose3, Eigen::Vector2d, Eigen::Vector3d>>>
        estimates;
};

Snapshot snapshot_free(const PoseGraph& g, const VariableIndex& idx) {
    Snapshot s;
    s.estimates.reserve(idx.blocks.size());
    for (const auto& blk : idx.blocks) s.estimates.emplace_back(blk.id, g.node(blk.id).estimate);
    return s;
}

void restore(PoseGraph& g, const Snapshot& s) {
    for (const auto& [id, est] : s.estimates) g.node(id).estimate = est;
}

void apply_step(PoseGraph& g, const VariableIndex& idx, const Eigen::VectorXd& delta) {
    for (const auto& blk : idx.blocks) {
        Node& n = g.node(blk.id);
        const Eigen::VectorXd d = delta.segment(blk.offset, blk.dim);
        if (n.kind == NodeKind::Landmark) {
            if (blk.dim == 2)
                std::get<Eigen::Vector2d>(n.estimate) += Eigen::Vector2d(d);
            else
                std::get<Eigen::Vector3d>(n.estimate) += Eigen::Vector3d(d);
        } else if (g.mode() == GraphMode::SE2) {
            n.estimate = retract(std::get<Pose2>(n.estimate), Eigen::Vector3d(d));
        } else {
            n.estimate = retract(std::get<Pose3>(n.estimate), Eigen::Matrix<double, 6, 1>(d));
        }
    }
}

}  // namespace

std::vector<std::pair<NodeId, Eigen::MatrixXd>> edge_jacobians(const Edge& edge,
                                                               const PoseGraph& g) {
    if (edge.kind == EdgeKind::CP) return cp_jacobians(edge, g);
    return g.mode() == GraphMode::SE2 ? binary_jacobians_se2(edge, g)
                                      : binary_jacobians_se3(edge, g);
}

std::vector<std::pair<NodeId, Eigen::MatrixXd>> numeric_edge_jacobians(const Edge& edge,
                                                                       PoseGraph& g, double h) {
    std::vector<std::pair<NodeId, Eigen::MatrixXd>> out;
    const int ed = g.error_dim();
    for (NodeId id : {edge.src, edge.dst}) {
        Node& n = g.node(id);
        const int dim = n.kind == NodeKind::Landmark ? g.point_dim() : ed;
        Eigen::MatrixXd j(ed, dim);
        const auto saved = n.estimate;
        for (int k = 0; k < dim; ++k) {
            Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
            d(k) = h;
            VariableIndex one;
            one.blocks.push_back({id, 0, dim});
            apply_step(g, one, d);
            const Eigen::VectorXd rp = edge_residual(edge, g);
            n.estimate = saved;
            apply_step(g, one, Eigen::VectorXd(-d));
            const Eigen::VectorXd rm = edge_residual(edge, g);
            n.estimate = saved;
            Eigen::VectorXd diff = rp - rm;
            if (g.mode() == GraphMode::SE2 && edge.kind != EdgeKind::CP)
                diff(2) = wrap_angle(diff(2));
            j.col(k) = diff / (2.0 * h);
        }
        out.emplace_back(id, j);
    }
    return out;
}

LinearSystem linearize(const PoseGraph& g, const std::vector<int>& edge_subset) {
    LinearSystem sys;
    sys.index = subset_index(g, edge_subset);
    sys.b = Eigen::VectorXd::Zero(sys.index.total_dim);
    std::vector<Eigen::Triplet<double>> triplets;

    std::vector<int> all;
    const std::vector<int>* subset = &edge_subset;
    if (edge_subset.empty()) {
        all.resize(g.edges().size());
        std::iota(all.begin(), all.end(), 0);
        subset = &all;
    }

    for (int ei : *subset) {
        const Edge& edge = g.edges()[ei];
        const Eigen::VectorXd e = edge_residual(edge, g);
        const Eigen::MatrixXd omega = effective_information(edge, g);
        const auto jacs = edge_jacobians(edge, g);
        for (size_t a = 0; a < jacs.size(); ++a) {
            auto ita = sys.index.block_of.find(jacs[a].first);
            if (ita == sys.index.block_of.end()) continue;  // fixed
            const auto& blk_a = sys.index.blocks[ita->second];
            sys.b.segment(blk_a.offset, blk_a.dim) += jacs[a].second.transpose() * omega * e;
            for (size_t b = 0; b < jacs.size(); ++b) {
                auto itb = sys.index.block_of.find(jacs[b].first);
                if (itb == sys.index.block_of.end()) continue;
                const auto& blk_b = sys.index.blocks[itb->second];
                const Eigen::MatrixXd hab =
                    jacs[a].second.transpose() * omega * jacs[b].second;
                for (int r = 0; r < blk_a.dim; ++r)
                    for (int c = 0; c < blk_b.dim; ++c)
                        triplets.emplace_back(blk_a.offset + r, blk_b.offset + c, hab(r, c));
            }
        }
    }
    sys.h.resize(sys.index.total_dim, sys.index.total_dim);
    sys.h.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

namespace {

SolveReport run_lm(PoseGraph& g, const SolverConfig& cfg, const std::vector<int>& subset,
                   int max_iterations) {
    SolveReport report;
    double cost = subset_cost(g, subset);
    report.initial_cost = cost;
    report.final_cost = cost;

    double mu = cfg.damping_init;
    int consecutive_failures = 0;
    VariableIndex idx = subset_index(g, subset);
    Snapshot best = snapshot_free(g, idx);
    double best_cost = cost;

    int iter = 0;
    while (report.iterations < max_iterations) {
        if (cost < 1e-15) {
            report.converged = true;
            break;
        }
        const auto t0 = std::chrono::steady_clock::now();
        LinearSystem sys = linearize(g, subset);

        Eigen::SparseMatrix<double> damped = sys.h;
        // Marquardt scaling: damp each variable relative to its own curvature
        // so blocks touched only by weak edges converge as fast as stiff ones.
        for (int i = 0; i < damped.rows(); ++i) {
            const double d = sys.h.coeff(i, i);
            damped.coeffRef(i, i) += mu * (d > 1e-12 ? d : 1.0);
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
        bool solve_ok = solver.info() == Eigen::Success;
        Eigen::VectorXd delta;
        if (solve_ok) {
            delta = solver.solve(-sys.b);
            solve_ok = solver.info() == Eigen::Success && delta.allFinite();
        }
        if (!solve_ok) {
            mu *= cfg.damping_up;
            if (++consecutive_failures >= 10) {
                restore(g, best);
                throw NumericalFailureError(
                    "damped normal equations stayed singular after 10 damping increases");
            }
            continue;
        }
        consecutive_failures = 0;

        const double step_norm = delta.norm();
        if (step_norm < cfg.step_tol) {
            report.converged = true;
            break;
        }

        Snapshot before = snapshot_free(g, sys.index);
        apply_step(g, sys.index, delta);
        const double new_cost = subset_cost(g, subset);
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        IterationRecord rec;
        rec.iteration = ++iter;
        rec.cost = new_cost;
        rec.step_norm = step_norm;
        rec.time_s = dt;
        if (new_cost < cost) {
            rec.accepted = true;
            report.steps.push_back(rec);
            ++report.iterations;
            mu *= cfg.damping_down;
            const double drop = (cost - new_cost) / std::max(cost, 1.0);
            cost = new_cost;
            if (cost < best_cost) {
                best_cost = cost;
                best = snapshot_free(g, sys.index);
            }
            if (drop < cfg.cost_tol) {
                report.converged = true;
                break;
            }
        } else {
            rec.accepted = false;
            rec.cost = cost;
            report.steps.push_back(rec);
            restore(g, before);
            mu *= cfg.damping_up;
            if (mu > 1e12) {  // no descent direction left
                report.converged = true;
                break;
            }
        }
    }
    report.final_cost = cost;
    if (report.iterations >= max_iterations && max_iterations > 0 && !report.converged)
        report.converged = false;
    return report;
}

Pose2 vehicle_measurement_pose(const FrameData::VehicleObs& obs) {
    return {obs.position.x(), obs.position.y(), obs.yaw.value_or(0.0)};
}

}  // namespace

SolveReport optimize_batch(PoseGraph& g, const SolverConfig& cfg) {
    return run_lm(g, cfg, {}, cfg.max_iterations);
}

void append_frame(PoseGraph& g, const FrameData& fd, const SolverConfig& cfg) {
    const bool se2 = g.mode() == GraphMode::SE2;

    // Camera node: feedback rule, previous optimized estimate composed with
    // the odometry measurement.
    if (!fd.has_odometry) {
        if (se2)
            g.add_node(Node::camera(fd.camera_node, fd.frame, fd.initial_pose, true));
        else
            g.add_node(Node::camera(fd.camera_node, fd.frame, embed_se2(fd.initial_pose), true));
    } else {
        const Node& prev = g.node(fd.prev_camera_node);
        if (se2) {
            const Pose2 est = compose(std::get<Pose2>(prev.estimate), fd.odometry);
            g.add_node(Node::camera(fd.camera_node, fd.frame, est));
        } else {
            const Pose3 est = compose(std::get<Pose3>(prev.estimate), embed_se2(fd.odometry));
            g.add_node(Node::camera(fd.camera_node, fd.frame, est));
        }
        Edge cc;
        cc.kind = EdgeKind::CC;
        cc.src = fd.prev_camera_node;
        cc.dst = fd.camera_node;
        if (se2)
            cc.measurement = fd.odometry;
        else
            cc.measurement = embed_se2(fd.odometry);
        cc.information = Eigen::MatrixXd::Identity(g.error_dim(), g.error_dim());
        cc.scale = fd.cc_lambda;
        g.add_edge(cc);
    }

    const Node& cam = g.node(fd.camera_node);

    for (const auto& obs : fd.vehicles) {
        const Pose2 meas2 = vehicle_measurement_pose(obs);
        if (se2) {
            const Pose2 est = compose(std::get<Pose2>(cam.estimate), meas2);
            g.add_node(Node::vehicle(obs.node, obs.track, fd.frame, est));
        } else {
            const Pose3 est = compose(std::get<Pose3>(cam.estimate), embed_se2(meas2));
            g.add_node(Node::vehicle(obs.node, obs.track, fd.frame, est));
        }

        Edge cv;
        cv.kind = EdgeKind::CV;
        cv.src = fd.camera_node;
        cv.dst = obs.node;
        if (se2)
            cv.measurement = meas2;
        else
            cv.measurement = embed_se2(meas2);
        cv.information = Eigen::MatrixXd::Identity(g.error_dim(), g.error_dim());
        if (!obs.yaw) {
            // Bottom-center localization carries no orientation.
            if (se2)
                cv.information(2, 2) = 0.0;
            else
                cv.information.bottomRightCorner(3, 3).setZero();
        }
        cv.scale = obs.lambda;
        g.add_edge(cv);

        if (obs.prev_node >= 0 && obs.vv_measurement && g.has_node(obs.prev_node)) {
            // Constant-velocity motion model, precomputed from measured
            // poses so batch and incremental builds produce identical edges.
            Edge vv;
            vv.kind = EdgeKind::VV;
            vv.src = obs.prev_node;
            vv.dst = obs.node;
            if (se2)
                vv.measurement = *obs.vv_measurement;
            else
                vv.measurement = embed_se2(*obs.vv_measurement);
            vv.information = Eigen::MatrixXd::Identity(g.error_dim(), g.error_dim());
            vv.scale = fd.vv_lambda;
            g.add_edge(vv);
        }
    }

    // Lane landmark arms are expressed in the world through the
    // dead-reckoned heading: a pure function of the dataset, identical in
    // batch and incremental modes. Folding the live optimized heading into
    // the offsets instead couples measurement construction to the solver
    // state and destabilizes the per-frame feedback loop.
    for (const auto& lane : fd.lanes) {
        if (lane.point_cam.y() > cfg.landmark_depth_max) continue;  // depth gate, inclusive
        Edge cp;
        cp.kind = EdgeKind::CP;
        cp.src = fd.camera_node;
        cp.dst = lane.landmark;
        const Eigen::Vector2d arm2 = rot2(fd.reference_pose.theta) * lane.point_cam;
        const Eigen::Vector2d world2 = fd.reference_pose.translation() + arm2;
        if (se2) {
            if (!g.has_node(lane.landmark))
                g.add_node(Node::landmark(lane.landmark, lane.point_index, world2));
            cp.offset = Eigen::Vector2d(-arm2);
            cp.information = Eigen::MatrixXd::Identity(2, 2);
        } else {
            if (!g.has_node(lane.landmark))
                g.add_node(Node::landmark(lane.landmark, lane.point_index,
                                          Eigen::Vector3d(world2.x(), 0.0, world2.y())));
            cp.offset = Eigen::Vector3d(-arm2.x(), 0.0, -arm2.y());
            cp.information = Eigen::MatrixXd::Identity(3, 3);
        }
        cp.scale = fd.cp_lambda;
        g.add_edge(cp);
    }
}

SolveReport optimize_incremental(PoseGraph& g, const SolverConfig& cfg, const FrameData& fd) {
    append_frame(g, fd, cfg);

    const int horizon = fd.frame - cfg.incremental_window;

    // Only the tail of the edge list, from the scheduler cursor on, can
    // touch a free node: edges are appended in frame order and every freeze
    // below is permanent, so the cursor never has to move backwards. This
    // keeps the whole step bounded by the window size instead of the
    // trajectory length. A landmark freezes for good once it leaves the
    // window; a late re-observation then anchors the camera against the
    // frozen map point instead of re-opening it.
    const int n_edges = static_cast<int>(g.edges().size());
    std::map<NodeId, int> last_seen;  // newest observing frame, free landmarks
    for (int i = g.first_active_edge; i < n_edges; ++i) {
        const Edge& e = g.edges()[i];
        if (e.kind == EdgeKind::CP) {
            const int f = g.node(e.src).frame;
            auto [it, inserted] = last_seen.try_emplace(e.dst, f);
            if (!inserted && f > it->second) it->second = f;
        }
    }

    auto refresh = [&](Node& n) {
        if (n.kind == NodeKind::Landmark) {
            if (n.fixed) return;  // already left the window for good
            auto it = last_seen.find(n.id);
            n.fixed = it == last_seen.end() || it->second <= horizon;
        } else if (n.kind == NodeKind::Vehicle) {
            n.fixed = n.frame <= horizon;
        } else if (!(n.kind == NodeKind::Camera && n.frame == 0)) {
            n.fixed = n.frame <= horizon;
        }
    };
    for (int i = g.first_active_edge; i < n_edges; ++i) {
        refresh(g.node(g.edges()[i].src));
        refresh(g.node(g.edges()[i].dst));
    }

    // A node is permanently out of play once its frame left the window (for
    // landmarks, once its freeze flag is set).
    auto retired = [&](const Node& n) {
        if (n.kind == NodeKind::Landmark) return n.fixed;
        return n.frame <= horizon && n.frame >= 0;
    };
    while (g.first_active_edge < n_edges) {
        const Edge& e = g.edges()[g.first_active_edge];
        if (!retired(g.node(e.src)) || !retired(g.node(e.dst))) break;
        ++g.first_active_edge;
    }

    // The conditional phase re-solves each object pose while it is being
    // formed (entry band, cameras still moving) every step, and sweeps the
    // whole window every third step so every pose is re-touched against
    // near-settled cameras before it freezes. The amortized sweep keeps the
    // typical step light without letting trailing poses go stale.
    const bool full_sweep = fd.frame % 3 == 0;
    auto in_band = [&](int frame) {
        return frame > horizon && (full_sweep || frame > fd.frame - 3);
    };
    std::vector<int> active;
    std::vector<int> chains;
    for (int i = g.first_active_edge; i < n_edges; ++i) {
        const Edge& e = g.edges()[i];
        const bool object_edge = e.kind == EdgeKind::CV || e.kind == EdgeKind::VV;
        if (object_edge) {
            // All object edges are handled by the conditional phase: their
            // pull on the cameras is weak compared to the odometry and lane
            // constraints, and keeping them out of the joint phase makes it
            // independent of the object count.
            if (in_band(g.node(e.dst).frame) ||
                (e.kind == EdgeKind::VV && in_band(g.node(e.src).frame)))
                chains.push_back(i);
            continue;
        }
        if (g.node(e.src).fixed && g.node(e.dst).fixed) continue;
        active.push_back(i);
    }
    SolveReport report = run_lm(g, cfg, active, cfg.incremental_iterations);

    // Conditional refinement: hold cameras and landmarks at their solved
    // values and re-solve every in-window object pose. The system splits
    // into independent per-track chains, so this stays cheap regardless of
    // how many objects are in the scene, while keeping object estimates
    // consistent with the cameras they were measured from.
    if (!chains.empty()) {
        for (int i : chains) {
            Node& s = g.node(g.edges()[i].src);
            s.fixed = s.kind == NodeKind::Vehicle ? !in_band(s.frame) : true;
            Node& d = g.node(g.edges()[i].dst);
            d.fixed = !in_band(d.frame);
        }
        // The chains are re-solved from a warm start every step, so each pose
        // receives one correction per step for as long as it stays in the
        // window -- plenty to track the cameras as they settle.
        const SolveReport refine = run_lm(g, cfg, chains, full_sweep ? 3 : 1);
        report.iterations += refine.iterations;
    }
    return report;
}

std::vector<GroundPoint> filter_landmarks_by_depth(const std::vector<GroundPoint>& points,
                                                   double t_max) {
    if (!(t_max > 0.0)) throw Error("depth threshold must be positive");
    std::vector<GroundPoint> out;
    for (const GroundPoint& p : points)
        if (p.z <= t_max) out.push_back(p);
    return out;
}

}  // namespace bev
