#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "bev/posegraph.hpp"
#include "bev/rng.hpp"

using namespace bev;

namespace {

Eigen::MatrixXd ident(int n) { return Eigen::MatrixXd::Identity(n, n); }

Edge cc_edge(NodeId a, NodeId b, const Pose2& z, double lambda = 1.0) {
    Edge e;
    e.kind = EdgeKind::CC;
    e.src = a;
    e.dst = b;
    e.measurement = z;
    e.information = ident(3);
    e.scale = lambda;
    return e;
}

Edge cp_edge(NodeId agent, NodeId lm, const Eigen::Vector2d& offset, double lambda = 1.0) {
    Edge e;
    e.kind = EdgeKind::CP;
    e.src = agent;
    e.dst = lm;
    e.offset = offset;
    e.information = ident(2);
    e.scale = lambda;
    return e;
}

Pose2 random_pose2(Pcg64& rng) {
    return {20.0 * rng.uniform() - 10.0, 20.0 * rng.uniform() - 10.0,
            2.0 * kPi * rng.uniform() - kPi};
}

// Independent homogeneous-matrix oracle for the binary residual.
Eigen::Vector3d binary_oracle(const Pose2& z, const Pose2& ts, const Pose2& td) {
    auto hom = [](const Pose2& p) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m.topLeftCorner<2, 2>() = rot2(p.theta);
        m(0, 2) = p.x;
        m(1, 2) = p.z;
        return m;
    };
    const Eigen::Matrix3d u = hom(z).inverse() * hom(ts).inverse() * hom(td);
    return {u(0, 2), u(1, 2), std::atan2(u(1, 0), u(0, 0))};
}

}  // namespace

TEST_CASE("node bookkeeping and duplicate rejection") {
    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(), true));
    CHECK(g.nodes().size() == 1);
    CHECK(g.has_node(0));
    CHECK_THROWS_AS(g.add_node(Node::camera(0, 1, Pose2())), DuplicateNodeError);
    g.add_node(Node::landmark(7, 0, Eigen::Vector2d(5.0, 10.0)));
    CHECK(std::get<Eigen::Vector2d>(g.node(7).estimate) == Eigen::Vector2d(5.0, 10.0));
    CHECK_THROWS_AS(g.node(99), MissingEndpointError);
    // Mode mismatch: SE(3) estimate into an SE(2) graph.
    CHECK_THROWS_AS(g.add_node(Node::camera(1, 1, Pose3())), GraphError);
}

TEST_CASE("edge kind and endpoint validation") {
    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(), true));
    g.add_node(Node::camera(1, 1, Pose2(0, 1, 0)));
    g.add_node(Node::camera(5, 5, Pose2(0, 5, 0)));
    g.add_node(Node::vehicle(10, 0, 0, Pose2(2, 0, 0)));
    g.add_node(Node::vehicle(11, 0, 1, Pose2(2, 1, 0)));
    g.add_node(Node::vehicle(21, 1, 1, Pose2(-2, 1, 0)));
    g.add_node(Node::landmark(30, 0, Eigen::Vector2d(1.0, 1.0)));

    CHECK_NOTHROW(g.add_edge(cc_edge(0, 1, Pose2(0, 1, 0))));
    // Non-consecutive frames.
    CHECK_THROWS_AS(g.add_edge(cc_edge(1, 5, Pose2())), KindMismatchError);
    // CV between two cameras.
    {
        Edge e = cc_edge(0, 1, Pose2());
        e.kind = EdgeKind::CV;
        CHECK_THROWS_AS(g.add_edge(e), KindMismatchError);
    }
    // Valid CV: same frame.
    {
        Edge e = cc_edge(0, 10, Pose2(2, 0, 0));
        e.kind = EdgeKind::CV;
        CHECK_NOTHROW(g.add_edge(e));
    }
    // VV across tracks.
    {
        Edge e = cc_edge(10, 21, Pose2());
        e.kind = EdgeKind::VV;
        CHECK_THROWS_AS(g.add_edge(e), KindMismatchError);
        e = cc_edge(10, 11, Pose2(0, 1, 0));
        e.kind = EdgeKind::VV;
        CHECK_NOTHROW(g.add_edge(e));
    }
    // CP with landmark as agent.
    CHECK_THROWS_AS(g.add_edge(cp_edge(30, 30, Eigen::Vector2d::Zero())), KindMismatchError);
    CHECK_NOTHROW(g.add_edge(cp_edge(0, 30, Eigen::Vector2d::Zero())));
    // Vehicle agents are allowed on CP edges too.
    CHECK_NOTHROW(g.add_edge(cp_edge(10, 30, Eigen::Vector2d::Zero())));
    // Missing endpoint.
    CHECK_THROWS_AS(g.add_edge(cc_edge(0, 99, Pose2())), MissingEndpointError);
}

TEST_CASE("information matrix validation") {
    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(), true));
    g.add_node(Node::camera(1, 1, Pose2()));

    Edge e = cc_edge(0, 1, Pose2());
    e.information = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(g.add_edge(e), BadInformationError);

    e.information = ident(3);
    e.information(0, 1) = 0.5;  // asymmetric
    CHECK_THROWS_AS(g.add_edge(e), BadInformationError);

    e.information = ident(3);
    e.information(0, 0) = -1.0;  // indefinite
    CHECK_THROWS_AS(g.add_edge(e), BadInformationError);

    e.information = Eigen::MatrixXd::Zero(3, 3);  // PSD boundary is legal
    CHECK_NOTHROW(g.add_edge(e));

    e.information = ident(3);
    e.scale = -1.0;
    CHECK_THROWS_AS(g.add_edge(e), GraphError);
}

TEST_CASE("binary residual worked examples and oracle") {
    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(), true));
    g.add_node(Node::camera(1, 1, Pose2(1, 0, 0)));
    Edge e = cc_edge(0, 1, Pose2());
    g.add_edge(e);
    CHECK(binary_residual(g.edges()[0], g) == Eigen::Vector3d(1, 0, 0));

    PoseGraph g2;
    g2.add_node(Node::camera(0, 0, Pose2(0, 0, kPi / 2), true));
    g2.add_node(Node::camera(1, 1, Pose2(0, 1, kPi / 2)));
    g2.add_edge(cc_edge(0, 1, Pose2()));
    const Eigen::VectorXd r = binary_residual(g2.edges()[0], g2);
    CHECK(r(0) == doctest::Approx(1.0));
    CHECK(std::abs(r(1)) < 1e-12);
    CHECK(std::abs(r(2)) < 1e-12);

    Pcg64 rng(31);
    for (int i = 0; i < 500; ++i) {
        const Pose2 ts = random_pose2(rng);
        const Pose2 td = random_pose2(rng);
        const Pose2 z = random_pose2(rng);
        PoseGraph gr;
        gr.add_node(Node::camera(0, 0, ts, true));
        gr.add_node(Node::camera(1, 1, td));
        gr.add_edge(cc_edge(0, 1, z));
        const Eigen::VectorXd got = binary_residual(gr.edges()[0], gr);
        const Eigen::Vector3d want = binary_oracle(z, ts, td);
        CHECK((got.head<2>() - want.head<2>()).norm() < 1e-10);
        CHECK(std::abs(wrap_angle(got(2) - want(2))) < 1e-10);
        // Consistent measurement -> exactly zero.
        PoseGraph gz;
        gz.add_node(Node::camera(0, 0, ts, true));
        gz.add_node(Node::camera(1, 1, td));
        gz.add_edge(cc_edge(0, 1, relative(ts, td)));
        CHECK(binary_residual(gz.edges()[0], gz).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("unary residual is orientation-invariant and offset-aware") {
    for (double theta : {0.0, 0.7, -2.1, kPi}) {
        PoseGraph g;
        g.add_node(Node::camera(0, 0, Pose2(5, 10, theta), true));
        g.add_node(Node::landmark(1, 0, Eigen::Vector2d(5, 10)));
        g.add_edge(cp_edge(0, 1, Eigen::Vector2d::Zero()));
        CHECK(unary_residual(g.edges()[0], g).norm() == 0.0);
    }
    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(6, 10, 0), true));
    g.add_node(Node::landmark(1, 0, Eigen::Vector2d(5, 10)));
    g.add_edge(cp_edge(0, 1, Eigen::Vector2d::Zero()));
    g.add_edge(cp_edge(0, 1, Eigen::Vector2d(1, 0)));
    CHECK(unary_residual(g.edges()[0], g) == Eigen::Vector3d(1, 0, 0));
    CHECK(unary_residual(g.edges()[1], g).norm() == 0.0);
    // Padded rows never constrain orientation.
    CHECK(unary_residual(g.edges()[0], g).size() == 3);
    CHECK(padded_cp_information(g.edges()[0], g).rows() == 3);
    CHECK(padded_cp_information(g.edges()[0], g)(2, 2) == 0.0);
}

TEST_CASE("edge cost scales linearly in lambda") {
    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(), true));
    g.add_node(Node::camera(1, 1, Pose2(1, 0, 0)));
    g.add_edge(cc_edge(0, 1, Pose2(), 1.0));
    g.add_edge(cc_edge(0, 1, Pose2(), 10000.0));
    CHECK(edge_cost(g.edges()[0], g) == 1.0);
    CHECK(edge_cost(g.edges()[1], g) == 10000.0);

    Pcg64 rng(32);
    for (int i = 0; i < 200; ++i) {
        PoseGraph gr;
        gr.add_node(Node::camera(0, 0, random_pose2(rng), true));
        gr.add_node(Node::camera(1, 1, random_pose2(rng)));
        const double lambda = 100.0 * rng.uniform();
        gr.add_edge(cc_edge(0, 1, random_pose2(rng), 1.0));
        gr.add_edge(gr.edges()[0]);
        gr.edges()[1].scale = lambda;
        const double c1 = edge_cost(gr.edges()[0], gr);
        CHECK(c1 >= 0.0);
        CHECK(edge_cost(gr.edges()[1], gr) == doctest::Approx(lambda * c1).epsilon(1e-12));
    }
}

TEST_CASE("total cost decomposes into dynamic and static parts") {
    PoseGraph empty;
    CHECK(total_cost(empty).total == 0.0);

    PoseGraph g;
    g.add_node(Node::camera(0, 0, Pose2(), true));
    g.add_node(Node::camera(1, 1, Pose2(2, 0, 0)));
    g.add_node(Node::landmark(2, 0, Eigen::Vector2d(0, 0)));
    g.add_edge(cc_edge(0, 1, Pose2()));                                // cost 4
    g.add_edge(cp_edge(1, 2, Eigen::Vector2d(1, 0), 3.0));             // e=(1,0), cost 3
    const CostBreakdown c = total_cost(g);
    CHECK(c.dynamic_part == 4.0);
    CHECK(c.static_part == 3.0);
    CHECK(c.total == 7.0);

    double manual = 0.0;
    for (const Edge& e : g.edges()) manual += edge_cost(e, g);
    CHECK(c.total == manual);
}

TEST_CASE("residuals are invariant under a global rigid motion") {
    Pcg64 rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const Pose2 ts = random_pose2(rng);
        const Pose2 td = random_pose2(rng);
        const Pose2 z = random_pose2(rng);
        const Eigen::Vector2d lm(5.0 * rng.normal(), 5.0 * rng.normal());
        const Pose2 gmove = random_pose2(rng);

        const Eigen::Vector2d offset(0.5, -0.25);
        auto build = [&](const Pose2& s, const Pose2& d, const Eigen::Vector2d& l,
                         const Eigen::Vector2d& o) {
            PoseGraph g;
            g.add_node(Node::camera(0, 0, s, true));
            g.add_node(Node::camera(1, 1, d));
            g.add_node(Node::landmark(2, 0, l));
            g.add_edge(cc_edge(0, 1, z));
            g.add_edge(cp_edge(1, 2, o));
            return g;
        };
        PoseGraph a = build(ts, td, lm, offset);
        // World-frame quantities (landmark and CP offset) co-rotate with the
        // global motion; relative-pose measurements do not change.
        const Eigen::Matrix2d rg = rot2(gmove.theta);
        PoseGraph b = build(compose(gmove, ts), compose(gmove, td),
                            gmove.translation() + rg * lm, rg * offset);

        CHECK((binary_residual(a.edges()[0], a) - binary_residual(b.edges()[0], b))
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);
        // The CP residual rotates with the motion: norm and cost preserved.
        const Eigen::Vector2d ra = unary_residual(a.edges()[1], a).head<2>();
        const Eigen::Vector2d rb = unary_residual(b.edges()[1], b).head<2>();
        CHECK((rb - rg * ra).norm() < 1e-9);
        CHECK(std::abs(edge_cost(a.edges()[1], a) - edge_cost(b.edges()[1], b)) < 1e-9);
    }
}

TEST_CASE("zero fixed point: self-consistent graph has zero cost") {
    Pcg64 rng(34);
    PoseGraph g;
    std::vector<Pose2> poses;
    for (int k = 0; k < 10; ++k) {
        poses.push_back(random_pose2(rng));
        g.add_node(Node::camera(k, k, poses.back(), k == 0));
    }
    for (int k = 0; k + 1 < 10; ++k)
        g.add_edge(cc_edge(k, k + 1, relative(poses[k], poses[k + 1]), 10000.0));
    for (int k = 0; k < 10; ++k) {
        g.add_node(Node::landmark(100 + k, k, poses[k].translation()));
        g.add_edge(cp_edge(k, 100 + k, Eigen::Vector2d::Zero(), 10000.0));
    }
    CHECK(total_cost(g).total < 1e-12);
}

TEST_CASE("SE(2) serialization round-trips bit-exactly") {
    Pcg64 rng(35);
    PoseGraph g;
    g.add_node(Node::camera(0, 0, random_pose2(rng), true));
    g.add_node(Node::camera(1, 1, random_pose2(rng)));
    g.add_node(Node::vehicle(10, 4, 0, random_pose2(rng)));
    g.add_node(Node::vehicle(11, 4, 1, random_pose2(rng)));
    g.add_node(Node::landmark(30, 2, Eigen::Vector2d(rng.normal(), rng.normal())));
    g.add_edge(cc_edge(0, 1, random_pose2(rng), 10000.0));
    {
        Edge e = cc_edge(10, 11, random_pose2(rng), 1.0);
        e.kind = EdgeKind::VV;
        g.add_edge(e);
    }
    {
        Edge e = cc_edge(0, 10, random_pose2(rng), 505.0);
        e.kind = EdgeKind::CV;
        Eigen::MatrixXd omega = ident(3);
        omega(2, 2) = 0.0;
        omega(0, 1) = omega(1, 0) = 0.25;
        e.information = omega;
        g.add_edge(e);
    }
    g.add_edge(cp_edge(1, 30, Eigen::Vector2d(rng.normal(), rng.normal()), 10000.0));

    const std::string text = serialize(g);
    const PoseGraph back = parse_graph(text);
    CHECK(serialize(back) == text);
    REQUIRE(back.nodes().size() == g.nodes().size());
    REQUIRE(back.edges().size() == g.edges().size());
    for (const auto& [id, n] : g.nodes()) {
        const Node& m = back.node(id);
        CHECK(m.kind == n.kind);
        CHECK(m.frame == n.frame);
        CHECK(m.track == n.track);
        CHECK(m.point_index == n.point_index);
        CHECK(m.fixed == n.fixed);
    }
    for (size_t i = 0; i < g.edges().size(); ++i) {
        CHECK(back.edges()[i].kind == g.edges()[i].kind);
        CHECK(back.edges()[i].src == g.edges()[i].src);
        CHECK(back.edges()[i].dst == g.edges()[i].dst);
        CHECK(back.edges()[i].scale == g.edges()[i].scale);
        CHECK(back.edges()[i].information == g.edges()[i].information);
    }
}

TEST_CASE("SE(3) serialization round-trips bit-exactly") {
    Pcg64 rng(36);
    auto rp3 = [&rng] {
        Pose3 p;
        p.rotation = exp_so3(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
        p.translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
        return p;
    };
    PoseGraph g(GraphMode::SE3);
    g.add_node(Node::camera(0, 0, rp3(), true));
    g.add_node(Node::camera(1, 1, rp3()));
    g.add_node(Node::landmark(30, 0, Eigen::Vector3d(rng.normal(), 0.0, rng.normal())));
    {
        Edge e;
        e.kind = EdgeKind::CC;
        e.src = 0;
        e.dst = 1;
        e.measurement = rp3();
        e.information = ident(6);
        e.scale = 10000.0;
        g.add_edge(e);
    }
    {
        Edge e;
        e.kind = EdgeKind::CP;
        e.src = 1;
        e.dst = 30;
        e.offset = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
        e.information = ident(3);
        e.scale = 10000.0;
        g.add_edge(e);
    }
    const std::string text = serialize(g);
    const PoseGraph back = parse_graph(text);
    CHECK(serialize(back) == text);
    CHECK(std::get<Pose3>(back.node(0).estimate).rotation ==
          std::get<Pose3>(g.node(0).estimate).rotation);
    CHECK(Eigen::VectorXd(back.edges()[1].offset) == Eigen::VectorXd(g.edges()[1].offset));
}

TEST_CASE("parser reports malformed input with line numbers") {
    CHECK(parse_graph("MODE SE2\n").nodes().empty());
    CHECK_THROWS_AS(parse_graph("NODE_SE2 0 0 0 0 C 0\n"), ParseError);  // before MODE
    CHECK_THROWS_AS(parse_graph("MODE SE7\n"), ParseError);
    CHECK_THROWS_AS(parse_graph("MODE SE2\nNODE_SE2 0 0 0 C 0\n"), ParseError);  // short pose
    CHECK_THROWS_AS(parse_graph("MODE SE2\nBOGUS 1 2 3\n"), ParseError);
    try {
        parse_graph("MODE SE2\nNODE_SE2 0 0 0 nope C 0\n");
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    // Comments and blank lines are ignored.
    CHECK(parse_graph("MODE SE2\n# comment\n\nNODE_SE2 0 1 2 0.5 C 0 FIXED\n").nodes().size() ==
          1);
}
