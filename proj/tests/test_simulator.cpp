#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "bev/evaluation.hpp"
#include "bev/optimizer.hpp"
#include "bev/rng.hpp"
#include "bev/simulator.hpp"

using namespace bev;

namespace {

Dataset make_dataset(const ScenarioSpec& spec, const NoiseModel& n) {
    return corrupt(generate_scenario(spec), n);
}

int count_edges(const PoseGraph& g, EdgeKind k) {
    int c = 0;
    for (const Edge& e : g.edges())
        if (e.kind == k) ++c;
    return c;
}

}  // namespace

TEST_CASE("rng: determinism, range, and moments") {
    Pcg64 a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double x = a.uniform();
        all_equal = all_equal && x == b.uniform();
        any_diff = any_diff || x != c.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);

    Pcg64 g(5);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = g.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("straight scenario: exact ground-truth construction") {
    ScenarioSpec spec;
    spec.kind = PathKind::Straight;
    spec.frames = 10;
    spec.speed = 1.0;
    const Scenario s = generate_scenario(spec);
    REQUIRE(s.ego_gt.size() == 10);
    for (int k = 0; k < 10; ++k) {
        CHECK(s.ego_gt[k].x == 0.0);
        CHECK(s.ego_gt[k].z == static_cast<double>(k));
        CHECK(s.ego_gt[k].theta == 0.0);
    }
    CHECK(s.vehicles.empty());
}

TEST_CASE("arc scenario: consecutive headings differ by exactly speed/radius") {
    ScenarioSpec spec;
    spec.kind = PathKind::Arc;
    spec.frames = 30;
    spec.speed = 2.0;
    spec.arc_radius = 40.0;
    const Scenario s = generate_scenario(spec);
    for (size_t k = 0; k + 1 < s.ego_gt.size(); ++k)
        CHECK(s.ego_gt[k + 1].theta - s.ego_gt[k].theta ==
              doctest::Approx(spec.speed / spec.arc_radius).epsilon(1e-15));
    // Constant speed along the polygonal path.
    for (size_t k = 0; k + 1 < s.ego_gt.size(); ++k)
        CHECK((s.ego_gt[k + 1].translation() - s.ego_gt[k].translation()).norm() ==
              doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("scenario spec validation") {
    ScenarioSpec spec;
    spec.frames = 1;
    CHECK_THROWS_AS(generate_scenario(spec), Error);
    spec.frames = 10;
    spec.speed = 0.0;
    CHECK_THROWS_AS(generate_scenario(spec), Error);
    spec.speed = 1.0;
    spec.vehicle_count = -1;
    CHECK_THROWS_AS(generate_scenario(spec), Error);
}

TEST_CASE("corrupt: zero noise reproduces ground truth exactly") {
    ScenarioSpec spec;
    spec.kind = PathKind::Arc;
    spec.frames = 20;
    spec.vehicle_count = 2;
    const Scenario s = generate_scenario(spec);
    const Dataset d = corrupt(s, {});

    REQUIRE(d.odometry.size() == 19);
    for (int k = 0; k + 1 < 20; ++k) {
        const Pose2 rel = relative(s.ego_gt[k], s.ego_gt[k + 1]);
        CHECK(d.odometry[k].x == rel.x);
        CHECK(d.odometry[k].z == rel.z);
        CHECK(d.odometry[k].theta == rel.theta);
    }
    for (const Detection& det : d.detections) {
        REQUIRE(det.bev3d.has_value());
        const Pose2 rel = relative(s.ego_gt[det.frame],
                                   s.vehicles.at(det.track_id)[det.frame].second);
        CHECK(det.bev3d->center_x == rel.x);
        CHECK(det.bev3d->center_z == rel.z);
        CHECK(det.depth.value() == rel.z);
    }
    // Dead reckoning reproduces the ground truth.
    const auto dr = dead_reckon(d);
    for (size_t k = 0; k < dr.size(); ++k) {
        CHECK(std::abs(dr[k].x - s.ego_gt[k].x) < 1e-12);
        CHECK(std::abs(dr[k].z - s.ego_gt[k].z) < 1e-12);
    }
}

TEST_CASE("corrupt: same seed gives a bit-identical dataset") {
    ScenarioSpec spec;
    spec.kind = PathKind::SCurve;
    spec.frames = 25;
    spec.vehicle_count = 3;
    NoiseModel n;
    n.seed = 99;
    n.odo_sigma_t = 0.05;
    n.odo_sigma_r = 0.01;
    n.det_sigma = 0.4;
    n.dropout_prob = 0.2;
    const Scenario s = generate_scenario(spec);
    const Dataset a = corrupt(s, n), b = corrupt(s, n);
    REQUIRE(a.odometry.size() == b.odometry.size());
    for (size_t k = 0; k < a.odometry.size(); ++k) {
        CHECK(a.odometry[k].x == b.odometry[k].x);
        CHECK(a.odometry[k].z == b.odometry[k].z);
        CHECK(a.odometry[k].theta == b.odometry[k].theta);
    }
    REQUIRE(a.detections.size() == b.detections.size());
    for (size_t i = 0; i < a.detections.size(); ++i) {
        CHECK(a.detections[i].frame == b.detections[i].frame);
        CHECK(a.detections[i].box2d == b.detections[i].box2d);
        CHECK(a.detections[i].bev3d->center_x == b.detections[i].bev3d->center_x);
    }
    // Different seed differs somewhere.
    NoiseModel n2 = n;
    n2.seed = 100;
    const Dataset c = corrupt(s, n2);
    bool diff = false;
    for (size_t k = 0; k < a.odometry.size(); ++k)
        diff = diff || a.odometry[k].x != c.odometry[k].x;
    CHECK(diff);
}

TEST_CASE("corrupt: odo_scale halves every step length exactly") {
    ScenarioSpec spec;
    spec.kind = PathKind::Arc;
    spec.frames = 15;
    NoiseModel n;
    n.odo_scale = 0.5;
    const Scenario s = generate_scenario(spec);
    const Dataset d = corrupt(s, n);
    for (size_t k = 0; k < d.odometry.size(); ++k) {
        const Pose2 rel = relative(s.ego_gt[k], s.ego_gt[k + 1]);
        CHECK(d.odometry[k].translation().norm() ==
              doctest::Approx(0.5 * rel.translation().norm()).epsilon(1e-15));
        CHECK(d.odometry[k].theta == rel.theta);  // rotation unscaled
    }
}

TEST_CASE("edge-count formula for always-visible vehicles") {
    ScenarioSpec spec;
    spec.kind = PathKind::Straight;
    spec.frames = 12;
    spec.vehicle_count = 3;
    const Dataset d = make_dataset(spec, {});
    BuildConfig cfg;
    const PoseGraph g = build_graph(d, cfg);
    const int f = spec.frames, v = spec.vehicle_count;
    CHECK(count_edges(g, EdgeKind::CC) == f - 1);
    CHECK(count_edges(g, EdgeKind::VV) == v * (f - 1));
    CHECK(count_edges(g, EdgeKind::CV) == v * f);
    CHECK(count_edges(g, EdgeKind::CP) > 0);

    // 3 frames, 1 vehicle: 2 CC, 2 VV, 3 CV.
    spec.frames = 3;
    spec.vehicle_count = 1;
    const PoseGraph g3 = build_graph(make_dataset(spec, {}), cfg);
    CHECK(count_edges(g3, EdgeKind::CC) == 2);
    CHECK(count_edges(g3, EdgeKind::VV) == 2);
    CHECK(count_edges(g3, EdgeKind::CV) == 3);

    // No vehicles: no VV/CV edges.
    spec.vehicle_count = 0;
    const PoseGraph g0 = build_graph(make_dataset(spec, {}), cfg);
    CHECK(count_edges(g0, EdgeKind::VV) == 0);
    CHECK(count_edges(g0, EdgeKind::CV) == 0);

    CHECK_THROWS_AS(build_graph(Dataset{}, cfg), Error);
}

TEST_CASE("landmark depth gate excludes far lane points") {
    FrameData fd;
    fd.frame = 0;
    fd.camera_node = 0;
    fd.has_odometry = false;
    fd.lanes.push_back({100, 0, Eigen::Vector2d(0.0, 25.0)});
    fd.lanes.push_back({101, 1, Eigen::Vector2d(0.0, 20.0)});  // at the threshold: kept
    PoseGraph g(GraphMode::SE2);
    SolverConfig cfg;
    cfg.landmark_depth_max = 20.0;
    append_frame(g, fd, cfg);
    CHECK_FALSE(g.has_node(100));
    CHECK(g.has_node(101));
    int cp = 0;
    for (const Edge& e : g.edges())
        if (e.kind == EdgeKind::CP) ++cp;
    CHECK(cp == 1);
}

TEST_CASE("zero-noise graph: near-zero cost and zero ATE after optimization") {
    ScenarioSpec spec;
    spec.kind = PathKind::Arc;
    spec.frames = 25;
    spec.vehicle_count = 2;
    const Dataset d = make_dataset(spec, {});
    BuildConfig cfg;
    PoseGraph g = build_graph(d, cfg);
    CHECK(total_cost(g).total < 1e-10);
    optimize_batch(g, cfg.solver);
    for (const TrajectoryEstimate& t : trajectories_from_graph(g)) {
        const TrajectoryEstimate gt =
            t.track < 0 ? gt_ego_trajectory(d) : gt_vehicle_trajectory(d, t.track);
        CHECK(ate_rms(t, gt).rms < 1e-9);
    }
}

TEST_CASE("build_graph is deterministic") {
    ScenarioSpec spec;
    spec.kind = PathKind::SCurve;
    spec.frames = 30;
    spec.vehicle_count = 2;
    NoiseModel n;
    n.seed = 7;
    n.odo_sigma_t = 0.05;
    n.odo_sigma_r = 0.005;
    n.det_sigma = 0.5;
    n.dropout_prob = 0.1;
    const Dataset d = make_dataset(spec, n);
    BuildConfig cfg;
    CHECK(serialize(build_graph(d, cfg)) == serialize(build_graph(d, cfg)));
}

TEST_CASE("metric step lengths from lanes recover exact speeds") {
    ScenarioSpec spec;
    spec.kind = PathKind::Arc;
    spec.frames = 30;
    spec.speed = 1.0;
    NoiseModel n;
    n.odo_scale = 0.5;  // lane points stay metric regardless
    const Dataset d = make_dataset(spec, n);
    BuildConfig cfg;
    const auto metric = metric_step_lengths_from_lanes(d, cfg);
    REQUIRE(metric.size() == d.odometry.size());
    int with_lanes = 0;
    for (double len : metric)
        if (len > 0.0) {
            CHECK(len == doctest::Approx(1.0).epsilon(1e-9));
            ++with_lanes;
        }
    CHECK(with_lanes > 20);
}

TEST_CASE("dataset directory round-trip preserves the built graph") {
    ScenarioSpec spec;
    spec.kind = PathKind::Arc;
    spec.frames = 20;
    spec.vehicle_count = 2;
    NoiseModel n;
    n.seed = 13;
    n.odo_sigma_t = 0.03;
    n.det_sigma = 0.3;
    n.dropout_prob = 0.1;
    const Dataset d = make_dataset(spec, n);
    const std::string dir =
        (std::filesystem::temp_directory_path() / "sim_roundtrip_ds").string();
    write_dataset(d, dir);
    for (const char* f : {"camera.txt", "odometry.csv", "detections.csv", "lanes.csv",
                          "gt_ego.csv", "gt_vehicles.csv", "meta.txt"})
        CHECK(std::filesystem::exists(std::filesystem::path(dir) / f));

    const Dataset back = read_dataset(dir);
    CHECK(back.noise.seed == n.seed);
    CHECK(back.spec.frames == spec.frames);
    CHECK(back.spec.vehicle_count == spec.vehicle_count);
    REQUIRE(back.odometry.size() == d.odometry.size());
    REQUIRE(back.detections.size() == d.detections.size());
    REQUIRE(back.gt_ego.size() == d.gt_ego.size());

    BuildConfig cfg;
    CHECK(serialize(build_graph(back, cfg)) == serialize(build_graph(d, cfg)));
    std::filesystem::remove_all(dir);
}
