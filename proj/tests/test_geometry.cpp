#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "bev/geometry.hpp"
#include "bev/rng.hpp"

using namespace bev;

namespace {

// Independent homogeneous-matrix oracle for SE(2) arithmetic.
Eigen::Matrix3d hom(const Pose2& p) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m.topLeftCorner<2, 2>() = rot2(p.theta);
    m(0, 2) = p.x;
    m(1, 2) = p.z;
    return m;
}

Pose2 from_hom(const Eigen::Matrix3d& m) {
    return {m(0, 2), m(1, 2), std::atan2(m(1, 0), m(0, 0))};
}

void check_pose_eq(const Pose2& a, const Pose2& b, double tol) {
    CHECK(std::abs(a.x - b.x) < tol);
    CHECK(std::abs(a.z - b.z) < tol);
    CHECK(std::abs(wrap_angle(a.theta - b.theta)) < tol);
}

Pose2 random_pose2(Pcg64& rng) {
    return {20.0 * rng.uniform() - 10.0, 20.0 * rng.uniform() - 10.0,
            2.0 * kPi * rng.uniform() - kPi};
}

Pose3 random_pose3(Pcg64& rng) {
    const Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    Pose3 p;
    p.rotation = exp_so3(w);
    p.translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 5.0;
    return p;
}

}  // namespace

TEST_CASE("angle wrapping stays in (-pi, pi]") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(2.5 * kPi) == doctest::Approx(0.5 * kPi));
    Pcg64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double t = 100.0 * (rng.uniform() - 0.5);
        const double w = wrap_angle(t);
        CHECK(w > -kPi);
        CHECK(w <= kPi);
        CHECK(std::abs(std::sin(w) - std::sin(t)) < 1e-9);
        CHECK(std::abs(std::cos(w) - std::cos(t)) < 1e-9);
    }
}

TEST_CASE("SE(2) compose matches worked example and matrix oracle") {
    const Pose2 a(1.0, 0.0, kPi / 2.0);
    const Pose2 b(1.0, 0.0, 0.0);
    const Pose2 c = compose(a, b);
    CHECK(c.x == doctest::Approx(1.0));
    CHECK(c.z == doctest::Approx(1.0));
    CHECK(c.theta == doctest::Approx(kPi / 2.0));

    Pcg64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const Pose2 p = random_pose2(rng);
        const Pose2 q = random_pose2(rng);
        check_pose_eq(compose(p, q), from_hom(hom(p) * hom(q)), 1e-10);
    }
}

TEST_CASE("SE(2) inverse matches worked examples and matrix oracle") {
    check_pose_eq(inverse(Pose2(1.0, 0.0, 0.0)), Pose2(-1.0, 0.0, 0.0), 1e-12);
    check_pose_eq(inverse(Pose2(1.0, 1.0, kPi / 2.0)), Pose2(-1.0, 1.0, -kPi / 2.0), 1e-12);

    Pcg64 rng(2);
    for (int i = 0; i < 1000; ++i) {
        const Pose2 p = random_pose2(rng);
        check_pose_eq(inverse(p), from_hom(hom(p).inverse()), 1e-10);
        check_pose_eq(compose(p, inverse(p)), Pose2(), 1e-12);
    }
}

TEST_CASE("SE(2) relative pose") {
    check_pose_eq(relative(Pose2(1, 0, kPi / 2), Pose2(1, 1, kPi / 2)), Pose2(1, 0, 0), 1e-12);
    Pcg64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const Pose2 s = random_pose2(rng);
        const Pose2 d = random_pose2(rng);
        check_pose_eq(compose(s, relative(s, d)), d, 1e-10);
        check_pose_eq(relative(s, s), Pose2(), 1e-12);
    }
}

TEST_CASE("SE(2) group laws hold over random triples") {
    Pcg64 rng(4);
    for (int i = 0; i < 1000; ++i) {
        const Pose2 a = random_pose2(rng);
        const Pose2 b = random_pose2(rng);
        const Pose2 c = random_pose2(rng);
        check_pose_eq(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-10);
        check_pose_eq(compose(Pose2(), a), a, 1e-12);
        check_pose_eq(compose(a, Pose2()), a, 1e-12);
        CHECK(compose(a, b).theta > -kPi);
        CHECK(compose(a, b).theta <= kPi);
    }
}

TEST_CASE("Pose3 constructor rejects improper rotations") {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) = 1.1;
    CHECK_THROWS_AS(Pose3(m, Eigen::Vector3d::Zero()), Error);
    Eigen::Matrix3d refl = Eigen::Matrix3d::Identity();
    refl(2, 2) = -1.0;  // determinant -1
    CHECK_THROWS_AS(Pose3(refl, Eigen::Vector3d::Zero()), Error);
}

TEST_CASE("SE(3) group laws hold over random triples") {
    Pcg64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const Pose3 a = random_pose3(rng);
        const Pose3 b = random_pose3(rng);
        const Pose3 c = random_pose3(rng);
        const Pose3 ab_c = compose(compose(a, b), c);
        const Pose3 a_bc = compose(a, compose(b, c));
        CHECK((ab_c.rotation - a_bc.rotation).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ab_c.translation - a_bc.translation).cwiseAbs().maxCoeff() < 1e-10);
        const Pose3 e = compose(a, inverse(a));
        CHECK((e.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(e.translation.cwiseAbs().maxCoeff() < 1e-10);
        const Pose3 d = compose(a, relative(a, b));
        CHECK((d.rotation - b.rotation).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((d.translation - b.translation).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("SO(3) log/exp round-trip including small and near-pi angles") {
    Pcg64 rng(6);
    for (int i = 0; i < 1000; ++i) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        axis.normalize();
        double theta;
        if (i % 3 == 0)
            theta = 1e-8 * rng.uniform();  // series branch
        else if (i % 3 == 1)
            theta = kPi - 1e-8 * rng.uniform();  // near-pi branch
        else
            theta = kPi * rng.uniform();
        const Eigen::Vector3d w = theta * axis;
        const Eigen::Vector3d back = log_so3(exp_so3(w));
        // At theta ~ pi the sign of the axis is ambiguous.
        const double err = std::min((back - w).norm(), (back + w).norm());
        CHECK(err < 1e-6);
        // Axis recovery at the pi singularity is accurate to ~1e-8 only.
        CHECK((exp_so3(back) - exp_so3(w)).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("log at exactly pi picks largest component positive") {
    const Eigen::Vector3d w = log_so3(exp_so3(Eigen::Vector3d(0.0, kPi, 0.0)));
    CHECK(w.y() == doctest::Approx(kPi));
    CHECK(std::abs(w.x()) < 1e-9);
    CHECK(std::abs(w.z()) < 1e-9);
}

TEST_CASE("error_from_transform examples") {
    const Eigen::Vector3d e2 = error_from_transform(Pose2(1.0, 2.0, 0.0));
    CHECK(e2 == Eigen::Vector3d(1.0, 2.0, 0.0));
    CHECK(error_from_transform(Pose2()).norm() == 0.0);

    // Rotation by 0.3 rad about +y, zero translation.
    Pose3 p;
    p.rotation = exp_so3(Eigen::Vector3d(0.0, 0.3, 0.0));
    const auto e3 = error_from_transform(p);
    CHECK(e3.head<3>().norm() == 0.0);
    CHECK(e3(3) == doctest::Approx(0.0));
    CHECK(e3(4) == doctest::Approx(0.3));
    CHECK(e3(5) == doctest::Approx(0.0));

    Pcg64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const Pose3 t = random_pose3(rng);
        CHECK(error_from_transform(relative(t, t)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("right_jacobian_inv_so3 matches finite-difference definition") {
    // Jr^{-1}(w) = d/d(delta) log(Exp(w) Exp(delta)) at delta = 0.
    Pcg64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
        w *= 0.6;
        const Eigen::Matrix3d analytic = right_jacobian_inv_so3(w);
        const double h = 1e-6;
        Eigen::Matrix3d numeric;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d d = Eigen::Vector3d::Zero();
            d(k) = h;
            const Eigen::Vector3d lp = log_so3(exp_so3(w) * exp_so3(d));
            const Eigen::Vector3d lm = log_so3(exp_so3(w) * exp_so3(-d));
            numeric.col(k) = (lp - lm) / (2.0 * h);
        }
        CHECK((analytic - numeric).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("ground-plane projection and embedding") {
    check_pose_eq(project_to_se2(Pose3()), Pose2(), 1e-12);

    // Yaw-only rotation preserves heading and translation components.
    Pcg64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        const Pose2 p = random_pose2(rng);
        check_pose_eq(project_to_se2(embed_se2(p)), p, 1e-12);
        const Pose3 q = embed_se2(p);
        CHECK(q.translation.y() == 0.0);
        CHECK((q.rotation * q.rotation.transpose() - Eigen::Matrix3d::Identity())
                  .cwiseAbs()
                  .maxCoeff() < 1e-14);
    }

    // Small pitch does not change projected heading about the ground normal.
    Pose3 yawed = embed_se2(Pose2(0, 0, 0.5));
    Pose3 pitched;
    pitched.rotation = yawed.rotation * exp_so3(Eigen::Vector3d(0.1, 0.0, 0.0));
    CHECK(project_to_se2(pitched).theta == doctest::Approx(0.5).epsilon(1e-9));

    // Forward axis vertical: heading undefined.
    Pose3 vertical;
    vertical.rotation = exp_so3(Eigen::Vector3d(kPi / 2.0, 0.0, 0.0));
    CHECK_THROWS_AS(project_to_se2(vertical), DegenerateHeadingError);
}

TEST_CASE("embedding/composition commute") {
    Pcg64 rng(10);
    for (int i = 0; i < 500; ++i) {
        const Pose2 a = random_pose2(rng);
        const Pose2 b = random_pose2(rng);
        const Pose3 lhs = compose(embed_se2(a), embed_se2(b));
        const Pose3 rhs = embed_se2(compose(a, b));
        CHECK((lhs.rotation - rhs.rotation).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((lhs.translation - rhs.translation).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("retractions move poses on-manifold") {
    Pcg64 rng(12);
    for (int i = 0; i < 200; ++i) {
        const Pose2 p = random_pose2(rng);
        check_pose_eq(retract(p, Eigen::Vector3d::Zero()), p, 1e-15);
        const Pose3 q = random_pose3(rng);
        Eigen::Matrix<double, 6, 1> d;
        for (int k = 0; k < 6; ++k) d(k) = 0.1 * rng.normal();
        const Pose3 r = retract(q, d);
        CHECK((r.rotation * r.rotation.transpose() - Eigen::Matrix3d::Identity())
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        // Retraction is consistent with the local error convention.
        const Pose3 rel = relative(q, r);
        CHECK((rel.translation - d.head<3>()).norm() < 1e-12);
        CHECK((log_so3(rel.rotation) - d.tail<3>()).norm() < 1e-10);
    }
}
