#pragma once

#include <Eigen/Core>

#include "bev/errors.hpp"

// SE(2)/SE(3) group arithmetic on the ground-plane convention used
// throughout: camera axes are x-right, y-down, z-forward, the ground
// normal in the camera frame is n = (0, -1, 0) and the BEV plane is XZ.
// A positive SE(2) heading rotates the x axis toward the z axis
// (right-handed about the ground normal).

namespace bev {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

struct Pose2 {
    double x = 0.0;
    double z = 0.0;
    double theta = 0.0;

    Pose2() = default;
    Pose2(double x_, double z_, double theta_) : x(x_), z(z_), theta(wrap_angle(theta_)) {}

    Eigen::Vector2d translation() const { return {x, z}; }
};

/// 2x2 rotation taking x toward z by theta.
Eigen::Matrix2d rot2(double theta);

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& a);

/// Relative pose such that compose(src_world, result) == dst_world.
Pose2 relative(const Pose2& src_world, const Pose2& dst_world);

struct Pose3 {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Pose3() = default;
    // Throws if rotation is not orthonormal with determinant +1 (1e-9).
    Pose3(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);
};

Pose3 compose(const Pose3& a, const Pose3& b);
Pose3 inverse(const Pose3& a);
Pose3 relative(const Pose3& src_world, const Pose3& dst_world);

// SO(3) log/exp with series fallbacks below 1e-6 rad. log_so3 at exactly
// pi picks the representative whose largest axis component is positive.
Eigen::Vector3d log_so3(const Eigen::Matrix3d& r);
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);

/// Inverse of the SO(3) right Jacobian, d/d(delta) log(R Exp(delta)) at 0.
Eigen::Matrix3d right_jacobian_inv_so3(const Eigen::Vector3d& w);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// (dx, dz, dtheta) for SE(2).
Eigen::Vector3d error_from_transform(const Pose2& u);
/// (tx, ty, tz, wx, wy, wz) for SE(3), rotation as axis-angle.
Eigen::Matrix<double, 6, 1> error_from_transform(const Pose3& u);

/// Projects an SE(3) pose to the ground plane: heading is taken from the
/// rotated +z (forward) column. Throws DegenerateHeadingError when the
/// forward axis is vertical (XZ projection norm < 1e-9).
Pose2 project_to_se2(const Pose3& t);

/// Yaw about the ground normal, zero height; project_to_se2 inverts it exactly.
Pose3 embed_se2(const Pose2& p);

// Right-multiplicative on-manifold retractions used by the optimizer.
Pose2 retract(const Pose2& p, const Eigen::Vector3d& delta);
Pose3 retract(const Pose3& p, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace bev
