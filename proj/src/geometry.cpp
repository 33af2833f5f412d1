#include "bev/geometry.hpp"

#include <cmath>

#include <Eigen/LU>

namespace bev {

double wrap_angle(double theta) {
    double t = std::fmod(theta, 2.0 * kPi);
    if (t <= -kPi) t += 2.0 * kPi;
    if (t > kPi) t -= 2.0 * kPi;
    return t;
}

Eigen::Matrix2d rot2(double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
    const Eigen::Vector2d t = a.translation() + rot2(a.theta) * b.translation();
    return {t.x(), t.y(), a.theta + b.theta};
}

Pose2 inverse(const Pose2& a) {
    const Eigen::Vector2d t = -(rot2(-a.theta) * a.translation());
    return {t.x(), t.y(), -a.theta};
}

Pose2 relative(const Pose2& src_world, const Pose2& dst_world) {
    return compose(inverse(src_world), dst_world);
}

Pose3::Pose3(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9)
        throw Error("Pose3 rotation is not a proper rotation matrix");
}

Pose3 compose(const Pose3& a, const Pose3& b) {
    Pose3 out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.translation + a.rotation * b.translation;
    return out;
}

Pose3 inverse(const Pose3& a) {
    Pose3 out;
    out.rotation = a.rotation.transpose();
    out.translation = -(a.rotation.transpose() * a.translation);
    return out;
}

Pose3 relative(const Pose3& src_world, const Pose3& dst_world) {
    return compose(inverse(src_world), dst_world);
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& r) {
    const double cos_theta = std::min(1.0, std::max(-1.0, (r.trace() - 1.0) * 0.5));
    const double theta = std::acos(cos_theta);
    const Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (theta < 1e-6) {
        // log(R) ~ vee(R - R^T)/2 * (1 + theta^2/6)
        return 0.5 * v * (1.0 + theta * theta / 6.0);
    }
    if (kPi - theta < 1e-6) {
        // R ~ I + 2*K^2, so (R + I)/2 = a a^T gives the axis up to sign.
        const Eigen::Matrix3d b = 0.5 * (r + Eigen::Matrix3d::Identity());
        Eigen::Vector3d a(std::sqrt(std::max(0.0, b(0, 0))),
                          std::sqrt(std::max(0.0, b(1, 1))),
                          std::sqrt(std::max(0.0, b(2, 2))));
        int k = 0;
        a.cwiseAbs().maxCoeff(&k);
        // Recover relative signs from the dominant row, then make the
        // largest component positive (documented deterministic choice).
        for (int i = 0; i < 3; ++i)
            if (i != k && b(k, i) < 0.0) a(i) = -a(i);
        a.normalize();
        return theta * a;
    }
    return theta / (2.0 * std::sin(theta)) * v;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    const Eigen::Matrix3d k = skew(w);
    double a, b;
    if (theta < 1e-6) {
        a = 1.0 - theta * theta / 6.0;
        b = 0.5 - theta * theta / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Matrix3d right_jacobian_inv_so3(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    const Eigen::Matrix3d k = skew(w);
    double c;
    if (theta < 1e-6) {
        c = 1.0 / 12.0;
    } else {
        c = 1.0 / (theta * theta) -
            (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    }
    return Eigen::Matrix3d::Identity() + 0.5 * k + c * k * k;
}

Eigen::Vector3d error_from_transform(const Pose2& u) {
    return {u.x, u.z, u.theta};
}

Eigen::Matrix<double, 6, 1> error_from_transform(const Pose3& u) {
    Eigen::Matrix<double, 6, 1> e;
    e.head<3>() = u.translation;
    e.tail<3>() = log_so3(u.rotation);
    return e;
}

Pose2 project_to_se2(const Pose3& t) {
    const Eigen::Vector3d f = t.rotation.col(2);
    const double norm_xz = std::hypot(f.x(), f.z());
    if (norm_xz < 1e-9)
        throw DegenerateHeadingError("forward axis is vertical, heading undefined");
    return {t.translation.x(), t.translation.z(), std::atan2(-f.x(), f.z())};
}

Pose3 embed_se2(const Pose2& p) {
    const double c = std::cos(p.theta);
    const double s = std::sin(p.theta);
    Eigen::Matrix3d r;
    r << c, 0, -s, 0, 1, 0, s, 0, c;
    Pose3 out;
    out.rotation = r;
    out.translation = Eigen::Vector3d(p.x, 0.0, p.z);
    return out;
}

Pose2 retract(const Pose2& p, const Eigen::Vector3d& delta) {
    return compose(p, Pose2(delta.x(), delta.y(), delta.z()));
}

Pose3 retract(const Pose3& p, const Eigen::Matrix<double, 6, 1>& delta) {
    Pose3 out;
    out.rotation = p.rotation * exp_so3(delta.tail<3>());
    out.translation = p.translation + p.rotation * delta.head<3>();
    return out;
}

}  // namespace bev
