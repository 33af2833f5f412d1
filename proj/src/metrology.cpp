#include "bev/metrology.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "text_io.hpp"

namespace bev {

CameraModel::CameraModel(const Eigen::Matrix3d& k_, double h_, const Eigen::Vector3d& n_)
    : k(k_), h(h_), n(n_) {
    if (k(0, 0) <= 0.0 || k(1, 1) <= 0.0) throw Error("camera focal lengths must be positive");
    if (h <= 0.0) throw Error("camera height must be positive");
    if (std::abs(n.norm() - 1.0) > 1e-12) throw Error("ground normal must be unit length");
}

CameraModel CameraModel::pinhole(double fx, double fy, double cx, double cy, double h) {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return CameraModel(k, h);
}

GroundPoint backproject_ground(const Eigen::Vector2d& pixel, const CameraModel& cam) {
    // Analytic inverse of the zero-skew intrinsics keeps axis-aligned
    // pixels exact (no general-inverse roundoff).
    const Eigen::Vector3d ray((pixel.x() - cam.k(0, 2)) / cam.k(0, 0),
                              (pixel.y() - cam.k(1, 2)) / cam.k(1, 1), 1.0);
    const double denom = cam.n.dot(ray);
    if (std::abs(denom) < 1e-9)
        throw HorizonSingularityError("pixel at or above the horizon line");
    const Eigen::Vector3d p = -cam.h * ray / denom;
    if (p.z() <= 0.0) throw BehindCameraError("ground intersection behind the camera");
    return {p.x(), p.y(), p.z()};
}

Eigen::Vector2d vehicle_bev_from_box2d(const Detection& det, const CameraModel& cam) {
    const double u = 0.5 * (det.box2d(0) + det.box2d(2));
    const double v = det.box2d(3);
    const GroundPoint p = backproject_ground({u, v}, cam);
    return {p.x, p.z};
}

VehicleMeasurement fuse_vehicle_measurements(const std::optional<Eigen::Vector3d>& from_bev3d,
                                             const std::optional<Eigen::Vector2d>& from_box2d,
                                             double depth, const FuseConfig& cfg) {
    if (!from_bev3d && !from_box2d)
        throw NoMeasurementError("no localization source for vehicle");
    if (depth <= 0.0) throw Error("depth must be positive");

    // alpha = 1 at d_near (pseudolidar dominates), 0 at d_far.
    double alpha = (cfg.d_far - depth) / (cfg.d_far - cfg.d_near);
    alpha = std::clamp(alpha, 0.0, 1.0);

    VehicleMeasurement out;
    out.weight = cfg.w_far + alpha * (cfg.w_near - cfg.w_far);
    if (from_bev3d && from_box2d) {
        out.position = alpha * from_bev3d->head<2>() + (1.0 - alpha) * (*from_box2d);
    } else if (from_bev3d) {
        out.position = from_bev3d->head<2>();
    } else {
        out.position = *from_box2d;
    }
    if (from_bev3d) out.yaw = from_bev3d->z();
    return out;
}

double estimate_scale(const std::vector<double>& raw_step_lengths,
                      const std::vector<double>& metric_step_lengths, int window) {
    if (raw_step_lengths.empty()) throw Error("estimate_scale: empty input");
    if (raw_step_lengths.size() != metric_step_lengths.size())
        throw Error("estimate_scale: length mismatch");
    if (window < 1 || window % 2 == 0) throw Error("estimate_scale: window must be odd and >= 1");

    std::vector<double> ratios;
    const size_t n = raw_step_lengths.size();
    const size_t take = std::min<size_t>(window, n);
    for (size_t i = n - take; i < n; ++i) {
        if (raw_step_lengths[i] < 1e-9)
            throw DegenerateStepError("raw step length below 1e-9");
        ratios.push_back(metric_step_lengths[i] / raw_step_lengths[i]);
    }
    std::sort(ratios.begin(), ratios.end());
    const size_t m = ratios.size();
    if (m % 2 == 1) return ratios[m / 2];
    return 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
}

std::vector<Pose2> apply_scale(const std::vector<Pose2>& trajectory, double s) {
    if (s <= 0.0) throw Error("apply_scale: scale must be positive");
    std::vector<Pose2> out;
    out.reserve(trajectory.size());
    for (const Pose2& p : trajectory) out.emplace_back(p.x * s, p.z * s, p.theta);
    return out;
}

CameraModel read_camera(const std::string& path) {
    auto f = detail::open_in(path);
    double fx, fy, cx, cy, h, nx, ny, nz;
    if (!(f >> fx >> fy >> cx >> cy >> h >> nx >> ny >> nz))
        throw ParseError(1, "malformed camera file " + path);
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return CameraModel(k, h, Eigen::Vector3d(nx, ny, nz));
}

void write_camera(const CameraModel& cam, const std::string& path) {
    auto f = detail::open_out(path);
    using detail::fmt17;
    f << fmt17(cam.k(0, 0)) << ' ' << fmt17(cam.k(1, 1)) << ' ' << fmt17(cam.k(0, 2)) << ' '
      << fmt17(cam.k(1, 2)) << '\n'
      << fmt17(cam.h) << '\n'
      << fmt17(cam.n.x()) << ' ' << fmt17(cam.n.y()) << ' ' << fmt17(cam.n.z()) << '\n';
}

std::vector<Detection> read_detections(const std::string& path) {
    auto f = detail::open_in(path);
    std::vector<Detection> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;  // header
        const auto fields = detail::split(line, ',');
        if (fields.size() != 10) throw ParseError(line_no, "expected 10 fields");
        Detection d;
        d.frame = static_cast<int>(detail::parse_int(fields[0], line_no));
        d.track_id = static_cast<int>(detail::parse_int(fields[1], line_no));
        for (int i = 0; i < 4; ++i) d.box2d(i) = detail::parse_double(fields[2 + i], line_no);
        if (!fields[6].empty() || !fields[7].empty() || !fields[8].empty()) {
            Detection::Bev3d b;
            b.center_x = detail::parse_double(fields[6], line_no);
            b.center_z = detail::parse_double(fields[7], line_no);
            b.yaw = detail::parse_double(fields[8], line_no);
            d.bev3d = b;
        }
        if (!fields[9].empty()) d.depth = detail::parse_double(fields[9], line_no);
        if (d.box2d(0) >= d.box2d(2) || d.box2d(1) >= d.box2d(3))
            throw ParseError(line_no, "degenerate detection box");
        if (d.depth && *d.depth <= 0.0) throw ParseError(line_no, "non-positive depth");
        out.push_back(d);
    }
    return out;
}

void write_detections(const std::vector<Detection>& dets, const std::string& path) {
    auto f = detail::open_out(path);
    using detail::fmt17;
    f << "frame,track_id,u_min,v_min,u_max,v_max,bev_x,bev_z,bev_yaw,depth\n";
    for (const Detection& d : dets) {
        f << d.frame << ',' << d.track_id;
        for (int i = 0; i < 4; ++i) f << ',' << fmt17(d.box2d(i));
        if (d.bev3d)
            f << ',' << fmt17(d.bev3d->center_x) << ',' << fmt17(d.bev3d->center_z) << ','
              << fmt17(d.bev3d->yaw);
        else
            f << ",,,";
        f << ',' << (d.depth ? fmt17(*d.depth) : "") << '\n';
    }
}

}  // namespace bev
