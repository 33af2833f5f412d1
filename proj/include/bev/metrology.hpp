#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bev/errors.hpp"
#include "bev/geometry.hpp"

// Single-view metrology: ground-plane back-projection from a calibrated
// camera at known height, vehicle localization from detections, fusion of
// the two localization sources, and moving-median scale recovery.

namespace bev {

struct CameraModel {
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    double h = 1.0;                          // height above ground, meters
    Eigen::Vector3d n{0.0, -1.0, 0.0};       // unit ground normal, camera frame

    CameraModel() = default;
    // Throws on fx/fy <= 0, h <= 0 or |n| != 1 (1e-12).
    CameraModel(const Eigen::Matrix3d& k_, double h_,
                const Eigen::Vector3d& n_ = {0.0, -1.0, 0.0});

    static CameraModel pinhole(double fx, double fy, double cx, double cy, double h);
};

struct GroundPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct Detection {
    int frame = 0;
    int track_id = 0;
    Eigen::Vector4d box2d{0, 0, 0, 0};  // u_min, v_min, u_max, v_max
    struct Bev3d {
        double center_x = 0.0;
        double center_z = 0.0;
        double yaw = 0.0;
        double length = 0.0;
        double width = 0.0;
    };
    std::optional<Bev3d> bev3d;
    std::optional<double> depth;  // meters, > 0
};

struct VehicleMeasurement {
    Eigen::Vector2d position{0.0, 0.0};  // camera BEV frame, meters
    std::optional<double> yaw;           // radians, camera frame
    double weight = 10.0;                // lambda in [10, 1000]
};

struct FuseConfig {
    double d_near = 10.0;     // full pseudolidar trust at and below this depth
    double d_far = 30.0;      // full box bottom-center trust at and beyond
    double w_near = 1000.0;
    double w_far = 10.0;
};

/// Back-projects a pixel onto the ground plane: X = -H K^-1 x / (n^T K^-1 x).
/// Throws HorizonSingularityError for pixels on/above the horizon and
/// BehindCameraError when the intersection falls behind the camera.
GroundPoint backproject_ground(const Eigen::Vector2d& pixel, const CameraModel& cam);

/// Ground position of the bottom-center of a 2D detection box.
Eigen::Vector2d vehicle_bev_from_box2d(const Detection& det, const CameraModel& cam);

/// Combines the two localization sources with a depth-gauged weight.
VehicleMeasurement fuse_vehicle_measurements(
    const std::optional<Eigen::Vector3d>& from_bev3d,  // x, z, yaw
    const std::optional<Eigen::Vector2d>& from_box2d,
    double depth, const FuseConfig& cfg = {});

/// Moving median of the trailing `window` per-step metric/raw ratios.
double estimate_scale(const std::vector<double>& raw_step_lengths,
                      const std::vector<double>& metric_step_lengths,
                      int window);

std::vector<Pose2> apply_scale(const std::vector<Pose2>& trajectory, double s);

// File formats: camera text file and detection CSV, one row per detection
// with empty fields for absent optionals.
CameraModel read_camera(const std::string& path);
void write_camera(const CameraModel& cam, const std::string& path);
std::vector<Detection> read_detections(const std::string& path);
void write_detections(const std::vector<Detection>& dets, const std::string& path);

}  // namespace bev
