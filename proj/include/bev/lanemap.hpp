#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bev/geometry.hpp"

// BEV static map construction: aggregate near-field ground points over a
// trailing window, rasterize into an occupancy grid, clean it up (density
// filter + binary morphology) and extract straight lane lines with a Hough
// transform; the surviving cells feed per-lane point clouds.

namespace bev {

struct OccupancyGrid {
    double resolution = 0.1;            // meters per cell
    Eigen::Vector2d origin{0.0, 0.0};   // world (x, z) of cell (0, 0) corner
    int width = 0;                      // cells along x
    int height = 0;                     // cells along z
    std::vector<int> counts;            // row-major, z-major rows

    int& at(int ix, int iz) { return counts[static_cast<size_t>(iz) * width + ix]; }
    int at(int ix, int iz) const { return counts[static_cast<size_t>(iz) * width + ix]; }
    bool in_bounds(int ix, int iz) const {
        return ix >= 0 && ix < width && iz >= 0 && iz < height;
    }
    /// World coordinates of a cell center.
    Eigen::Vector2d cell_center(int ix, int iz) const {
        return origin + resolution * Eigen::Vector2d(ix + 0.5, iz + 0.5);
    }
};

struct LanePointCloud {
    int lane_id = 0;
    std::vector<Eigen::Vector2d> points;  // world frame, meters
};

struct LineSegment {
    double angle = 0.0;   // radians; normal form rho = x cos(a) + z sin(a)
    double offset = 0.0;  // rho, meters
    int support = 0;      // accumulator cell count
};

/// Keeps camera-frame points with z <= depth_cutoff over the trailing
/// `window` frames and transforms them into the world frame.
std::vector<Eigen::Vector2d> aggregate_window(
    const std::vector<std::vector<Eigen::Vector2d>>& per_frame_points,
    const std::vector<Pose2>& poses, int window, double depth_cutoff);

OccupancyGrid rasterize(const std::vector<Eigen::Vector2d>& points, double resolution,
                        const Eigen::Vector2d& origin, int width, int height);

/// A cell survives iff the nonzero-cell count of its m x m neighborhood
/// (zero-padded borders) exceeds min_fg. Survivors keep their counts.
OccupancyGrid density_filter(const OccupancyGrid& grid, int m, int min_fg);

enum class MorphOp { Open, Close };

/// Binary opening/closing with a full 3x3 structuring element; output
/// counts are 0/1.
OccupancyGrid morphology(const OccupancyGrid& grid, MorphOp op);

/// Local accumulator maxima with support >= min_support, non-maximum
/// suppressed within +-1 bin, sorted by support descending.
std::vector<LineSegment> hough_lines(const OccupancyGrid& grid, int angle_bins,
                                     double rho_resolution, int min_support);

/// Assigns each foreground cell center to the nearest line within the
/// radius; unassigned cells are dropped.
std::vector<LanePointCloud> lane_constraint_points(const OccupancyGrid& grid,
                                                   const std::vector<LineSegment>& lines,
                                                   double lane_assignment_radius);

void write_grid(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid read_grid(const std::string& path);
void write_lane_points(const std::vector<LanePointCloud>& lanes, const std::string& path);

}  // namespace bev
