#include "bev/lanemap.hpp"

#include <algorithm>
#include <cmath>

#include "text_io.hpp"

namespace bev {

std::vector<Eigen::Vector2d> aggregate_window(
    const std::vector<std::vector<Eigen::Vector2d>>& per_frame_points,
    const std::vector<Pose2>& poses, int window, double depth_cutoff) {
    if (per_frame_points.size() != poses.size())
        throw Error("aggregate_window: frame/pose count mismatch");
    if (window < 1) throw Error("aggregate_window: window must be >= 1");

    std::vector<Eigen::Vector2d> out;
    const size_t n = poses.size();
    const size_t first = n > static_cast<size_t>(window) ? n - window : 0;
    for (size_t f = first; f < n; ++f) {
        const Eigen::Matrix2d r = rot2(poses[f].theta);
        const Eigen::Vector2d t = poses[f].translation();
        for (const Eigen::Vector2d& p : per_frame_points[f]) {
            if (p.y() > depth_cutoff) continue;
            out.emplace_back(t + r * p);
        }
    }
    return out;
}

OccupancyGrid rasterize(const std::vector<Eigen::Vector2d>& points, double resolution,
                        const Eigen::Vector2d& origin, int width, int height) {
    if (resolution <= 0.0) throw Error("rasterize: resolution must be positive");
    OccupancyGrid g;
    g.resolution = resolution;
    g.origin = origin;
    g.width = width;
    g.height = height;
    g.counts.assign(static_cast<size_t>(width) * height, 0);
    for (const Eigen::Vector2d& p : points) {
        const int ix = static_cast<int>(std::floor((p.x() - origin.x()) / resolution));
        const int iz = static_cast<int>(std::floor((p.y() - origin.y()) / resolution));
        if (g.in_bounds(ix, iz)) ++g.at(ix, iz);
    }
    return g;
}

OccupancyGrid density_filter(const OccupancyGrid& grid, int m, int min_fg) {
    if (m < 1 || m % 2 == 0) throw Error("density_filter: m must be odd and >= 1");
    OccupancyGrid out = grid;
    const int r = m / 2;
    for (int iz = 0; iz < grid.height; ++iz)
        for (int ix = 0; ix < grid.width; ++ix) {
            if (grid.at(ix, iz) == 0) continue;
            int fg = 0;
            for (int dz = -r; dz <= r; ++dz)
                for (int dx = -r; dx <= r; ++dx) {
                    const int jx = ix + dx, jz = iz + dz;
                    if (grid.in_bounds(jx, jz) && grid.at(jx, jz) > 0) ++fg;
                }
            if (fg <= min_fg) out.at(ix, iz) = 0;
        }
    return out;
}

namespace {

OccupancyGrid binarize(const OccupancyGrid& g) {
    OccupancyGrid out = g;
    for (int& c : out.counts) c = c > 0 ? 1 : 0;
    return out;
}

OccupancyGrid dilate(const OccupancyGrid& g) {
    OccupancyGrid out = g;
    for (int iz = 0; iz < g.height; ++iz)
        for (int ix = 0; ix < g.width; ++ix) {
            int v = 0;
            for (int dz = -1; dz <= 1 && !v; ++dz)
                for (int dx = -1; dx <= 1 && !v; ++dx) {
                    const int jx = ix + dx, jz = iz + dz;
                    if (g.in_bounds(jx, jz) && g.at(jx, jz) > 0) v = 1;
                }
            out.at(ix, iz) = v;
        }
    return out;
}

OccupancyGrid erode(const OccupancyGrid& g) {
    OccupancyGrid out = g;
    for (int iz = 0; iz < g.height; ++iz)
        for (int ix = 0; ix < g.width; ++ix) {
            int v = 1;
            for (int dz = -1; dz <= 1 && v; ++dz)
                for (int dx = -1; dx <= 1 && v; ++dx) {
                    const int jx = ix + dx, jz = iz + dz;
                    if (!g.in_bounds(jx, jz) || g.at(jx, jz) == 0) v = 0;
                }
            out.at(ix, iz) = v;
        }
    return out;
}

}  // namespace

OccupancyGrid morphology(const OccupancyGrid& grid, MorphOp op) {
    const OccupancyGrid b = binarize(grid);
    return op == MorphOp::Open ? dilate(erode(b)) : erode(dilate(b));
}

std::vector<LineSegment> hough_lines(const OccupancyGrid& grid, int angle_bins,
                                     double rho_resolution, int min_support) {
    if (angle_bins < 2) throw Error("hough_lines: need at least 2 angle bins");

    // rho range from the grid corners, padded by one bin.
    double rho_min = 0.0, rho_max = 0.0;
    for (int cx = 0; cx <= 1; ++cx)
        for (int cz = 0; cz <= 1; ++cz) {
            const Eigen::Vector2d corner =
                grid.origin + grid.resolution *
                                  Eigen::Vector2d(cx * grid.width, cz * grid.height);
            const double r = corner.norm();
            rho_max = std::max(rho_max, r);
        }
    rho_min = -rho_max;
    const int rho_bins =
        std::max(1, static_cast<int>(std::ceil((rho_max - rho_min) / rho_resolution)) + 2);

    std::vector<int> acc(static_cast<size_t>(angle_bins) * rho_bins, 0);
    auto acc_at = [&](int a, int r) -> int& { return acc[static_cast<size_t>(a) * rho_bins + r]; };

    for (int iz = 0; iz < grid.height; ++iz)
        for (int ix = 0; ix < grid.width; ++ix) {
            if (grid.at(ix, iz) == 0) continue;
            const Eigen::Vector2d c = grid.cell_center(ix, iz);
            for (int a = 0; a < angle_bins; ++a) {
                const double alpha = kPi * a / angle_bins;
                const double rho = c.x() * std::cos(alpha) + c.y() * std::sin(alpha);
                const int r = static_cast<int>(std::floor((rho - rho_min) / rho_resolution));
                if (r >= 0 && r < rho_bins) ++acc_at(a, r);
            }
        }

    struct Candidate {
        int a, r, support;
    };
    std::vector<Candidate> cands;
    for (int a = 0; a < angle_bins; ++a)
        for (int r = 0; r < rho_bins; ++r) {
            const int v = acc_at(a, r);
            if (v < min_support) continue;
            bool is_max = true;
            for (int da = -1; da <= 1 && is_max; ++da)
                for (int dr = -1; dr <= 1 && is_max; ++dr) {
                    const int na = a + da, nr = r + dr;
                    if (na < 0 || na >= angle_bins || nr < 0 || nr >= rho_bins) continue;
                    if (acc_at(na, nr) > v) is_max = false;
                }
            if (is_max) cands.push_back({a, r, v});
        }

    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
        if (x.support != y.support) return x.support > y.support;
        if (x.a != y.a) return x.a < y.a;
        return x.r < y.r;
    });

    std::vector<Candidate> kept;
    for (const Candidate& c : cands) {
        bool suppressed = false;
        for (const Candidate& k : kept)
            if (std::abs(k.a - c.a) <= 1 && std::abs(k.r - c.r) <= 1) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(c);
    }

    std::vector<LineSegment> out;
    for (const Candidate& c : kept) {
        LineSegment l;
        l.angle = kPi * c.a / angle_bins;
        l.offset = rho_min + (c.r + 0.5) * rho_resolution;
        l.support = c.support;
        out.push_back(l);
    }
    return out;
}

std::vector<LanePointCloud> lane_constraint_points(const OccupancyGrid& grid,
                                                   const std::vector<LineSegment>& lines,
                                                   double lane_assignment_radius) {
    if (lines.empty()) throw Error("lane_constraint_points: no lines");
    std::vector<LanePointCloud> out(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) out[i].lane_id = static_cast<int>(i);

    for (int iz = 0; iz < grid.height; ++iz)
        for (int ix = 0; ix < grid.width; ++ix) {
            if (grid.at(ix, iz) == 0) continue;
            const Eigen::Vector2d c = grid.cell_center(ix, iz);
            int best = -1;
            double best_dist = lane_assignment_radius;
            for (size_t i = 0; i < lines.size(); ++i) {
                const double d = std::abs(c.x() * std::cos(lines[i].angle) +
                                          c.y() * std::sin(lines[i].angle) - lines[i].offset);
                if (d <= best_dist) {
                    best_dist = d;
                    best = static_cast<int>(i);
                }
            }
            if (best >= 0) out[best].points.push_back(c);
        }

    std::vector<LanePointCloud> nonempty;
    for (auto& l : out)
        if (!l.points.empty()) nonempty.push_back(std::move(l));
    return nonempty;
}

void write_grid(const OccupancyGrid& grid, const std::string& path) {
    auto f = detail::open_out(path);
    using detail::fmt17;
    f << "GRID " << fmt17(grid.resolution) << ' ' << fmt17(grid.origin.x()) << ' '
      << fmt17(grid.origin.y()) << ' ' << grid.width << ' ' << grid.height << '\n';
    for (int iz = 0; iz < grid.height; ++iz) {
        for (int ix = 0; ix < grid.width; ++ix) {
            if (ix) f << ' ';
            f << grid.at(ix, iz);
        }
        f << '\n';
    }
}

OccupancyGrid read_grid(const std::string& path) {
    auto f = detail::open_in(path);
    std::string tag;
    OccupancyGrid g;
    if (!(f >> tag) || tag != "GRID") throw ParseError(1, "missing GRID header");
    if (!(f >> g.resolution >> g.origin.x() >> g.origin.y() >> g.width >> g.height))
        throw ParseError(1, "malformed GRID header");
    g.counts.assign(static_cast<size_t>(g.width) * g.height, 0);
    for (int iz = 0; iz < g.height; ++iz)
        for (int ix = 0; ix < g.width; ++ix)
            if (!(f >> g.at(ix, iz))) throw ParseError(2 + iz, "truncated grid row");
    return g;
}

void write_lane_points(const std::vector<LanePointCloud>& lanes, const std::string& path) {
    auto f = detail::open_out(path);
    using detail::fmt17;
    f << "lane_id,x,z\n";
    for (const LanePointCloud& l : lanes)
        for (const Eigen::Vector2d& p : l.points)
            f << l.lane_id << ',' << fmt17(p.x()) << ',' << fmt17(p.y()) << '\n';
}

}  // namespace bev
