#include "dogm/box.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dogm {
namespace {

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  const size_t n = poly.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = poly[i];
    const Eigen::Vector2d& q = poly[(i + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(twice);
}

// Clips a polygon against the half-plane left of the directed edge a->b.
std::vector<Eigen::Vector2d> clip_half_plane(const std::vector<Eigen::Vector2d>& poly,
                                             const Eigen::Vector2d& a,
                                             const Eigen::Vector2d& b) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(poly.size() + 2);
  const Eigen::Vector2d dir = b - a;
  auto side = [&](const Eigen::Vector2d& p) {
    return dir.x() * (p.y() - a.y()) - dir.y() * (p.x() - a.x());
  };
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& cur = poly[i];
    const Eigen::Vector2d& nxt = poly[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    if (sc >= 0.0) out.push_back(cur);
    if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

void require_nondegenerate(const ObjectBox& b) {
  require(b.width > 0.0 && b.length > 0.0 && std::isfinite(b.area()),
          "rotated box must have positive width and length");
}

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

double intersection_area(const ObjectBox& a, const ObjectBox& b) {
  require_nondegenerate(a);
  require_nondegenerate(b);
  const auto ca = a.corners();
  std::vector<Eigen::Vector2d> poly(ca.begin(), ca.end());
  const auto cb = b.corners();
  for (int i = 0; i < 4 && !poly.empty(); ++i)
    poly = clip_half_plane(poly, cb[i], cb[(i + 1) % 4]);
  return polygon_area(poly);
}

double rotated_iou(const ObjectBox& a, const ObjectBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
    return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
                          return p.x() == q.x() && p.y() == q.y();
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, lo = k + 1; i-- > 0;) {  // upper chain
    while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

ObjectBox min_area_rect(const std::vector<Eigen::Vector2d>& points) {
  require(!points.empty(), "min_area_rect: empty point set");
  const std::vector<Eigen::Vector2d> hull = convex_hull(points);

  if (hull.size() == 1)
    return ObjectBox::make(hull[0], 0.0, 0.0, 0.0);
  if (hull.size() == 2) {
    const Eigen::Vector2d d = hull[1] - hull[0];
    return ObjectBox::make(0.5 * (hull[0] + hull[1]), 0.0, d.norm(),
                           std::atan2(d.y(), d.x()));
  }

  double best_area = std::numeric_limits<double>::infinity();
  ObjectBox best{};
  const size_t n = hull.size();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d edge = hull[(i + 1) % n] - hull[i];
    const double len = edge.norm();
    if (len == 0.0) continue;
    const Eigen::Vector2d u = edge / len;
    const Eigen::Vector2d v{-u.y(), u.x()};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const Eigen::Vector2d& p : hull) {
      const double pu = u.dot(p);
      const double pv = v.dot(p);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double du = umax - umin;
    const double dv = vmax - vmin;
    const double area = du * dv;
    if (area < best_area) {
      best_area = area;
      const Eigen::Vector2d center =
          0.5 * (umin + umax) * u + 0.5 * (vmin + vmax) * v;
      if (du >= dv)
        best = ObjectBox::make(center, dv, du, std::atan2(u.y(), u.x()));
      else
        best = ObjectBox::make(center, du, dv, std::atan2(v.y(), v.x()));
    }
  }
  return best;
}

}  // namespace dogm
