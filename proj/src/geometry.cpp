#include "hpfrac/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hpfrac {

double norm(Point2 a) { return std::hypot(a.x, a.y); }
double dist(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 d = b - a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) return dist(p, a);
  double t = dot(p - a, d) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return dist(p, a + t * d);
}

double point_line_signed_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 d = b - a;
  const double len = norm(d);
  if (len == 0.0) throw std::invalid_argument("degenerate line: endpoints coincide");
  return cross(d, p - a) / len;
}

namespace {

double segment_segment_distance(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double s1 = cross(b - a, c - a);
  const double s2 = cross(b - a, d - a);
  const double s3 = cross(d - c, a - c);
  const double s4 = cross(d - c, b - c);
  if (((s1 > 0) != (s2 > 0)) && ((s3 > 0) != (s4 > 0)) && s1 != 0 && s2 != 0 && s3 != 0 &&
      s4 != 0) {
    return 0.0;  // proper crossing
  }
  double best = point_segment_distance(a, c, d);
  best = std::min(best, point_segment_distance(b, c, d));
  best = std::min(best, point_segment_distance(c, a, b));
  best = std::min(best, point_segment_distance(d, a, b));
  return best;
}

bool segments_properly_intersect(Point2 a, Point2 b, Point2 c, Point2 d, double tol) {
  return segment_segment_distance(a, b, c, d) <= tol;
}

}  // namespace

Polygon::Polygon(std::vector<Point2> vertices) : verts_(std::move(vertices)) {
  const std::size_t n = verts_.size();
  if (n < 3) throw std::invalid_argument("polygon needs at least 3 vertices");

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) scale = std::max(scale, dist(verts_[i], verts_[j]));
  if (scale == 0.0) throw std::invalid_argument("polygon vertices all coincide");
  const double tol = 1e-12 * scale;

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (dist(verts_[i], verts_[j]) <= tol) {
        throw std::invalid_argument("repeated polygon vertices at indices " + std::to_string(i) +
                                    " and " + std::to_string(j));
      }

  double twice_area = 0.0;
  for (std::size_t i = 0; i < n; ++i) twice_area += cross(verts_[i], verts_[(i + 1) % n]);
  if (twice_area <= 0.0) {
    throw std::invalid_argument(
        "polygon vertices are clockwise; list them counterclockwise instead");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = verts_[i];
    const Point2 b = verts_[(i + 1) % n];
    const Point2 c = verts_[(i + 2) % n];
    if (std::abs(cross(b - a, c - b)) <= tol * std::max(dist(a, b), dist(b, c))) {
      throw std::invalid_argument("collinear consecutive vertices around index " +
                                  std::to_string((i + 1) % n));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_properly_intersect(verts_[i], verts_[(i + 1) % n], verts_[j],
                                      verts_[(j + 1) % n], tol)) {
        throw std::invalid_argument("polygon is not simple: edges " + std::to_string(i) + " and " +
                                    std::to_string(j) + " intersect");
      }
    }
  }
}

double Polygon::edge_length(std::size_t i) const { return dist(edge_start(i), edge_end(i)); }

Point2 Polygon::edge_normal(std::size_t i) const {
  const Point2 d = edge_end(i) - edge_start(i);
  const double len = norm(d);
  return {d.y / len, -d.x / len};
}

double Polygon::area() const {
  double twice_area = 0.0;
  const std::size_t n = verts_.size();
  for (std::size_t i = 0; i < n; ++i) twice_area += cross(verts_[i], verts_[(i + 1) % n]);
  return 0.5 * twice_area;
}

double Polygon::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < verts_.size(); ++i)
    for (std::size_t j = i + 1; j < verts_.size(); ++j) d = std::max(d, dist(verts_[i], verts_[j]));
  return d;
}

double Polygon::shortest_edge_length() const {
  double len = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < num_edges(); ++i) len = std::min(len, edge_length(i));
  return len;
}

double Polygon::interior_angle(std::size_t i) const {
  const std::size_t n = verts_.size();
  const Point2 prev = verts_[(i + n - 1) % n];
  const Point2 next = verts_[(i + 1) % n];
  const Point2 d_next = next - verts_[i];
  const Point2 d_prev = prev - verts_[i];
  double angle = std::atan2(cross(d_next, d_prev), dot(d_next, d_prev));
  if (angle <= 0.0) angle += 2.0 * std::numbers::pi;
  return angle;
}

bool Polygon::contains(Point2 p) const {
  if (on_boundary(p, 1e-13 * diameter())) return false;
  bool inside = false;
  const std::size_t n = verts_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = verts_[i];
    const Point2 b = verts_[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool Polygon::on_boundary(Point2 p, double tol) const {
  for (std::size_t i = 0; i < num_edges(); ++i)
    if (point_segment_distance(p, edge_start(i), edge_end(i)) <= tol) return true;
  return false;
}

double Polygon::boundary_distance(Point2 p) const {
  if (!contains(p)) {
    throw std::domain_error("boundary_distance: point (" + std::to_string(p.x) + ", " +
                            std::to_string(p.y) + ") is not strictly inside the polygon");
  }
  double d;
  nearest_edge(p, &d);
  return d;
}

std::size_t Polygon::nearest_edge(Point2 p, double* distance_out) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < num_edges(); ++i) {
    const double d = point_segment_distance(p, edge_start(i), edge_end(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (distance_out) *distance_out = best_d;
  return best;
}

double Polygon::vertex_distance(std::size_t v, Point2 p) const { return dist(verts_.at(v), p); }

double Polygon::edge_distance(std::size_t e, Point2 p) const {
  return point_segment_distance(p, edge_start(e), edge_end(e));
}

std::pair<std::size_t, std::size_t> Polygon::incident_edges(std::size_t v) const {
  const std::size_t n = verts_.size();
  return {(v + n - 1) % n, v};
}

Polygon Polygon::unit_square() {
  return Polygon({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}});
}

Polygon Polygon::l_shape() {
  return Polygon({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {0.0, -1.0}});
}

Polygon read_polygon(std::istream& in) {
  std::vector<Point2> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x, y;
    if (ss >> x >> y) {
      double extra;
      if (ss >> extra) {
        throw std::invalid_argument("polygon file line " + std::to_string(lineno) +
                                    ": expected exactly two coordinates");
      }
      pts.push_back({x, y});
    } else {
      std::string word;
      std::istringstream check(line);
      if (check >> word) {
        throw std::invalid_argument("polygon file line " + std::to_string(lineno) +
                                    ": cannot parse '" + line + "'");
      }
    }
  }
  return Polygon(std::move(pts));
}

Polygon read_polygon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open polygon file: " + path);
  return read_polygon(in);
}

void write_polygon(std::ostream& out, const Polygon& poly) {
  out.precision(17);
  for (const Point2& v : poly.vertices()) out << v.x << " " << v.y << "\n";
}

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::Vertex: return "vertex";
    case RegionKind::VertexEdge: return "vertex_edge";
    case RegionKind::Edge: return "edge";
    case RegionKind::Interior: return "interior";
  }
  return "unknown";
}

NeighborhoodConfig::NeighborhoodConfig(const Polygon& poly, double xi)
    : xi_(xi), num_vertices_(poly.num_vertices()) {
  if (!(xi > 0.0) || !(xi < 1.0)) {
    throw std::invalid_argument("xi must lie in (0, 1), got " + std::to_string(xi));
  }
  const std::size_t n = poly.num_vertices();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist(poly.vertex(i), poly.vertex(j));
      if (2.0 * xi > d) {
        throw std::invalid_argument("xi too large: vertex balls " + std::to_string(i) + " and " +
                                    std::to_string(j) + " overlap (2*xi > " + std::to_string(d) +
                                    ")");
      }
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    const double half_angle_sine = std::sin(0.5 * poly.interior_angle(v));
    if (xi > half_angle_sine) {
      throw std::invalid_argument("xi too large: vertex-edge sectors at vertex " +
                                  std::to_string(v) + " overlap (xi > sin(theta/2) = " +
                                  std::to_string(half_angle_sine) + ")");
    }
    if (xi > 0.5 * half_angle_sine) {
      throw std::invalid_argument("xi too large: edge tubes meeting at vertex " +
                                  std::to_string(v) + " overlap (xi > sin(theta/2)/2)");
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    const auto [e_in, e_out] = poly.incident_edges(v);
    for (std::size_t e = 0; e < n; ++e) {
      if (e == e_in || e == e_out) continue;
      const double d = poly.edge_distance(e, poly.vertex(v));
      if (xi + xi * xi > d) {
        throw std::invalid_argument("xi too large: ball at vertex " + std::to_string(v) +
                                    " meets the tube of edge " + std::to_string(e));
      }
    }
  }

  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t f = e + 1; f < n; ++f) {
      const bool adjacent = (f == e + 1) || (e == 0 && f == n - 1);
      if (adjacent) continue;
      const double d = segment_segment_distance(poly.edge_start(e), poly.edge_end(e),
                                                poly.edge_start(f), poly.edge_end(f));
      if (2.0 * xi * xi > d) {
        throw std::invalid_argument("xi too large: tubes of non-adjacent edges " +
                                    std::to_string(e) + " and " + std::to_string(f) + " overlap");
      }
    }
  }
}

double NeighborhoodConfig::default_xi(const Polygon& poly) {
  const std::size_t n = poly.num_vertices();
  double bound = poly.shortest_edge_length();
  for (std::size_t v = 0; v < n; ++v) {
    const auto [e_in, e_out] = poly.incident_edges(v);
    const double shortest_incident = std::min(poly.edge_length(e_in), poly.edge_length(e_out));
    bound = std::min(bound, std::sin(0.5 * poly.interior_angle(v)) * shortest_incident);
  }
  return 0.25 * bound;
}

RegionTag classify(const Polygon& poly, const NeighborhoodConfig& config, Point2 p) {
  if (config.num_vertices_ != poly.num_vertices()) {
    throw std::invalid_argument("NeighborhoodConfig was built for a different polygon");
  }
  if (!poly.contains(p)) {
    throw std::domain_error("classify: point is not strictly inside the polygon");
  }
  const double xi = config.xi_;
  const std::size_t n = poly.num_vertices();

  for (std::size_t v = 0; v < n; ++v) {
    const double r_v = poly.vertex_distance(v, p);
    if (r_v >= xi) continue;
    const auto [e_in, e_out] = poly.incident_edges(v);
    bool all_sectors_clear = true;
    for (std::size_t e : {e_in, e_out}) {
      if (poly.edge_distance(e, p) / r_v < xi) {
        all_sectors_clear = false;
        break;
      }
    }
    if (all_sectors_clear) return {RegionKind::Vertex, v, no_index};
  }

  for (std::size_t v = 0; v < n; ++v) {
    const double r_v = poly.vertex_distance(v, p);
    if (r_v >= xi) continue;
    const auto [e_in, e_out] = poly.incident_edges(v);
    for (std::size_t e : {e_in, e_out}) {
      if (poly.edge_distance(e, p) / r_v < xi) return {RegionKind::VertexEdge, v, e};
    }
  }

  for (std::size_t e = 0; e < n; ++e) {
    if (poly.edge_distance(e, p) >= xi * xi) continue;
    const std::size_t v0 = e;
    const std::size_t v1 = (e + 1) % n;
    if (poly.vertex_distance(v0, p) >= xi && poly.vertex_distance(v1, p) >= xi) {
      return {RegionKind::Edge, no_index, e};
    }
  }

  return {RegionKind::Interior, no_index, no_index};
}

}  // namespace hpfrac
