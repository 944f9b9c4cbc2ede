#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace hpfrac {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double t, Point2 a) { return {t * a.x, t * a.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
double norm(Point2 a);
double dist(Point2 a, Point2 b);

// Distance from p to the closed segment [a, b].
double point_segment_distance(Point2 p, Point2 a, Point2 b);

// Signed distance from p to the infinite line through (a, b); positive on the left
// of the direction b - a.
double point_line_signed_distance(Point2 p, Point2 a, Point2 b);

constexpr std::size_t no_index = std::numeric_limits<std::size_t>::max();

// Simple closed polygon with counterclockwise vertex order. Construction validates
// simplicity, orientation, and the absence of repeated or collinear consecutive
// vertices; violations raise std::invalid_argument with a description of the defect.
class Polygon {
 public:
  explicit Polygon(std::vector<Point2> vertices);

  std::size_t num_vertices() const { return verts_.size(); }
  std::size_t num_edges() const { return verts_.size(); }
  const std::vector<Point2>& vertices() const { return verts_; }
  Point2 vertex(std::size_t i) const { return verts_[i]; }

  // Edge i runs from vertex i to vertex (i + 1) mod n.
  Point2 edge_start(std::size_t i) const { return verts_[i]; }
  Point2 edge_end(std::size_t i) const { return verts_[(i + 1) % verts_.size()]; }
  double edge_length(std::size_t i) const;
  // Outward unit normal of edge i (domain lies on the left of the edge direction).
  Point2 edge_normal(std::size_t i) const;

  double area() const;
  double diameter() const;
  double shortest_edge_length() const;
  // Interior angle at vertex i, in (0, 2*pi); reflex vertices give values above pi.
  double interior_angle(std::size_t i) const;

  bool contains(Point2 p) const;                    // strict interior
  bool on_boundary(Point2 p, double tol) const;     // within tol of some edge
  // Distance from an interior point to the boundary; throws std::domain_error when
  // p is outside the closure or on the boundary.
  double boundary_distance(Point2 p) const;

  // Index of the edge segment nearest to p, together with the distance.
  std::size_t nearest_edge(Point2 p, double* distance_out = nullptr) const;
  double vertex_distance(std::size_t v, Point2 p) const;
  double edge_distance(std::size_t e, Point2 p) const;

  // Edges incident to vertex v: the one ending at v and the one starting at v.
  std::pair<std::size_t, std::size_t> incident_edges(std::size_t v) const;

  static Polygon unit_square();
  static Polygon l_shape();

 private:
  std::vector<Point2> verts_;
};

// Plain text polygon files: one "x y" pair per line, '#' starts a comment,
// vertices in counterclockwise order.
Polygon read_polygon(std::istream& in);
Polygon read_polygon_file(const std::string& path);
void write_polygon(std::ostream& out, const Polygon& poly);

enum class RegionKind { Vertex, VertexEdge, Edge, Interior };

std::string to_string(RegionKind kind);

struct RegionTag {
  RegionKind kind = RegionKind::Interior;
  std::size_t vertex = no_index;  // set for Vertex and VertexEdge
  std::size_t edge = no_index;    // set for VertexEdge and Edge
};

// Boundary-fitted neighborhood structure controlled by a cutoff parameter xi.
// The constructor verifies the separation conditions that make the vertex,
// vertex-edge, and edge neighborhoods pairwise disjoint:
//   * 2*xi below every vertex-vertex distance,
//   * xi <= sin(theta_v / 2) at every vertex (sector disjointness),
//   * xi <= sin(theta_v / 2) / 2 (tubes of edges meeting at v stay apart),
//   * xi + xi^2 below the distance from any vertex to any non-incident edge,
//   * 2*xi^2 below the distance between any two non-adjacent edges.
class NeighborhoodConfig {
 public:
  NeighborhoodConfig(const Polygon& poly, double xi);

  double xi() const { return xi_; }
  static double default_xi(const Polygon& poly);

 private:
  double xi_ = 0.0;
  std::size_t num_vertices_ = 0;
  friend RegionTag classify(const Polygon&, const NeighborhoodConfig&, Point2);
};

// Classifies an interior point into the vertex / vertex-edge / edge / interior
// regions, with that priority order. Throws std::domain_error for points outside
// the open domain.
RegionTag classify(const Polygon& poly, const NeighborhoodConfig& config, Point2 p);

}  // namespace hpfrac
