#pragma once

#include <string>
#include <vector>

#include "polymass/expr.hpp"
#include "polymass/surface.hpp"

namespace polymass {

//! A logical face: one or more affine patches lying in a common hyperplane
//! with a shared outward unit normal. Box faces are single patches;
//! polygonal faces of 3-d prototypes are fan-triangulated.
struct Face {
  std::string tag;
  VecN outward{};
  std::vector<HypersurfacePatch> patches;
  std::vector<int> edge_ids;
  double euclidean_area = 0.0;
};

struct Edge {
  EdgePatch patch;
  double euclidean_measure = 0.0;  // (n-2)-volume
};

//! Combinatorial coordinate polyhedron: faces, edges with two adjacent faces
//! each, and the Euclidean dihedral angles along the edges.
class Polytope {
 public:
  int dimension() const { return n_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Edge>& edges() const { return edges_; }

  double face_measure() const;      // |F|, Euclidean
  double edge_measure() const;      // |E|, Euclidean
  double inradius() const;          // r_P = min_{x in boundary} |x|
  bool encloses_origin() const;
  double min_abs_sin_alpha() const;

  //! Exact sum of (outward normal . e_axis) * area over all faces; zero for
  //! a closed boundary.
  double euclidean_closed_flux(int axis) const;

  //! Uniform scaling about the origin; Euclidean dihedral angles unchanged.
  Polytope scaled(double factor) const;

  //! Axis-aligned cube [-L, L]^n with 2n faces and 2n(n-1) edges.
  static Polytope box(int n, double L);
  //! Axis-aligned box with general per-axis bounds and optional face tags.
  static Polytope box_bounds(int n, std::span<const double> lo,
                             std::span<const double> hi,
                             const std::vector<std::string>& face_tags = {});
  //! 3-d prototype library: cube, rectangular-box, triangular-prism,
  //! tetrahedron. All enclose the origin at unit scale.
  static Polytope prototype(const std::string& name);
  //! 3-d polytope from explicit vertex/face lists (1-based indices in the
  //! file; faces ordered outward by the right-hand rule). Faces must be
  //! convex polygons; the polyhedron itself may be non-convex.
  static Polytope from_file(const std::string& path);
  static Polytope from_text(const std::string& text,
                            const std::string& origin = "<string>");

  //! Rectangular prism in upper-half-space coordinates:
  //! {e^-L <= y_1 <= e^L, |y_a| <= sigma}. The two y_1-faces are tagged
  //! bottom-horosphere / top-horosphere, the sides vertical.
  static Polytope ah_prism(int n, double L, double sigma);

 private:
  int n_ = 0;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  friend Polytope build_from_vertex_faces(
      const std::vector<VecN>& vertices,
      const std::vector<std::vector<int>>& face_vertices, int n);
};

//! Growing polyhedron sequences: scaled boxes, scaled prototypes, or AH
//! prisms with sigma given as an expression in L.
struct SequencePlan {
  enum class Kind { Box, Prototype, Prism, Sphere };
  Kind kind = Kind::Box;
  int n = 3;
  std::vector<double> scales;  // box L, prototype factor r, prism L, sphere r
  Polytope proto;              // Kind::Prototype only
  std::string sigma_source;    // Kind::Prism only, expression in L
  std::string label;

  std::size_t size() const { return scales.size(); }
  Polytope element(std::size_t idx) const;
  double sigma_at(double L) const;

  static SequencePlan boxes(int n, double L0, int count, double factor = 2.0);
  static SequencePlan prototypes(Polytope proto, double r0, int count,
                                 double factor = 2.0);
  static SequencePlan prisms(int n, std::vector<double> Ls,
                             std::string sigma_source);
  static SequencePlan spheres(int n, double r0, int count,
                              double factor = 10.0);
};

//! Per-element report against the admissibility conditions:
//! a) encloses the origin with strictly increasing r_P,
//! b) |F| = O(r^{n-1}),  c) |E| = O(r^{n-2}),  d) min |sin(alpha-bar)| >= c.
struct SequenceConditionReport {
  struct Element {
    double scale = 0.0;
    double r_P = 0.0;
    bool encloses = false;
    double face_measure = 0.0;
    double edge_measure = 0.0;
    double face_ratio = 0.0;  // |F| / r^{n-1}
    double edge_ratio = 0.0;  // |E| / r^{n-2}
    double min_sin_alpha = 0.0;
  };
  std::vector<Element> elements;
  bool a_ok = false, b_ok = false, c_ok = false, d_ok = false;
  double face_slope = 0.0;  // log|F| vs log r_P
  double edge_slope = 0.0;
  std::string notes;
  bool all_ok() const { return a_ok && b_ok && c_ok && d_ok; }
};

SequenceConditionReport check_sequence_conditions(const SequencePlan& seq,
                                                  double c);

//! Scaling with the admissibility precondition: the prototype must enclose
//! the coordinate origin.
Polytope scaled_prototype(const Polytope& proto, double factor);

//! The prism admissibility condition sigma(L)^{n-2-2q} = o(e^{(q-n+1)L}):
//! evaluates the ratio along the plan and reports whether it decreases.
bool prism_condition_holds(const SequencePlan& seq, double q,
                           std::string* detail = nullptr);

}  // namespace polymass
