#include "polymass/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "polymass/error.hpp"

namespace polymass {

namespace {

struct Tri {
  VecN a, b, c;
};

VecN sub(const VecN& a, const VecN& b) {
  VecN r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
  return r;
}

double dot3(const VecN& a, const VecN& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

VecN cross3(const VecN& a, const VecN& b) {
  VecN r{};
  r[0] = a[1] * b[2] - a[2] * b[1];
  r[1] = a[2] * b[0] - a[0] * b[2];
  r[2] = a[0] * b[1] - a[1] * b[0];
  return r;
}

double point_triangle_distance(const VecN& p, const Tri& t) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  const VecN ab = sub(t.b, t.a), ac = sub(t.c, t.a), ap = sub(p, t.a);
  const double d1 = dot3(ab, ap), d2 = dot3(ac, ap);
  auto dist = [&](const VecN& q) {
    VecN d = sub(p, q);
    return std::sqrt(dot3(d, d));
  };
  if (d1 <= 0.0 && d2 <= 0.0) return dist(t.a);
  const VecN bp = sub(p, t.b);
  const double d3 = dot3(ab, bp), d4 = dot3(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return dist(t.b);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    VecN q = t.a;
    for (int i = 0; i < 3; ++i) q[i] += v * ab[i];
    return dist(q);
  }
  const VecN cp = sub(p, t.c);
  const double d5 = dot3(ab, cp), d6 = dot3(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return dist(t.c);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    VecN q = t.a;
    for (int i = 0; i < 3; ++i) q[i] += w * ac[i];
    return dist(q);
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    VecN q = t.b;
    const VecN bc = sub(t.c, t.b);
    for (int i = 0; i < 3; ++i) q[i] += w * bc[i];
    return dist(q);
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  VecN q = t.a;
  for (int i = 0; i < 3; ++i) q[i] += v * ab[i] + w * ac[i];
  return dist(q);
}

bool ray_hits_triangle(const VecN& origin, const VecN& dir, const Tri& t) {
  const double eps = 1e-12;
  const VecN e1 = sub(t.b, t.a), e2 = sub(t.c, t.a);
  const VecN h = cross3(dir, e2);
  const double det = dot3(e1, h);
  if (std::fabs(det) < eps) return false;
  const double inv = 1.0 / det;
  const VecN s = sub(origin, t.a);
  const double u = inv * dot3(s, h);
  if (u < 0.0 || u > 1.0) return false;
  const VecN q = cross3(s, e1);
  const double v = inv * dot3(dir, q);
  if (v < 0.0 || u + v > 1.0) return false;
  const double dist = inv * dot3(e2, q);
  return dist > eps;
}

double patch_gram_area(const std::vector<VecN>& dirs, int n) {
  SymMat g;
  g.n = static_cast<int>(dirs.size());
  for (int a = 0; a < g.n; ++a)
    for (int b = a; b < g.n; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += dirs[a][i] * dirs[b][i];
      g.at(a, b) = s;
    }
  const auto chol = cholesky(g);
  if (!chol) throw GeometryError("degenerate patch directions");
  return std::sqrt(det_from_cholesky(*chol, g.n));
}

}  // namespace

double Polytope::face_measure() const {
  double s = 0.0;
  for (const Face& f : faces_) s += f.euclidean_area;
  return s;
}

double Polytope::edge_measure() const {
  double s = 0.0;
  for (const Edge& e : edges_) s += e.euclidean_measure;
  return s;
}

double Polytope::min_abs_sin_alpha() const {
  double m = 1.0;
  for (const Edge& e : edges_)
    m = std::min(m, std::fabs(std::sin(e.patch.bar_alpha)));
  return m;
}

double Polytope::euclidean_closed_flux(int axis) const {
  double s = 0.0;
  for (const Face& f : faces_) s += f.outward[axis] * f.euclidean_area;
  return s;
}

double Polytope::inradius() const {
  // Distance from the origin to each patch; exact because patch directions
  // are orthogonal (box patches) or the domain is a triangle.
  double best = std::numeric_limits<double>::infinity();
  const VecN origin{};
  for (const Face& f : faces_) {
    for (const HypersurfacePatch& patch : f.patches) {
      if (patch.domain.kind == DomainKind::Simplex) {
        Tri t;
        t.a = patch.base;
        t.b = patch.base;
        t.c = patch.base;
        for (int i = 0; i < 3; ++i) {
          t.b[i] += patch.dirs[0][i];
          t.c[i] += patch.dirs[1][i];
        }
        best = std::min(best, point_triangle_distance(origin, t));
      } else {
        VecN closest = patch.base;
        for (const VecN& d : patch.dirs) {
          double len2 = 0.0, proj = 0.0;
          for (int i = 0; i < n_; ++i) {
            len2 += d[i] * d[i];
            proj += (0.0 - patch.base[i]) * d[i];
          }
          const double t = std::clamp(proj / len2, 0.0, 1.0);
          for (int i = 0; i < n_; ++i) closest[i] += t * d[i];
        }
        double dist2 = 0.0;
        for (int i = 0; i < n_; ++i) dist2 += closest[i] * closest[i];
        best = std::min(best, std::sqrt(dist2));
      }
    }
  }
  return best;
}

bool Polytope::encloses_origin() const {
  // Parity of ray crossings from the origin; boxes reduce to a bounds check
  // through their rectangular patches split in two.
  if (n_ != 3) {
    // Boxes only in n != 3. Origin is inside when every pair of opposite
    // faces brackets it: use the outward normals and patch base points.
    for (const Face& f : faces_) {
      double offset = 0.0;
      for (int i = 0; i < n_; ++i) offset += f.outward[i] * f.patches[0].base[i];
      if (offset <= 0.0) return false;
    }
    return true;
  }
  VecN dir{};
  dir[0] = 0.5377397817231288;
  dir[1] = 0.7310038712345678;
  dir[2] = 0.4201133256262345;
  int hits = 0;
  for (const Face& f : faces_)
    for (const HypersurfacePatch& patch : f.patches) {
      std::vector<Tri> tris;
      Tri t;
      t.a = patch.base;
      t.b = patch.base;
      t.c = patch.base;
      for (int i = 0; i < 3; ++i) {
        t.b[i] += patch.dirs[0][i];
        t.c[i] += patch.dirs[1][i];
      }
      tris.push_back(t);
      if (patch.domain.kind == DomainKind::Box) {
        Tri t2;
        t2.a = t.b;
        t2.b = t.c;
        t2.c = patch.base;
        for (int i = 0; i < 3; ++i) t2.c[i] += patch.dirs[0][i] + patch.dirs[1][i];
        std::swap(t2.b, t2.c);
        tris.push_back(t2);
      }
      for (const Tri& tri : tris)
        if (ray_hits_triangle(VecN{}, dir, tri)) ++hits;
    }
  return hits % 2 == 1;
}

Polytope Polytope::scaled(double factor) const {
  if (factor <= 0.0) throw Error("scale factor must be positive");
  Polytope p = *this;
  const int k_face = n_ - 1, k_edge = n_ - 2;
  for (Face& f : p.faces_) {
    for (HypersurfacePatch& patch : f.patches) {
      for (int i = 0; i < n_; ++i) patch.base[i] *= factor;
      for (VecN& d : patch.dirs)
        for (int i = 0; i < n_; ++i) d[i] *= factor;
    }
    f.euclidean_area *= std::pow(factor, k_face);
  }
  for (Edge& e : p.edges_) {
    for (int i = 0; i < n_; ++i) e.patch.base[i] *= factor;
    for (VecN& d : e.patch.dirs)
      for (int i = 0; i < n_; ++i) d[i] *= factor;
    e.euclidean_measure *= std::pow(factor, k_edge);
  }
  return p;
}

Polytope Polytope::box(int n, double L) {
  if (L <= 0.0) throw Error("box half-width must be positive");
  std::vector<double> lo(static_cast<std::size_t>(n), -L);
  std::vector<double> hi(static_cast<std::size_t>(n), L);
  return box_bounds(n, lo, hi);
}

Polytope Polytope::box_bounds(int n, std::span<const double> lo,
                              std::span<const double> hi,
                              const std::vector<std::string>& face_tags) {
  if (n < 3 || n > kMaxDim)
    throw Error("box dimension must be between 3 and " +
                std::to_string(kMaxDim));
  for (int i = 0; i < n; ++i)
    if (!(hi[i] > lo[i])) throw Error("box bounds must have positive extent");

  Polytope p;
  p.n_ = n;
  auto face_id = [&](int axis, int side) { return 2 * axis + (side > 0 ? 0 : 1); };

  for (int axis = 0; axis < n; ++axis)
    for (int side : {+1, -1}) {
      Face f;
      const std::size_t id = p.faces_.size();
      if (id < face_tags.size() && !face_tags[id].empty()) {
        f.tag = face_tags[id];
      } else {
        f.tag = "x" + std::to_string(axis + 1) + (side > 0 ? "+" : "-");
      }
      f.outward[axis] = static_cast<double>(side);
      HypersurfacePatch patch;
      patch.n = n;
      patch.tag = f.tag;
      patch.base[axis] = side > 0 ? hi[axis] : lo[axis];
      double area = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j == axis) continue;
        patch.base[j] = lo[j];
        VecN d{};
        d[j] = hi[j] - lo[j];
        patch.dirs.push_back(d);
        area *= hi[j] - lo[j];
      }
      std::vector<double> zeros(static_cast<std::size_t>(n - 1), 0.0);
      std::vector<double> ones(static_cast<std::size_t>(n - 1), 1.0);
      patch.domain = PatchDomain::box(zeros, ones);
      patch.outward = f.outward;
      f.euclidean_area = area;
      f.patches.push_back(std::move(patch));
      p.faces_.push_back(std::move(f));
    }

  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int sa : {+1, -1})
        for (int sb : {+1, -1}) {
          Edge e;
          EdgePatch& ep = e.patch;
          ep.n = n;
          ep.base[a] = sa > 0 ? hi[a] : lo[a];
          ep.base[b] = sb > 0 ? hi[b] : lo[b];
          double measure = 1.0;
          for (int j = 0; j < n; ++j) {
            if (j == a || j == b) continue;
            ep.base[j] = lo[j];
            VecN d{};
            d[j] = hi[j] - lo[j];
            ep.dirs.push_back(d);
            measure *= hi[j] - lo[j];
          }
          std::vector<double> zeros(static_cast<std::size_t>(n - 2), 0.0);
          std::vector<double> ones(static_cast<std::size_t>(n - 2), 1.0);
          ep.domain = PatchDomain::box(zeros, ones);
          ep.face_a = face_id(a, sa);
          ep.face_b = face_id(b, sb);
          ep.outward_a = p.faces_[static_cast<std::size_t>(ep.face_a)].outward;
          ep.outward_b = p.faces_[static_cast<std::size_t>(ep.face_b)].outward;
          ep.bar_alpha = std::numbers::pi / 2.0;
          ep.tag = "x" + std::to_string(a + 1) + (sa > 0 ? "+" : "-") + "x" +
                   std::to_string(b + 1) + (sb > 0 ? "+" : "-");
          e.euclidean_measure = measure;
          const int eid = static_cast<int>(p.edges_.size());
          p.faces_[static_cast<std::size_t>(ep.face_a)].edge_ids.push_back(eid);
          p.faces_[static_cast<std::size_t>(ep.face_b)].edge_ids.push_back(eid);
          p.edges_.push_back(std::move(e));
        }
  return p;
}

Polytope build_from_vertex_faces(
    const std::vector<VecN>& vertices,
    const std::vector<std::vector<int>>& face_vertices, int n) {
  if (n != 3) throw Error("vertex/face polytopes are supported in n = 3 only");
  Polytope p;
  p.n_ = n;

  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (std::size_t fi = 0; fi < face_vertices.size(); ++fi) {
    const std::vector<int>& cyc = face_vertices[fi];
    if (cyc.size() < 3) throw Error("face needs at least 3 vertices");
    Face f;
    f.tag = "face" + std::to_string(fi + 1);
    // Newell normal; orientation comes from the vertex order.
    VecN normal{};
    for (std::size_t k = 0; k < cyc.size(); ++k) {
      const VecN& u = vertices[static_cast<std::size_t>(cyc[k])];
      const VecN& v = vertices[static_cast<std::size_t>(cyc[(k + 1) % cyc.size()])];
      normal[0] += (u[1] - v[1]) * (u[2] + v[2]);
      normal[1] += (u[2] - v[2]) * (u[0] + v[0]);
      normal[2] += (u[0] - v[0]) * (u[1] + v[1]);
    }
    const double len = std::sqrt(dot3(normal, normal));
    if (len == 0.0) throw Error("degenerate face normal");
    for (int i = 0; i < 3; ++i) normal[i] /= len;
    f.outward = normal;

    for (std::size_t k = 1; k + 1 < cyc.size(); ++k) {
      HypersurfacePatch patch;
      patch.n = 3;
      patch.tag = f.tag;
      patch.base = vertices[static_cast<std::size_t>(cyc[0])];
      patch.dirs.push_back(
          sub(vertices[static_cast<std::size_t>(cyc[k])], patch.base));
      patch.dirs.push_back(
          sub(vertices[static_cast<std::size_t>(cyc[k + 1])], patch.base));
      patch.domain = PatchDomain::unit_simplex(2);
      patch.outward = normal;
      f.euclidean_area += 0.5 * patch_gram_area(patch.dirs, 3);
      f.patches.push_back(std::move(patch));
    }
    p.faces_.push_back(std::move(f));

    for (std::size_t k = 0; k < cyc.size(); ++k) {
      int a = cyc[k], b = cyc[(k + 1) % cyc.size()];
      if (a > b) std::swap(a, b);
      edge_faces[{a, b}].push_back(static_cast<int>(fi));
    }
  }

  for (const auto& [vpair, fids] : edge_faces) {
    if (fids.size() != 2)
      throw Error("edge between vertices " + std::to_string(vpair.first + 1) +
                  " and " + std::to_string(vpair.second + 1) + " borders " +
                  std::to_string(fids.size()) + " faces; expected 2");
    Edge e;
    EdgePatch& ep = e.patch;
    ep.n = 3;
    ep.base = vertices[static_cast<std::size_t>(vpair.first)];
    ep.dirs.push_back(
        sub(vertices[static_cast<std::size_t>(vpair.second)], ep.base));
    const double zeros1[1] = {0.0}, ones1[1] = {1.0};
    ep.domain = PatchDomain::box(std::span<const double>(zeros1, 1),
                                 std::span<const double>(ones1, 1));
    ep.face_a = fids[0];
    ep.face_b = fids[1];
    ep.outward_a = p.faces_[static_cast<std::size_t>(fids[0])].outward;
    ep.outward_b = p.faces_[static_cast<std::size_t>(fids[1])].outward;
    const double c =
        std::clamp(-dot3(ep.outward_a, ep.outward_b), -1.0, 1.0);
    ep.bar_alpha = std::acos(c);
    ep.tag = "v" + std::to_string(vpair.first + 1) + "v" +
             std::to_string(vpair.second + 1);
    e.euclidean_measure = std::sqrt(dot3(ep.dirs[0], ep.dirs[0]));
    const int eid = static_cast<int>(p.edges_.size());
    p.faces_[static_cast<std::size_t>(fids[0])].edge_ids.push_back(eid);
    p.faces_[static_cast<std::size_t>(fids[1])].edge_ids.push_back(eid);
    p.edges_.push_back(std::move(e));
  }
  return p;
}

Polytope Polytope::prototype(const std::string& name) {
  if (name == "cube") return box(3, 1.0);
  if (name == "rectangular-box") {
    const double lo[3] = {-1.0, -0.75, -0.5};
    const double hi[3] = {1.0, 0.75, 0.5};
    return box_bounds(3, std::span<const double>(lo, 3),
                      std::span<const double>(hi, 3));
  }
  if (name == "triangular-prism") {
    // Equilateral triangle of circumradius 1 in the xy-plane, extruded in z.
    // The three vertical edges have a 60-degree Euclidean dihedral angle.
    std::vector<VecN> v(6);
    const double h = 0.75;
    for (int k = 0; k < 3; ++k) {
      const double th = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / 3.0;
      v[static_cast<std::size_t>(k)][0] = std::cos(th);
      v[static_cast<std::size_t>(k)][1] = std::sin(th);
      v[static_cast<std::size_t>(k)][2] = -h;
      v[static_cast<std::size_t>(k + 3)] = v[static_cast<std::size_t>(k)];
      v[static_cast<std::size_t>(k + 3)][2] = h;
    }
    std::vector<std::vector<int>> faces = {
        {0, 2, 1},        // bottom, outward -z
        {3, 4, 5},        // top, outward +z
        {0, 1, 4, 3},     // sides, outward by right-hand rule
        {1, 2, 5, 4},
        {2, 0, 3, 5},
    };
    return build_from_vertex_faces(v, faces, 3);
  }
  if (name == "tetrahedron") {
    std::vector<VecN> v(4);
    const double q[4][3] = {
        {1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(k)][i] = q[k][i];
    std::vector<std::vector<int>> faces = {
        {0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return build_from_vertex_faces(v, faces, 3);
  }
  throw Error("unknown prototype '" + name +
              "' (cube, rectangular-box, triangular-prism, tetrahedron)");
}

Polytope Polytope::from_text(const std::string& text,
                             const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool in_vertices = false;
  std::vector<VecN> vertices;
  std::vector<std::vector<int>> faces;
  auto fail = [&](const std::string& msg) {
    throw ParseError(origin + ":" + std::to_string(lineno) + ": " + msg, 0,
                     lineno, 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = line;
    const auto hash = t.find('#');
    if (hash != std::string::npos) t = t.substr(0, hash);
    std::istringstream ls(t);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "vertices") {
      in_vertices = true;
      continue;
    }
    if (first == "face") {
      in_vertices = false;
      std::vector<int> cyc;
      int idx;
      while (ls >> idx) {
        if (idx < 1 || idx > static_cast<int>(vertices.size()))
          fail("vertex index out of range");
        cyc.push_back(idx - 1);
      }
      if (cyc.size() < 3) fail("face needs at least 3 vertices");
      faces.push_back(std::move(cyc));
      continue;
    }
    if (!in_vertices) fail("unexpected line (expected 'vertices' or 'face')");
    VecN v{};
    try {
      v[0] = std::stod(first);
    } catch (const std::exception&) {
      fail("malformed vertex coordinate '" + first + "'");
    }
    if (!(ls >> v[1] >> v[2])) fail("vertex needs 3 coordinates");
    vertices.push_back(v);
  }
  if (vertices.empty() || faces.empty())
    throw ParseError(origin + ": no vertices/faces found", 0, 0, 0);
  return build_from_vertex_faces(vertices, faces, 3);
}

Polytope Polytope::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prototype file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

Polytope Polytope::ah_prism(int n, double L, double sigma) {
  if (L <= 0.0 || sigma <= 0.0) throw Error("prism needs L > 0 and sigma > 0");
  std::vector<double> lo(static_cast<std::size_t>(n), -sigma);
  std::vector<double> hi(static_cast<std::size_t>(n), sigma);
  lo[0] = std::exp(-L);
  hi[0] = std::exp(L);
  std::vector<std::string> tags(static_cast<std::size_t>(2 * n));
  tags[0] = "top-horosphere";     // outward +y1
  tags[1] = "bottom-horosphere";  // outward -y1
  for (int a = 1; a < n; ++a) {
    tags[static_cast<std::size_t>(2 * a)] =
        "vertical-y" + std::to_string(a + 1) + "+";
    tags[static_cast<std::size_t>(2 * a + 1)] =
        "vertical-y" + std::to_string(a + 1) + "-";
  }
  return box_bounds(n, lo, hi, tags);
}

Polytope SequencePlan::element(std::size_t idx) const {
  const double s = scales.at(idx);
  switch (kind) {
    case Kind::Box:
      return Polytope::box(n, s);
    case Kind::Prototype:
      return proto.scaled(s);
    case Kind::Prism:
      return Polytope::ah_prism(n, s, sigma_at(s));
    case Kind::Sphere:
      throw Error("sphere sequences carry no polytopes");
  }
  throw Error("bad sequence kind");
}

double SequencePlan::sigma_at(double L) const {
  const Expr sigma = Expr::parse(sigma_source.empty() ? "1" : sigma_source, 1);
  const double x[1] = {0.0};
  return sigma.eval(std::span<const double>(x, 1), {{"L", L}});
}

SequencePlan SequencePlan::boxes(int n, double L0, int count, double factor) {
  SequencePlan s;
  s.kind = Kind::Box;
  s.n = n;
  s.label = "box";
  double L = L0;
  for (int i = 0; i < count; ++i, L *= factor) s.scales.push_back(L);
  return s;
}

SequencePlan SequencePlan::prototypes(Polytope proto, double r0, int count,
                                      double factor) {
  SequencePlan s;
  s.kind = Kind::Prototype;
  s.n = proto.dimension();
  s.proto = std::move(proto);
  s.label = "prototype";
  double r = r0;
  for (int i = 0; i < count; ++i, r *= factor) s.scales.push_back(r);
  return s;
}

SequencePlan SequencePlan::prisms(int n, std::vector<double> Ls,
                                  std::string sigma_source) {
  SequencePlan s;
  s.kind = Kind::Prism;
  s.n = n;
  s.scales = std::move(Ls);
  s.sigma_source = std::move(sigma_source);
  s.label = "prism";
  return s;
}

SequencePlan SequencePlan::spheres(int n, double r0, int count, double factor) {
  SequencePlan s;
  s.kind = Kind::Sphere;
  s.n = n;
  s.label = "sphere";
  double r = r0;
  for (int i = 0; i < count; ++i, r *= factor) s.scales.push_back(r);
  return s;
}

SequenceConditionReport check_sequence_conditions(const SequencePlan& seq,
                                                  double c) {
  if (c <= 0.0) throw Error("condition constant c must be positive");
  SequenceConditionReport rep;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Polytope p = seq.element(i);
    SequenceConditionReport::Element el;
    el.scale = seq.scales[i];
    el.r_P = p.inradius();
    el.encloses = p.encloses_origin();
    el.face_measure = p.face_measure();
    el.edge_measure = p.edge_measure();
    el.face_ratio = el.face_measure / std::pow(el.r_P, seq.n - 1);
    el.edge_ratio = el.edge_measure / std::pow(el.r_P, seq.n - 2);
    el.min_sin_alpha = p.min_abs_sin_alpha();
    rep.elements.push_back(el);
  }

  rep.a_ok = true;
  for (std::size_t i = 0; i < rep.elements.size(); ++i) {
    if (!rep.elements[i].encloses) rep.a_ok = false;
    if (i > 0 && !(rep.elements[i].r_P > rep.elements[i - 1].r_P))
      rep.a_ok = false;
  }

  // Log-log slope of the boundary measures against r_P; O(r^k) growth means
  // the fitted slope stays at or below k.
  auto slope = [&](auto value_of) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& el : rep.elements) {
      if (el.r_P <= 0.0 || value_of(el) <= 0.0) continue;
      const double lx = std::log(el.r_P), ly = std::log(value_of(el));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++m;
    }
    const double denom = m * sxx - sx * sx;
    if (m < 2 || std::fabs(denom) < 1e-12) return 0.0;
    return (m * sxy - sx * sy) / denom;
  };
  rep.face_slope = slope([](const auto& el) { return el.face_measure; });
  rep.edge_slope = slope([](const auto& el) { return el.edge_measure; });
  rep.b_ok = rep.face_slope <= seq.n - 1 + 0.1;
  rep.c_ok = rep.edge_slope <= seq.n - 2 + 0.1;

  rep.d_ok = true;
  for (const auto& el : rep.elements)
    if (el.min_sin_alpha < c) rep.d_ok = false;

  std::ostringstream notes;
  if (!rep.a_ok) notes << "a) fails: origin enclosure or growth of r_P; ";
  if (!rep.b_ok) notes << "b) fails: |F| grows faster than r^(n-1); ";
  if (!rep.c_ok) notes << "c) fails: |E| grows faster than r^(n-2); ";
  if (!rep.d_ok) notes << "d) fails: min |sin(alpha)| below c; ";
  rep.notes = notes.str();
  return rep;
}

Polytope scaled_prototype(const Polytope& proto, double factor) {
  if (!proto.encloses_origin())
    throw Error("prototype does not enclose the coordinate origin");
  return proto.scaled(factor);
}

bool prism_condition_holds(const SequencePlan& seq, double q,
                           std::string* detail) {
  // sigma(L)^{n-2-2q} = o(e^{(q-n+1)L}): the ratio must decrease along the
  // plan (checked on the plan's L values extended by one step).
  std::vector<double> Ls = seq.scales;
  if (Ls.empty()) return false;
  Ls.push_back(Ls.back() + 2.0);
  const double expo = seq.n - 2 - 2.0 * q;
  std::vector<double> ratio;
  for (double L : Ls) {
    const double sigma = seq.sigma_at(L);
    ratio.push_back(std::pow(sigma, expo) / std::exp((q - seq.n + 1) * L));
  }
  bool ok = true;
  for (std::size_t i = 1; i < ratio.size(); ++i)
    if (!(ratio[i] < ratio[i - 1])) ok = false;
  if (detail) {
    std::ostringstream os;
    os << "sigma(L)^(n-2-2q)/e^((q-n+1)L) along L:";
    for (std::size_t i = 0; i < Ls.size(); ++i)
      os << " " << Ls[i] << "->" << ratio[i];
    *detail = os.str();
  }
  return ok;
}

}  // namespace polymass
