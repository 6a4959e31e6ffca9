#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "polymass/error.hpp"
#include "polymass/polytope.hpp"

using namespace polymass;

TEST_CASE("box combinatorics") {
  const Polytope c3 = Polytope::box(3, 1.0);
  CHECK(c3.faces().size() == 6);
  CHECK(c3.edges().size() == 12);
  const Polytope c4 = Polytope::box(4, 2.0);
  CHECK(c4.faces().size() == 8);
  CHECK(c4.edges().size() == 24);
  for (const Edge& e : c4.edges())
    CHECK(e.patch.bar_alpha == doctest::Approx(std::numbers::pi / 2));

  CHECK(c3.face_measure() == doctest::Approx(6 * 4.0));
  CHECK(c3.edge_measure() == doctest::Approx(12 * 2.0));
  CHECK(c3.inradius() == doctest::Approx(1.0));
  CHECK(c3.encloses_origin());
  CHECK(c4.inradius() == doctest::Approx(2.0));
  CHECK(c4.encloses_origin());
}

TEST_CASE("closed boundary flux vanishes") {
  for (const auto& p : {Polytope::box(3, 2.0), Polytope::prototype("tetrahedron"),
                        Polytope::prototype("triangular-prism")}) {
    for (int axis = 0; axis < 3; ++axis)
      CHECK(std::fabs(p.euclidean_closed_flux(axis)) <= 1e-12);
  }
  const Polytope c4 = Polytope::box(4, 1.5);
  for (int axis = 0; axis < 4; ++axis)
    CHECK(std::fabs(c4.euclidean_closed_flux(axis)) <= 1e-12);
}

TEST_CASE("edge adjacency symmetry") {
  for (const auto& p :
       {Polytope::box(3, 1.0), Polytope::prototype("triangular-prism"),
        Polytope::prototype("tetrahedron"), Polytope::box(4, 1.0)}) {
    for (std::size_t ei = 0; ei < p.edges().size(); ++ei) {
      const Edge& e = p.edges()[ei];
      for (int fid : {e.patch.face_a, e.patch.face_b}) {
        const auto& ids = p.faces()[static_cast<std::size_t>(fid)].edge_ids;
        CHECK(std::count(ids.begin(), ids.end(), static_cast<int>(ei)) == 1);
      }
    }
    std::size_t listed = 0;
    for (const Face& f : p.faces()) listed += f.edge_ids.size();
    CHECK(listed == 2 * p.edges().size());
  }
}

TEST_CASE("prototype library") {
  const Polytope prism = Polytope::prototype("triangular-prism");
  CHECK(prism.faces().size() == 5);
  CHECK(prism.edges().size() == 9);
  CHECK(prism.encloses_origin());
  // Three vertical edges carry the 60-degree wedge: min |sin| = sqrt(3)/2.
  CHECK(prism.min_abs_sin_alpha() ==
        doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-12));
  int sixty = 0;
  for (const Edge& e : prism.edges())
    if (std::fabs(e.patch.bar_alpha - std::numbers::pi / 3) < 1e-12) ++sixty;
  CHECK(sixty == 3);

  const Polytope tet = Polytope::prototype("tetrahedron");
  CHECK(tet.faces().size() == 4);
  CHECK(tet.edges().size() == 6);
  CHECK(tet.encloses_origin());
  for (const Edge& e : tet.edges())
    CHECK(e.patch.bar_alpha ==
          doctest::Approx(std::acos(1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("scaling preserves angles and scales measures homogeneously") {
  const Polytope prism = Polytope::prototype("triangular-prism");
  const double r = 8.0;
  const Polytope big = prism.scaled(r);
  for (std::size_t i = 0; i < prism.edges().size(); ++i)
    CHECK(big.edges()[i].patch.bar_alpha ==
          prism.edges()[i].patch.bar_alpha);
  CHECK(big.face_measure() ==
        doctest::Approx(prism.face_measure() * r * r).epsilon(1e-12));
  CHECK(big.edge_measure() ==
        doctest::Approx(prism.edge_measure() * r).epsilon(1e-12));
  CHECK(big.inradius() == doctest::Approx(prism.inradius() * r));

  // Unit cube scaled by 8 equals box(3, 8) in all summary measures.
  const Polytope a = Polytope::box(3, 1.0).scaled(8.0);
  const Polytope b = Polytope::box(3, 8.0);
  CHECK(a.face_measure() == doctest::Approx(b.face_measure()));
  CHECK(a.edge_measure() == doctest::Approx(b.edge_measure()));
  CHECK(a.inradius() == doctest::Approx(b.inradius()));
}

TEST_CASE("prototype file format") {
  const std::string text =
      "# a tetrahedron\n"
      "vertices\n"
      "1 1 1\n"
      "1 -1 -1\n"
      "-1 1 -1\n"
      "-1 -1 1\n"
      "face 1 2 3\n"
      "face 1 4 2\n"
      "face 1 3 4\n"
      "face 2 4 3\n";
  const Polytope tet = Polytope::from_text(text, "tet.poly");
  CHECK(tet.faces().size() == 4);
  CHECK(tet.edges().size() == 6);
  CHECK(tet.encloses_origin());
  for (int axis = 0; axis < 3; ++axis)
    CHECK(std::fabs(tet.euclidean_closed_flux(axis)) <= 1e-12);

  // An open surface has edges adjacent to a single face.
  const std::string open_text =
      "vertices\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\nface 1 2 3\nface 1 4 2\n";
  CHECK_THROWS_AS(Polytope::from_text(open_text, "open.poly"), Error);

  // A shifted tetrahedron no longer encloses the origin: scaled_prototype
  // refuses it.
  const std::string shifted =
      "vertices\n9 9 9\n9 7 7\n7 9 7\n7 7 9\n"
      "face 1 2 3\nface 1 4 2\nface 1 3 4\nface 2 4 3\n";
  const Polytope off = Polytope::from_text(shifted, "shifted.poly");
  CHECK_FALSE(off.encloses_origin());
  CHECK_THROWS_AS(scaled_prototype(off, 2.0), Error);
}

TEST_CASE("sequence plans and admissibility conditions") {
  // Doubling boxes satisfy everything with c = 1.
  {
    const SequencePlan seq = SequencePlan::boxes(3, 2.0, 4);
    const SequenceConditionReport rep = check_sequence_conditions(seq, 1.0);
    CHECK(rep.a_ok);
    CHECK(rep.b_ok);
    CHECK(rep.c_ok);
    CHECK(rep.d_ok);
    CHECK(rep.all_ok());
    CHECK(rep.face_slope == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.edge_slope == doctest::Approx(1.0).epsilon(1e-6));
  }
  // A 1-degree wedge passes c = 0.01 and fails c = 0.02.
  {
    const double deg = std::numbers::pi / 180.0;
    std::vector<VecN> v(6);
    const double wedge = 1.0 * deg;
    // Sliver prism with a one-degree wedge, positioned so the origin stays
    // strictly inside.
    v[0] = VecN{-2.0, -0.02, -1.0};
    v[1] = VecN{2.0, -0.02, -1.0};
    v[2] = VecN{2.0 - 4.0 * std::cos(wedge), -0.02 + 4.0 * std::sin(wedge),
                -1.0};
    for (int k = 0; k < 3; ++k) {
      v[static_cast<std::size_t>(k + 3)] = v[static_cast<std::size_t>(k)];
      v[static_cast<std::size_t>(k + 3)][2] = 1.0;
    }
    const std::vector<std::vector<int>> faces = {
        {0, 2, 1}, {3, 4, 5}, {0, 1, 4, 3}, {1, 2, 5, 4}, {2, 0, 3, 5}};
    // Build through the text interface to exercise it.
    std::string text = "vertices\n";
    for (const auto& vv : v) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", vv[0], vv[1],
                    vv[2]);
      text += buf;
    }
    for (const auto& f : faces) {
      text += "face";
      for (int idx : f) text += " " + std::to_string(idx + 1);
      text += "\n";
    }
    const Polytope wedge_prism = Polytope::from_text(text, "wedge.poly");
    CHECK(wedge_prism.encloses_origin());
    CHECK_NOTHROW(scaled_prototype(wedge_prism, 2.0));
    CHECK(wedge_prism.min_abs_sin_alpha() ==
          doctest::Approx(std::sin(wedge)).epsilon(1e-9));
    const SequencePlan seq =
        SequencePlan::prototypes(wedge_prism, 1.0, 3, 2.0);
    CHECK(check_sequence_conditions(seq, 0.01).d_ok);
    CHECK_FALSE(check_sequence_conditions(seq, 0.02).d_ok);
  }
  // Fixed-size sequence fails a).
  {
    SequencePlan seq = SequencePlan::boxes(3, 4.0, 3, 1.0);
    const SequenceConditionReport rep = check_sequence_conditions(seq, 0.5);
    CHECK_FALSE(rep.a_ok);
  }
}

TEST_CASE("ah prisms") {
  const Polytope p = Polytope::ah_prism(3, 1.0, 1.0);
  CHECK(p.faces().size() == 6);
  CHECK(p.edges().size() == 12);
  bool found_bottom = false;
  for (const Face& f : p.faces()) {
    if (f.tag == "bottom-horosphere") {
      found_bottom = true;
      CHECK(f.patches[0].base[0] == doctest::Approx(std::exp(-1.0)));
      CHECK(f.outward[0] == -1.0);
    }
  }
  CHECK(found_bottom);
  for (const Edge& e : p.edges())
    CHECK(e.patch.bar_alpha == doctest::Approx(std::numbers::pi / 2));

  // sigma = e^{L/2} with q = n = 3 satisfies the decay condition; so does a
  // constant sigma at q = n.
  {
    const SequencePlan seq = SequencePlan::prisms(3, {2.0, 3.0, 4.0}, "exp(L/2)");
    std::string detail;
    CHECK(prism_condition_holds(seq, 3.0, &detail));
  }
  {
    const SequencePlan seq = SequencePlan::prisms(3, {2.0, 3.0, 4.0}, "1");
    CHECK(prism_condition_holds(seq, 3.0));
  }
  // Slowly growing sigma with a slow decay rate violates it: the ratio
  // (1+L)^{n-2-2q} / e^{(q-n+1)L} eventually grows.
  {
    const SequencePlan seq =
        SequencePlan::prisms(3, {2.0, 3.0, 4.0}, "1 + L");
    CHECK_FALSE(prism_condition_holds(seq, 1.6));
  }
}
