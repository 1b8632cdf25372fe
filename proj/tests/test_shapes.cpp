#include <gtest/gtest.h>

#include "support.hpp"

using namespace momtopo;
using boost::multiprecision::cpp_int;

TEST(Shapes, FeedFixedLeavesOneFewerBit) {
  const auto ops = build_operators(PlateSpec{2.0, 1.0, 16, 8, 0.5});
  const auto p = make_parameterization(ops.n_dof(), ops.fixed);
  EXPECT_EQ(p->n_dof(), 360);
  EXPECT_EQ(p->n_opt(), 359);
  // the same rule applied to the 345-DOF grid of the reference study
  EXPECT_EQ(make_parameterization(345, {172})->n_opt(), 344);
}

TEST(Shapes, BitsMapOntoFreeDofsInOrder) {
  const auto p = make_parameterization(6, {4, 1, 4});
  EXPECT_EQ(p->fixed(), (DofList{1, 4}));
  EXPECT_EQ(p->free_dofs(), (DofList{0, 2, 3, 5}));
  for (int b = 0; b < p->n_opt(); ++b) EXPECT_EQ(p->bit_of(p->dof_of(b)), b);
  EXPECT_EQ(p->bit_of(1), -1);
  EXPECT_THROW(make_parameterization(3, {3}), InvalidArgument);
}

TEST(Shapes, FixedDofsAreAlwaysActive) {
  const auto p = make_parameterization(5, {2});
  Gene g = Gene::zeros(p);
  EXPECT_EQ(g.active_dofs(), (DofList{2}));
  EXPECT_THROW(g.flip_dof(2), InvalidArgument);
  g.flip_dof(4);
  EXPECT_EQ(g.active_dofs(), (DofList{2, 4}));
  EXPECT_EQ(Gene::ones(p).active_dofs().size(), 5u);
}

TEST(Shapes, HammingMatchesBitLoop) {
  std::mt19937_64 rng(11);
  for (int n : {1, 7, 63, 64, 65, 200}) {
    const auto p = make_parameterization(n + 1, {0});
    for (int t = 0; t < 50; ++t) {
      Gene a(p), b(p);
      for (int i = 0; i < n; ++i) {
        a.set(i, rng() & 1);
        b.set(i, rng() & 1);
      }
      int loop = 0;
      for (int i = 0; i < n; ++i) loop += a.bit(i) != b.bit(i);
      EXPECT_EQ(hamming(a, b), loop);
    }
  }
}

TEST(Shapes, HammingRejectsMixedParameterizations) {
  EXPECT_THROW(hamming(Gene::zeros(make_parameterization(4, {0})), Gene::zeros(make_parameterization(4, {1}))),
               InvalidArgument);
}

TEST(Shapes, FlipIsAnInvolution) {
  const auto p = make_parameterization(70, {});
  Gene g(p);
  g.set(65, true);
  EXPECT_EQ(flip(flip(g, 3), 3), g);
  EXPECT_EQ(hamming(flip(g, 69), g), 1);
  EXPECT_THROW(g.flip(70), InvalidArgument);
}

TEST(Shapes, OnesGeneHasNoStrayHighBits) {
  const auto p = make_parameterization(70, {});
  EXPECT_EQ(Gene::ones(p).count(), 70);
}

TEST(Shapes, SolutionSpaceSizeByRepeatedSquaring) {
  auto pow2 = [](int e) {
    cpp_int result = 1, base = 2;
    while (e) {
      if (e & 1) result *= base;
      base *= base;
      e >>= 1;
    }
    return result;
  };
  EXPECT_EQ(solution_space_size(344), pow2(344));
  EXPECT_EQ(solution_space_size(0), cpp_int(1));
  const std::string s = solution_space_size(1000).str();
  EXPECT_EQ(s.size(), 302u);
  EXPECT_EQ(s.substr(0, 4), "1071");
}

TEST(Shapes, DerivedSetsPartitionThePlate) {
  const auto p = make_parameterization(8, {3});
  Gene g(p);
  g.set(p->bit_of(0), true);
  g.set(p->bit_of(6), true);
  const auto s = derive_sets(g, {6, 7, 3, 7});
  EXPECT_EQ(s.G, (DofList{0, 3, 6}));
  EXPECT_EQ(s.R, (DofList{0, 6}));
  EXPECT_EQ(s.A, (DofList{1, 2, 4, 5, 7}));
  EXPECT_EQ(s.D, (DofList{3, 6, 7}));
  EXPECT_EQ(s.F, (DofList{3}));
  EXPECT_EQ(derive_sets(g).D.size(), 8u);
  EXPECT_THROW(derive_sets(g, {8}), InvalidArgument);
}

TEST(Shapes, TextRoundTrip) {
  std::mt19937_64 rng(5);
  const auto p = make_parameterization(131, {0, 77});
  Gene g(p);
  for (int b = 0; b < g.n_opt(); ++b) g.set(b, rng() & 1);
  const auto back = gene_from_text(to_text(g), p);
  EXPECT_EQ(back, g);
  EXPECT_EQ(gene_from_text(to_text(g)), g);
}

TEST(Shapes, HexDigitsAreLittleEndianNibbles) {
  const auto p = make_parameterization(6, {});
  Gene g(p);
  g.set(0, true);
  g.set(5, true);
  EXPECT_EQ(gene_hex(g), "12");
}

TEST(Shapes, MalformedTextRejected) {
  const auto p = make_parameterization(6, {});
  EXPECT_THROW(gene_from_text("gen n_dof=6 fixed=\n00\n"), FormatError);
  EXPECT_THROW(gene_from_text("gene n_dof=6 fixed=\n0g\n"), FormatError);
  EXPECT_THROW(gene_from_text("gene n_dof=6 fixed=\n000\n"), FormatError);
  EXPECT_THROW(gene_from_text("gene n_dof=6 fixed=\n0f\n"), FormatError);  // bit 7 beyond N_opt
  EXPECT_THROW(gene_from_text("gene n_dof=6 fixed=1\n00\n", p), InvalidArgument);
}
