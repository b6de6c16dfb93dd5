#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "afcest/assembly.hpp"
#include "afcest/linalg.hpp"

using namespace afcest;

TEST(Csr, FromTripletsSumsDuplicatesAndSorts) {
  const CsrMatrix m = CsrMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {0, 1, 0.5}});
  EXPECT_EQ(m.nnz(), 3u);
  EXPECT_EQ(m.at(0, 1), 2.5);
  EXPECT_EQ(m.at(1, 0), 3.0);
  EXPECT_EQ(m.at(1, 2), 1.0);
  EXPECT_EQ(m.at(0, 0), 0.0);
  EXPECT_EQ(m.col(m.row_begin(1)), 0);
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::out_of_range);
}

TEST(Csr, P1PatternIsStructurallySymmetric) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 3);
  const CsrMatrix p = p1_pattern(mesh);
  EXPECT_TRUE(p.structurally_symmetric());
  EXPECT_EQ(p.nnz(), mesh.num_vertices() + 2 * mesh.num_edges());
  for (Index i = 0; i < p.rows(); ++i) {
    EXPECT_LE(p.row_begin(i), p.row_end(i));
    for (Index k = p.row_begin(i) + 1; k < p.row_end(i); ++k) EXPECT_LT(p.col(k - 1), p.col(k));
  }
}

TEST(SparseSolve, Identity) {
  const CsrMatrix eye = CsrMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
  const std::vector<double> b{1.5, -2.0, 7.0};
  EXPECT_EQ(sparse_solve(eye, b), b);
}

TEST(SparseSolve, TwoByTwo) {
  const CsrMatrix m = CsrMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 2.0}});
  const auto x = sparse_solve(m, std::vector<double>{3.0, 3.0});
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);
}

TEST(SparseSolve, NonsymmetricRespectsOrientation) {
  const CsrMatrix m = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 1.0}});
  const auto x = sparse_solve(m, std::vector<double>{5.0, 2.0});
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 2.0, 1e-15);
}

TEST(SparseSolve, SingularMatrixNamesZeroPivotRow) {
  const CsrMatrix m = CsrMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 0.0}, {2, 2, 1.0}});
  try {
    sparse_solve(m, std::vector<double>{1.0, 1.0, 1.0});
    FAIL() << "expected SingularMatrixError";
  } catch (const SingularMatrixError& e) {
    EXPECT_EQ(e.row(), 1);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(SparseSolve, ResidualBound) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 4);
  const ProblemSpec p = constant_problem({.epsilon = 1e-2, .bx = 1.0, .by = 0.5, .c = 1.0, .f = 1.0});
  const DiscreteSystem sys = assemble_system(mesh, p);
  const LinearSystem ls = apply_dirichlet(sys, sys.A, sys.F);
  const auto x = sparse_solve(ls.M, ls.rhs);
  EXPECT_LE(relative_residual(ls.M, x, ls.rhs), 1e-10);
}

// P1 reproduces linear functions: the Laplacian with u_D = x and f = 0 gives
// the nodal values of x.
TEST(SparseSolve, LinearReproduction) {
  ProblemSpec p = constant_problem({.epsilon = 1.0});
  p.u_dirichlet = [](Point q) { return q.x; };
  for (int level : {0, 3}) {
    const Mesh mesh = refine_uniform(unit_square_macro(), level);
    DiscreteSystem sys = assemble_galerkin(mesh, p);
    const LinearSystem ls = apply_dirichlet(sys, sys.A, sys.F);
    const auto x = sparse_solve(ls.M, ls.rhs);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], mesh.vertices()[i].x, 1e-13);
  }
}

TEST(SparseLu, RepeatedSolvesAreBitwiseIdentical) {
  const Mesh mesh = refine_uniform(unit_square_macro(), 4);
  const DiscreteSystem sys = assemble_system(mesh, example_boundary_layer(1e-3));
  const LinearSystem ls = apply_dirichlet(sys, sys.A + sys.D, sys.F);
  const SparseLu lu(ls.M);
  const auto a = lu.solve(ls.rhs);
  const auto b = lu.solve(ls.rhs);
  EXPECT_EQ(a, b);
  EXPECT_EQ(sparse_solve(ls.M, ls.rhs), a);
}

TEST(MatrixMarket, Export) {
  const CsrMatrix m = CsrMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 0, -1.0}});
  std::ostringstream s;
  write_matrix_market(s, m);
  EXPECT_EQ(s.str(), "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 2\n2 1 -1\n");
}

TEST(DofVector, MaskSize) {
  EXPECT_THROW(DofVector({1.0, 2.0}, {true}), std::invalid_argument);
  const DofVector v({1.0, 2.0}, {});
  EXPECT_EQ(v.dirichlet.size(), 2u);
  EXPECT_EQ(norm2(std::vector<double>{3.0, 4.0}), 5.0);
}
