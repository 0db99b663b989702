#include "ercl/replay.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace ercl;
using ercl::test::random_matrix;

namespace {

LabeledExample<double> ex(double x, double y)
{
  return {Vec<double>::Constant(1, x), Vec<double>::Constant(1, y)};
}

} // namespace

TEST_CASE("capacity eviction keeps the newest items in arrival order")
{
  SupervisedBuffer<double> buf(100, {1, 1});
  buf.push(ex(1, 0));
  CHECK(buf.size() == 1);
  for (int i = 2; i <= 101; ++i) {
    buf.push(ex(i, 0));
  }
  auto const items = buf.contents();
  REQUIRE(items.size() == 100);
  for (int i = 0; i < 100; ++i) {
    CHECK(items[static_cast<std::size_t>(i)].x(0) == i + 2);
  }
}

TEST_CASE("contents is a value snapshot")
{
  SupervisedBuffer<double> buf(2, {1, 1});
  CHECK(buf.contents().empty());
  buf.push(ex(1, 0));
  buf.push(ex(2, 0));
  buf.push(ex(3, 0));
  auto const snap = buf.contents();
  CHECK(snap.size() == 2);
  CHECK(snap[0].x(0) == 2);
  CHECK(snap[1].x(0) == 3);
  buf.push(ex(4, 0));
  CHECK(snap[0].x(0) == 2);
  CHECK(snap[1].x(0) == 3);
}

TEST_CASE("shape mismatch and zero capacity are rejected")
{
  SupervisedBuffer<double> buf(3, {2, 1});
  CHECK_THROWS_AS(buf.push(ex(1, 0)), ShapeError);
  CHECK_THROWS(SupervisedBuffer<double>(0, {1, 1}));
}

TEST_CASE("supervised embedding examples")
{
  SupervisedBuffer<double> empty(3, {2, 1});
  Mat<double> const z0 = build_sl_embedding(empty, Vec<double>((Vec<double>(2) << 1, 2).finished()));
  Mat<double> expected0(3, 4);
  expected0 << 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0;
  CHECK(z0 == expected0);

  SupervisedBuffer<double> one(2, {1, 1});
  one.push(ex(1, 2));
  Mat<double> const z1 = build_sl_embedding(one, Vec<double>(Vec<double>::Constant(1, 5.0)));
  Mat<double> expected1(2, 3);
  expected1 << 0, 1, 5, 0, 2, 0;
  CHECK(z1 == expected1);

  SupervisedBuffer<float> mnist(100, {49, 10});
  for (int i = 0; i < 150; ++i) {
    mnist.push({Vec<float>::Zero(49), Vec<float>::Zero(10)});
  }
  Mat<float> const z = build_sl_embedding(mnist, Vec<float>(Vec<float>::Zero(49)));
  CHECK(z.rows() == 59);
  CHECK(z.cols() == 101);
}

TEST_CASE("left padding is correct at every fill level")
{
  Rng rng(21);
  std::size_t const n = 7;
  Index const dx = 3, dy = 2;
  SupervisedBuffer<double> buf(n, {dx, dy});
  std::vector<LabeledExample<double>> pushed;
  for (std::size_t k = 0; k <= n + 3; ++k) {
    Vec<double> const xq = random_matrix(rng, dx, 1);
    Mat<double> const z = build_sl_embedding(buf, xq);
    std::size_t const fill = std::min(k, n);
    REQUIRE(z.cols() == static_cast<Index>(n + 1));
    for (std::size_t j = 0; j < n - fill; ++j) {
      CHECK(z.col(static_cast<Index>(j)).isZero(0));
    }
    for (std::size_t j = 0; j < fill; ++j) {
      auto const &item = pushed[pushed.size() - fill + j];
      auto const col = static_cast<Index>(n - fill + j);
      CHECK(z.col(col).head(dx) == item.x);
      CHECK(z.col(col).tail(dy) == item.y);
    }
    CHECK(z.col(static_cast<Index>(n)).head(dx) == xq);
    CHECK(z.col(static_cast<Index>(n)).tail(dy).isZero(0));
    CHECK(build_sl_embedding(buf, xq) == z);

    LabeledExample<double> e{random_matrix(rng, dx, 1), random_matrix(rng, dy, 1)};
    pushed.push_back(e);
    buf.push(e);
  }
}

TEST_CASE("policy-evaluation embeddings")
{
  Rng rng(22);
  Index const d = 4;
  TransitionBuffer<double> buf(5, {d, d});
  Vec<double> const q = random_matrix(rng, d, 1), qn = random_matrix(rng, d, 1);

  auto const empty = build_pe_embeddings(buf, q, qn, 0.9);
  CHECK(empty.z.rows() == 9);
  CHECK(empty.z.leftCols(5).isZero(0));
  CHECK(empty.z_next.leftCols(5).isZero(0));
  CHECK(empty.z.col(5).head(d) == q);
  CHECK(empty.z_next.col(5).head(d) == qn);
  CHECK(empty.z.col(5).tail(d + 1).isZero(0));

  for (int i = 0; i < 8; ++i) {
    buf.push({random_matrix(rng, d, 1), rng.uniform(-1, 1), random_matrix(rng, d, 1)});
    auto const e = build_pe_embeddings(buf, q, qn, 0.9);
    CHECK(e.z.leftCols(5) == e.z_next.leftCols(5));
    auto const &last = buf.items().back();
    CHECK(e.z.col(4).head(d) == last.phi);
    CHECK((e.z.col(4).segment(d, d) - 0.9 * last.phi_next).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(e.z(2 * d, 4) == last.reward);
  }
  auto const g0 = build_pe_embeddings(buf, q, qn, 0.0);
  CHECK(g0.z.block(d, 0, d, 5).isZero(0));
}
