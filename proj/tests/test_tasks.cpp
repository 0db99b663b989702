#include "ercl/boyan.hpp"
#include "ercl/mnist.hpp"
#include "ercl/scr.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <zlib.h>

using namespace ercl;

// ---------------------------------------------------------------- SCR

TEST_CASE("ltu threshold arithmetic")
{
  Eigen::MatrixXi w = Eigen::MatrixXi::Ones(1, 20);
  Eigen::VectorXi out = Eigen::VectorXi::Ones(1);
  LtuNet const net = make_ltu_net(w, out, 0.7);
  CHECK(net.thresholds(0) == doctest::Approx(14.7));
  CHECK(ltu_forward(net, Eigen::VectorXd::Ones(20)) == 1.0);
  CHECK(ltu_forward(net, Eigen::VectorXd::Zero(20)) == 0.0);

  // A unit with some -1 weights gets a lower threshold.
  Eigen::MatrixXi mixed = Eigen::MatrixXi::Ones(1, 20);
  mixed.leftCols(5).setConstant(-1);
  CHECK(make_ltu_net(mixed, out, 0.7).thresholds(0) == doctest::Approx(9.7));
}

TEST_CASE("scr stream properties")
{
  ScrState a = scr_init(42, 20, 15);
  ScrState b = scr_init(42, 20, 15);
  CHECK(a.target.hidden_weights == b.target.hidden_weights);
  CHECK(a.fixed_bits == b.fixed_bits);
  CHECK((a.target.hidden_weights.array().abs() == 1).all());
  CHECK((a.target.output_weights.array().abs() == 1).all());

  ScrExample const e1 = scr_next_example(a);
  ScrExample const e2 = scr_next_example(a);
  CHECK(e1.x.head(15) == a.fixed_bits);
  CHECK(e2.x.head(15) == e1.x.head(15));
  CHECK(((e1.x.array() == 0) || (e1.x.array() == 1)).all());

  // Independent re-evaluation of the target network.
  for (int i = 0; i < 50; ++i) {
    ScrExample const e = scr_next_example(a);
    double y = 0;
    for (int h = 0; h < 100; ++h) {
      double pre = 0;
      int negatives = 0;
      for (int j = 0; j < 20; ++j) {
        pre += a.target.hidden_weights(h, j) * e.x(j);
        negatives += a.target.hidden_weights(h, j) < 0 ? 1 : 0;
      }
      if (pre > 21 * 0.7 - negatives) {
        y += a.target.output_weights(h);
      }
    }
    CHECK(e.y == y);
    CHECK(e.y == std::round(e.y));
  }
  CHECK_THROWS(scr_init(1, 20, 20));
  CHECK_THROWS(scr_init(1, 20, 0));
}

TEST_CASE("task switches flip exactly one fixed bit, uniformly")
{
  ScrState s = scr_init(3, 20, 15);
  std::vector<int> hits(15, 0);
  int const flips = 1000;
  for (int i = 0; i < flips; ++i) {
    Eigen::VectorXd const before = s.fixed_bits;
    scr_advance_task(s);
    Eigen::VectorXd const diff = (s.fixed_bits - before).cwiseAbs();
    CHECK(diff.sum() == 1.0);
    Eigen::Index where = 0;
    diff.maxCoeff(&where);
    ++hits[static_cast<std::size_t>(where)];
  }
  double chi2 = 0;
  double const expected = flips / 15.0;
  for (int h : hits) {
    chi2 += (h - expected) * (h - expected) / expected;
  }
  // 14 degrees of freedom; 36.1 is the 0.999 quantile.
  CHECK(chi2 < 36.1);

  ScrState one = scr_init(4, 5, 1);
  double const start = one.fixed_bits(0);
  for (int i = 1; i <= 6; ++i) {
    scr_advance_task(one);
    CHECK(one.fixed_bits(0) == (i % 2 == 1 ? 1.0 - start : start));
  }
}

// ---------------------------------------------------------------- Boyan

namespace {

Eigen::VectorXd power_iteration(Eigen::MatrixXd const &P)
{
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(P.rows(), 1.0 / static_cast<double>(P.rows()));
  for (int i = 0; i < 100000; ++i) {
    Eigen::VectorXd next = P.transpose() * mu;
    if ((next - mu).lpNorm<1>() < 1e-15) {
      return next;
    }
    mu = next;
  }
  return mu;
}

Eigen::VectorXd iterate_values(BoyanTask const &t)
{
  Eigen::VectorXd v = Eigen::VectorXd::Zero(t.states());
  for (int i = 0; i < 5000; ++i) {
    v = t.r + t.gamma * t.P * v;
  }
  return v;
}

} // namespace

TEST_CASE("boyan generation follows the chain structure")
{
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    BoyanTask const t = boyan_generate(rng, 10, 4, 0.9);
    CHECK(t.states() == 10);
    CHECK(t.feature_dim() == 4);
    for (Eigen::Index i = 0; i < 10; ++i) {
      CHECK(std::abs(t.P.row(i).sum() - 1.0) < 1e-12);
      for (Eigen::Index j = 0; j < 10; ++j) {
        bool const allowed = i == 9 || (i <= 7 && (j == i + 1 || j == i + 2)) || (i == 8 && j == 9);
        if (!allowed) {
          CHECK(t.P(i, j) == 0.0);
        }
      }
    }
    CHECK(t.P(8, 9) == 1.0);
    CHECK(t.phi.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(t.r.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(is_ergodic(t.P));
  }
}

TEST_CASE("stationary distribution")
{
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  Eigen::VectorXd const mu = solve_stationary(swap);
  CHECK(mu(0) == doctest::Approx(0.5));
  CHECK(mu(1) == doctest::Approx(0.5));

  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    BoyanTask const t = boyan_generate(rng, 4, 2, 0.9);
    CHECK((t.P.transpose() * t.mu - t.mu).lpNorm<1>() < 1e-10);
    CHECK((t.mu - power_iteration(t.P)).cwiseAbs().maxCoeff() < 1e-8);
  }
  Eigen::MatrixXd reducible = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(solve_stationary(reducible), NumericalError);
}

TEST_CASE("true values")
{
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  Eigen::VectorXd r(2);
  r << 1, 0;
  Eigen::VectorXd const v = solve_values(swap, r, 0.5);
  CHECK(v(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(v(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK((solve_values(swap, r, 0.0) - r).norm() == 0.0);

  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    BoyanTask const t = boyan_generate(rng, 10, 4, 0.9);
    CHECK((t.v - iterate_values(t)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("sampling transitions")
{
  BoyanTask const t = boyan_generate(17, 10, 4, 0.9);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    BoyanStep const s = boyan_step(t, 8, rng);
    CHECK(s.next == 9);
    CHECK(s.reward == t.r(8));
    CHECK(s.transition.phi == Eigen::VectorXd(t.phi.row(8).transpose()));
    CHECK(s.transition.phi_next == Eigen::VectorXd(t.phi.row(9).transpose()));
  }
  int const draws = 100000;
  int to_next = 0;
  for (int i = 0; i < draws; ++i) {
    BoyanStep const s = boyan_step(t, 1, rng);
    CHECK(s.reward == t.r(1));
    to_next += s.next == 2 ? 1 : 0;
  }
  double const p = t.P(1, 2);
  double const sigma = std::sqrt(draws * p * (1 - p));
  CHECK(std::abs(to_next - draws * p) < 3 * sigma + 1);
}

TEST_CASE("msve")
{
  BoyanTask t;
  t.mu = (Eigen::VectorXd(3) << 0.2, 0.3, 0.5).finished();
  t.v = (Eigen::VectorXd(3) << 1.0, -2.0, 0.5).finished();
  CHECK(msve(t.v, t) == 0.0);
  CHECK(msve((t.v.array() + 1).matrix(), t) == doctest::Approx(1.0));
  Eigen::VectorXd const vh = (Eigen::VectorXd(3) << 0.0, 1.0, 1.0).finished();
  CHECK(msve(vh, t) == doctest::Approx(0.2 * 1 + 0.3 * 9 + 0.5 * 0.25));
  CHECK(msve(Eigen::VectorXd::Zero(3), t) == doctest::Approx((t.mu.array() * t.v.array().square()).sum()));
}

TEST_CASE("task json round trip")
{
  BoyanTask const t = boyan_generate(3, 10, 4, 0.9);
  BoyanTask const u = boyan_from_json(nlohmann::json::parse(boyan_to_json(t).dump()));
  CHECK(u.P == t.P);
  CHECK(u.phi == t.phi);
  CHECK(u.r == t.r);
  CHECK((u.mu - t.mu).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((u.v - t.v).cwiseAbs().maxCoeff() < 1e-12);
}

// ---------------------------------------------------------------- MNIST

namespace {

IdxImages synthetic_images(std::uint32_t count, std::uint32_t seed)
{
  IdxImages im;
  im.count = count;
  im.rows = 28;
  im.cols = 28;
  Rng rng(seed);
  im.pixels.resize(std::size_t(count) * 784);
  for (auto &p : im.pixels) {
    p = static_cast<std::uint8_t>(rng.index(256));
  }
  return im;
}

void write_bytes(std::filesystem::path const &p, std::vector<std::uint8_t> const &b)
{
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<char const *>(b.data()), std::streamsize(b.size()));
}

void write_gz(std::filesystem::path const &p, std::vector<std::uint8_t> const &b)
{
  gzFile f = gzopen(p.string().c_str(), "wb");
  gzwrite(f, b.data(), static_cast<unsigned>(b.size()));
  gzclose(f);
}

} // namespace

TEST_CASE("idx round trip and magic numbers")
{
  IdxImages const im = synthetic_images(2, 1);
  auto const bytes = encode_idx_images(im);
  CHECK(bytes[0] == 0);
  CHECK(bytes[1] == 0);
  CHECK(bytes[2] == 8);
  CHECK(bytes[3] == 3);
  IdxImages const back = parse_idx_images(bytes);
  CHECK(back.count == 2);
  CHECK(back.pixels == im.pixels);

  IdxLabels const labels{{3, 7, 9}};
  auto const lb = encode_idx_labels(labels);
  CHECK(lb[3] == 1);
  CHECK(parse_idx_labels(lb).labels == labels.labels);

  auto broken = bytes;
  broken[3] = 1;
  CHECK_THROWS_AS(parse_idx_images(broken), MnistError);
  broken = bytes;
  broken.pop_back();
  CHECK_THROWS_AS(parse_idx_images(broken), MnistError);
  auto bad_label = lb;
  bad_label.back() = 10;
  CHECK_THROWS_AS(parse_idx_labels(bad_label), MnistError);
}

TEST_CASE("downsampling")
{
  std::vector<std::uint8_t> img(784, 200);
  Eigen::MatrixXf const d = mnist_downsample(img);
  CHECK(d.rows() == 7);
  CHECK(d.cols() == 7);
  CHECK((d.array() - 200.0f / 255.0f).abs().maxCoeff() < 1e-6f);

  std::vector<std::uint8_t> dot(784, 0);
  dot[5 * 28 + 9] = 255; // row 5, col 9 -> cell (1, 2)
  Eigen::MatrixXf const pooled = mnist_pool(dot);
  CHECK(pooled(1, 2) == doctest::Approx(255.0 / 16.0));
  CHECK((pooled.array() > 0).count() == 1);
}

TEST_CASE("loading from a directory, plain and gzipped")
{
  test::TempDir dir("mnist");
  IdxImages const train = synthetic_images(30, 2), test_im = synthetic_images(10, 3);
  IdxLabels train_l, test_l;
  for (int i = 0; i < 30; ++i) {
    train_l.labels.push_back(static_cast<std::uint8_t>(i % 10));
  }
  for (int i = 0; i < 10; ++i) {
    test_l.labels.push_back(static_cast<std::uint8_t>(i));
  }
  CHECK_THROWS_WITH_AS(mnist_load(dir.path()), doctest::Contains("fetch-mnist"), MnistError);

  write_gz(dir.path() / "train-images-idx3-ubyte.gz", encode_idx_images(train));
  write_bytes(dir.path() / "train-labels-idx1-ubyte", encode_idx_labels(train_l));
  write_gz(dir.path() / "t10k-images-idx3-ubyte.gz", encode_idx_images(test_im));
  write_bytes(dir.path() / "t10k-labels-idx1-ubyte", encode_idx_labels(test_l));
  MnistRaw const raw = mnist_load(dir.path());
  CHECK(raw.train_images.pixels == train.pixels);
  MnistDataset const data = mnist_prepare(raw);
  CHECK(data.train_x.rows() == 49);
  CHECK(data.train_x.cols() == 30);
  CHECK(data.test_x.cols() == 10);
  CHECK(data.train_x.minCoeff() >= 0.0f);
  CHECK(data.train_x.maxCoeff() <= 1.0f);
  // Row-major flattening of the pooled image.
  Eigen::MatrixXf const first = mnist_downsample(train.image(0));
  CHECK(data.train_x(1, 0) == first(0, 1));
  CHECK(data.train_x(7, 0) == first(1, 0));

  std::vector<int> identity(49);
  std::iota(identity.begin(), identity.end(), 0);
  PermutedMnistTask const same = mnist_make_task(data, identity);
  CHECK(same.train_x == data.train_x);

  Rng rng(4);
  PermutedMnistTask const task = mnist_make_task(data, rng);
  CHECK(task.train_y == data.train_y);
  for (Eigen::Index i = 0; i < 30; ++i) {
    std::vector<float> a(data.train_x.col(i).data(), data.train_x.col(i).data() + 49);
    std::vector<float> b(task.train_x.col(i).data(), task.train_x.col(i).data() + 49);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
  Eigen::MatrixXf const twice = permute_rows(task.train_x, task.permutation);
  bool involution = true;
  for (int i = 0; i < 49; ++i) {
    involution = involution && task.permutation[static_cast<std::size_t>(task.permutation[static_cast<std::size_t>(i)])] == i;
  }
  if (!involution) {
    CHECK(twice != task.train_x);
  }
  std::vector<int> bad = identity;
  bad[3] = 4;
  CHECK_THROWS(mnist_make_task(data, bad));
}
