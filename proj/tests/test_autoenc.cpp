#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gradlab/autoencoder.hpp"
#include "gradlab/data.hpp"
#include "testutil.hpp"

using namespace gradlab;

namespace {

// Smallest |pre-activation| across all layers; coordinates whose probes sit
// near a ReLU kink get skipped in finite-difference comparisons.
double kink_margin(const AutoencoderShape& shape, const Vector& params,
                   const Eigen::MatrixXd& inputs) {
  const ForwardCache cache = forward_cached(shape, params, inputs);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& p : cache.enc_pre) margin = std::min(margin, p.cwiseAbs().minCoeff());
  for (std::size_t j = 0; j + 1 < cache.dec_pre.size(); ++j)
    margin = std::min(margin, cache.dec_pre[j].cwiseAbs().minCoeff());
  return margin;
}

Batch random_batch(int dim, int n, Rng& rng) {
  Eigen::MatrixXd z(dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) z(i, j) = rng.uniform(0.0, 1.0);
  return make_batch(std::move(z));
}

}  // namespace

TEST_CASE("flat layout: size formula and round trip") {
  for (int ell : {1, 2, 3}) {
    for (int d : {3, 7}) {
      for (int h : {2, 5}) {
        AutoencoderShape s{ell, d, h};
        const int expected = h * d + (ell - 1) * h * h + ell * h + (ell - 1) * h + d;
        CHECK(s.flat_size() == expected);

        Rng rng(1);
        Vector flat(s.flat_size());
        for (int i = 0; i < s.flat_size(); ++i) flat[i] = rng.normal();
        Vector rebuilt = Vector::Zero(s.flat_size());
        for (int i = 0; i < ell; ++i) s.weight(rebuilt, i) = s.weight(flat, i);
        for (int j = 0; j < 2 * ell; ++j) s.bias(rebuilt, j) = s.bias(flat, j);
        CHECK((rebuilt - flat).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("glorot init: limits, zero biases, determinism") {
  AutoencoderShape s{2, 4, 4};
  Rng rng(42);
  const Vector flat = glorot_init(s, rng);
  const double limit = std::sqrt(6.0 / 8.0);
  CHECK(limit == doctest::Approx(0.86603).epsilon(1e-5));
  for (int i = 0; i < 2; ++i) {
    const auto w = s.weight(flat, i);
    CHECK(w.cwiseAbs().maxCoeff() <= limit);
    CHECK(w.cwiseAbs().maxCoeff() > 0.0);
  }
  for (int j = 0; j < 4; ++j) CHECK(s.bias(flat, j).norm() == 0.0);

  Rng rng2(42);
  CHECK((glorot_init(s, rng2) - flat).norm() == 0.0);

  // Distinct fan-in changes the limit: W1 of a non-square net.
  AutoencoderShape wide{1, 10, 2};
  Rng rng3(7);
  const Vector f3 = glorot_init(wide, rng3);
  CHECK(wide.weight(f3, 0).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 12.0));
}

TEST_CASE("forward: zero parameters and the scaled-identity closed form") {
  AutoencoderShape s{2, 3, 3};
  const Vector zero_params = Vector::Zero(s.flat_size());
  Vector z(3);
  z << 0.5, 0.2, 0.9;
  CHECK(forward_single(s, zero_params, z).norm() == 0.0);
  CHECK(batch_loss(s, zero_params, make_batch(z)) == doctest::Approx(z.squaredNorm()));

  // ell = 1, W = c*I, nonnegative input, zero biases: output c^2 z.
  AutoencoderShape s1{1, 3, 3};
  Vector params = Vector::Zero(s1.flat_size());
  const double c = 0.7;
  params.head(9) = (c * Eigen::MatrixXd::Identity(3, 3)).reshaped();
  const Vector out = forward_single(s1, params, z);
  CHECK((out - c * c * z).norm() <= 1e-15);

  // c = 1 reconstructs exactly: zero loss.
  Vector params_id = Vector::Zero(s1.flat_size());
  params_id.head(9) = Eigen::MatrixXd::Identity(3, 3).reshaped();
  Vector z2(3);
  z2 << 1.0, 0.0, 0.0;
  CHECK(batch_loss(s1, params_id, make_batch(z2)) == 0.0);
  const auto [loss, grad] = batch_loss_and_grad(s1, params_id, make_batch(z2));
  CHECK(loss == 0.0);
  CHECK(grad.norm() == 0.0);
}

TEST_CASE("gradient matches finite differences away from kinks") {
  AutoencoderShape s{2, 5, 5};
  Rng rng(3);
  Rng data_rng(4);
  const Batch batch = random_batch(5, 8, data_rng);
  int checked = 0;
  for (int rep = 0; rep < 8; ++rep) {
    const Vector params = glorot_init(s, rng);
    const auto [loss, grad] = batch_loss_and_grad(s, params, batch);
    CHECK(loss >= 0.0);
    const Vector fd = testutil::fd_gradient(
        [&](const Vector& p) { return batch_loss(s, p, batch); }, params, 2e-6);
    for (int i = 0; i < s.flat_size(); ++i) {
      // Probe both finite-difference endpoints for kink crossings.
      Vector pp = params, pm = params;
      const double h = 2e-6 * (1.0 + std::abs(params[i]));
      pp[i] += h;
      pm[i] -= h;
      if (kink_margin(s, pp, batch.examples) < 1e-6 ||
          kink_margin(s, pm, batch.examples) < 1e-6)
        continue;
      ++checked;
      CHECK(std::abs(grad[i] - fd[i]) <= 1e-5 * std::max(1.0, std::abs(grad[i])));
    }
  }
  CHECK(checked > 100);  // the skip rule must not hollow the test out
}

TEST_CASE("zero-parameter gradient matches finite differences") {
  AutoencoderShape s{2, 4, 3};
  Rng data_rng(9);
  const Batch batch = random_batch(4, 6, data_rng);
  const Vector zero_params = Vector::Zero(s.flat_size());
  const auto [loss, grad] = batch_loss_and_grad(s, zero_params, batch);
  CHECK(loss > 0.0);
  // Only the output bias sees a nonzero derivative here: d/db |z - b|^2.
  Eigen::VectorXd expected_bias = -(2.0 / batch.count()) * batch.examples.rowwise().sum();
  CHECK((s.bias(grad, 2 * s.ell - 1) - expected_bias).norm() <= 1e-12);
  const Vector fd = testutil::fd_gradient(
      [&](const Vector& p) { return batch_loss(s, p, batch); }, zero_params, 1e-6);
  CHECK((grad - fd).lpNorm<Eigen::Infinity>() <= 1e-5);
}

TEST_CASE("tied weights: analytic gradient equals the shared-matrix derivative") {
  // Perturbing one W entry moves the loss through encoder and decoder at
  // once; the finite difference of the single shared parameter must match.
  AutoencoderShape s{1, 4, 4};
  Rng rng(11);
  const Vector params = glorot_init(s, rng);
  Rng data_rng(12);
  const Batch batch = random_batch(4, 5, data_rng);
  const auto [loss, grad] = batch_loss_and_grad(s, params, batch);
  const Vector fd = testutil::fd_gradient(
      [&](const Vector& p) { return batch_loss(s, p, batch); }, params, 2e-6);
  for (int i = 0; i < 16; ++i) {  // the W1 block
    CHECK(std::abs(grad[i] - fd[i]) <= 1e-5 * std::max(1.0, std::abs(grad[i])));
  }
}

TEST_CASE("pearlmutter hvp: zero direction, linearity, symmetry, fd agreement") {
  AutoencoderShape s{2, 5, 5};
  Rng rng(21);
  const Vector params = glorot_init(s, rng);
  Rng data_rng(22);
  const Batch batch = random_batch(5, 6, data_rng);
  const int n = s.flat_size();

  CHECK(pearlmutter_hvp(s, params, batch, Vector::Zero(n)).norm() == 0.0);

  Vector u(n), w(n);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.normal();
    w[i] = rng.normal();
  }
  const Vector hu = pearlmutter_hvp(s, params, batch, u);
  const Vector hw = pearlmutter_hvp(s, params, batch, w);
  const Vector hc = pearlmutter_hvp(s, params, batch, 2.0 * u - 0.5 * w);
  CHECK((hc - (2.0 * hu - 0.5 * hw)).norm() <= 1e-8 * std::max(1.0, hc.norm()));

  const double a = hu.dot(w), b = hw.dot(u);
  CHECK(std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(a)));

  const Vector fd = testutil::fd_hvp(
      [&](const Vector& p) { return batch_loss_and_grad(s, p, batch).second; }, params,
      u / u.norm(), 1e-6);
  const Vector analytic = pearlmutter_hvp(s, params, batch, u / u.norm());
  CHECK((analytic - fd).norm() <= 1e-4 * std::max(1.0, analytic.norm()));
}

TEST_CASE("loss is nonnegative and zero only at exact reconstruction") {
  AutoencoderShape s{1, 3, 3};
  Rng rng(31);
  Rng data_rng(32);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector params = glorot_init(s, rng);
    const Batch batch = random_batch(3, 4, data_rng);
    const double loss = batch_loss(s, params, batch);
    CHECK(loss >= 0.0);
    const Eigen::MatrixXd recon = forward(s, params, batch.examples);
    if (loss == 0.0) CHECK((recon - batch.examples).norm() == 0.0);
  }
}

TEST_CASE("autoencoder objective handle carries estimated metadata") {
  AutoencoderShape s{1, 4, 3};
  auto data = std::make_shared<Eigen::MatrixXd>(synthetic_bump_images(2, 12, 5));
  CHECK(data->rows() == 4);
  const auto obj = make_autoencoder_objective(s, data, 99);
  CHECK(obj.dim == s.flat_size());
  CHECK(obj.meta.grad_bound_estimated);
  CHECK(obj.meta.grad_bound > 0.0);
  CHECK(obj.meta.lipschitz > 0.0);
  Rng rng(1);
  const Vector x = glorot_init(s, rng);
  CHECK(obj.value(x) >= 0.0);
  CHECK(obj.gradient(x).size() == obj.dim);
}

TEST_CASE("non-finite activations raise with the layer index") {
  AutoencoderShape s{2, 3, 3};
  Rng data_rng(1);
  const Batch batch = random_batch(3, 2, data_rng);

  Vector params = Vector::Zero(s.flat_size());
  params[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(forward(s, params, batch.examples),
                       doctest::Contains("encoder layer 1"), std::runtime_error);

  // Overflow deep in the net: the tied decoder squares the big W1 factor, so
  // the first infinity shows up applying W1^T at the end.
  Vector big = Vector::Zero(s.flat_size());
  s.weight(big, 0).setConstant(1e200);
  s.weight(big, 1).setConstant(1.0);
  CHECK_THROWS_WITH_AS(batch_loss(s, big, batch), doctest::Contains("decoder layer 2"),
                       std::runtime_error);

  CHECK_THROWS_AS(forward(s, Vector::Zero(5), batch.examples), std::invalid_argument);
  CHECK_THROWS_AS(forward(s, Vector::Zero(s.flat_size()), Eigen::MatrixXd::Zero(4, 2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      pearlmutter_hvp(s, Vector::Zero(s.flat_size()), batch, Vector::Zero(3)),
      std::invalid_argument);
}

TEST_CASE("synthetic images: range, shape, determinism") {
  const auto a = synthetic_bump_images(6, 20, 77);
  CHECK(a.rows() == 36);
  CHECK(a.cols() == 20);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
  CHECK(a.maxCoeff() > 0.0);
  const auto b = synthetic_bump_images(6, 20, 77);
  CHECK((a - b).norm() == 0.0);
  const auto c = synthetic_bump_images(6, 20, 78);
  CHECK((a - c).norm() > 0.0);
}

TEST_CASE("idx reader: round trip, scaling, crop, bad magic") {
  const std::string path = "test_images.idx";
  const int n = 3, rows = 8, cols = 8;
  {
    std::ofstream out(path, std::ios::binary);
    auto be32 = [&](std::uint32_t v) {
      unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
      out.write(reinterpret_cast<char*>(b), 4);
    };
    be32(0x00000803u);
    be32(n);
    be32(rows);
    be32(cols);
    for (int k = 0; k < n * rows * cols; ++k) {
      const unsigned char byte = static_cast<unsigned char>(k % 251);
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }

  const auto imgs = read_idx_images(path);
  CHECK(imgs.rows() == rows * cols);
  CHECK(imgs.cols() == n);
  CHECK(imgs.minCoeff() >= 0.0);
  CHECK(imgs.maxCoeff() <= 1.0);
  // First image, pixel (row 0, col 1) was byte 1 in row-major order.
  CHECK(imgs(/*col-major index of (0,1)=*/rows + 0, 0) ==
        doctest::Approx(1.0 / 255.0).epsilon(1e-12));

  const auto cropped = read_idx_images(path, 3);
  CHECK(cropped.rows() == (rows - 6) * (cols - 6));
  CHECK(cropped.cols() == n);
  // Crop keeps the interior: (3,3) of the original is byte 3*cols+3.
  CHECK(cropped(0, 0) == doctest::Approx((3.0 * cols + 3.0) / 255.0).epsilon(1e-12));

  const auto limited = read_idx_images(path, 0, 2);
  CHECK(limited.cols() == 2);

  {
    std::ofstream out(path, std::ios::binary);
    out << "not an idx file";
  }
  CHECK_THROWS(read_idx_images(path));
  std::remove(path.c_str());
}
