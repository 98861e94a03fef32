#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "gradlab/objective.hpp"
#include "gradlab/rng.hpp"

namespace gradlab {

// Fully connected autoencoder with ReLU activations and shared weights:
// the decoder applies the transposed encoder matrices in reverse order.
// With ell weight matrices the net has 2*ell - 1 hidden layers; the final
// decoder layer is affine (no ReLU). All parameters live in one flat vector
// laid out as [vec(W_1) ... vec(W_ell), b_1 ... b_{2 ell}].
struct AutoencoderShape {
  int ell = 1;        // number of weight matrices
  int input_dim = 1;  // d
  int hidden = 1;     // uniform hidden width h

  int weight_rows(int) const { return hidden; }
  int weight_cols(int i) const { return i == 0 ? input_dim : hidden; }
  int bias_len(int j) const { return j == 2 * ell - 1 ? input_dim : hidden; }
  int weight_offset(int i) const;
  int bias_offset(int j) const;
  int flat_size() const;
  void validate() const;

  Eigen::Map<const Eigen::MatrixXd> weight(const Vector& flat, int i) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Vector& flat, int j) const;
  Eigen::Map<Eigen::MatrixXd> weight(Vector& flat, int i) const;
  Eigen::Map<Eigen::VectorXd> bias(Vector& flat, int j) const;
};

// One example per column.
struct Batch {
  Eigen::MatrixXd examples;
  int count() const { return static_cast<int>(examples.cols()); }
};

Batch make_batch(Eigen::MatrixXd examples);  // validates n >= 1

// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out)) per matrix),
// zero biases.
Vector glorot_init(const AutoencoderShape& shape, Rng& rng);

// Pre-activations and activations of every layer, encoder then decoder.
// dec_act.back() is the reconstruction.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> enc_pre, enc_act;
  std::vector<Eigen::MatrixXd> dec_pre, dec_act;
  const Eigen::MatrixXd& reconstruction() const { return dec_act.back(); }
};

ForwardCache forward_cached(const AutoencoderShape& shape, const Vector& params,
                            const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward(const AutoencoderShape& shape, const Vector& params,
                        const Eigen::MatrixXd& inputs);
Vector forward_single(const AutoencoderShape& shape, const Vector& params, const Vector& z);

// Mean reconstruction loss (1/n) sum |z - z_hat|^2 over the batch.
double batch_loss(const AutoencoderShape& shape, const Vector& params, const Batch& batch);

// Loss and gradient via reverse accumulation. Each shared matrix receives the
// sum of its encoder-path and (transposed) decoder-path contributions; the
// ReLU subgradient at 0 is taken as 0.
std::pair<double, Vector> batch_loss_and_grad(const AutoencoderShape& shape, const Vector& params,
                                              const Batch& batch);

// Exact Hessian-vector product by forward-mode differentiation of the
// backprop pass, treating ReLU as locally linear.
Vector pearlmutter_hvp(const AutoencoderShape& shape, const Vector& params, const Batch& batch,
                       const Vector& direction);

// Wraps the training-set loss as an objective. The gradient-norm bound and
// smoothness constant are probed at seeded Glorot draws and flagged as
// estimates in the metadata.
ObjectiveHandle make_autoencoder_objective(const AutoencoderShape& shape,
                                           std::shared_ptr<const Eigen::MatrixXd> train,
                                           std::uint64_t probe_seed);

}  // namespace gradlab
