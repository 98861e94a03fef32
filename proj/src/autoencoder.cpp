#include "gradlab/autoencoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradlab {

namespace {

using Eigen::MatrixXd;

MatrixXd relu(const MatrixXd& p) { return p.cwiseMax(0.0); }

// ReLU derivative; exactly 0 at the kink.
MatrixXd relu_mask(const MatrixXd& p) {
  return (p.array() > 0.0).cast<double>().matrix();
}

void check_finite(const MatrixXd& pre, const char* stage, int layer) {
  if (!pre.allFinite()) {
    throw std::runtime_error(std::string("non-finite activation in ") + stage + " layer " +
                             std::to_string(layer + 1));
  }
}

}  // namespace

void AutoencoderShape::validate() const {
  if (ell < 1 || input_dim < 1 || hidden < 1)
    throw std::invalid_argument("autoencoder shape: ell, input_dim, hidden must be >= 1");
}

int AutoencoderShape::weight_offset(int i) const {
  int off = 0;
  for (int k = 0; k < i; ++k) off += weight_rows(k) * weight_cols(k);
  return off;
}

int AutoencoderShape::bias_offset(int j) const {
  int off = weight_offset(ell);
  for (int k = 0; k < j; ++k) off += bias_len(k);
  return off;
}

int AutoencoderShape::flat_size() const { return bias_offset(2 * ell - 1) + bias_len(2 * ell - 1); }

Eigen::Map<const Eigen::MatrixXd> AutoencoderShape::weight(const Vector& flat, int i) const {
  return {flat.data() + weight_offset(i), weight_rows(i), weight_cols(i)};
}

Eigen::Map<const Eigen::VectorXd> AutoencoderShape::bias(const Vector& flat, int j) const {
  return {flat.data() + bias_offset(j), bias_len(j)};
}

Eigen::Map<Eigen::MatrixXd> AutoencoderShape::weight(Vector& flat, int i) const {
  return {flat.data() + weight_offset(i), weight_rows(i), weight_cols(i)};
}

Eigen::Map<Eigen::VectorXd> AutoencoderShape::bias(Vector& flat, int j) const {
  return {flat.data() + bias_offset(j), bias_len(j)};
}

Batch make_batch(Eigen::MatrixXd examples) {
  if (examples.cols() < 1) throw std::invalid_argument("batch: need at least one example");
  return Batch{std::move(examples)};
}

Vector glorot_init(const AutoencoderShape& shape, Rng& rng) {
  shape.validate();
  Vector flat = Vector::Zero(shape.flat_size());
  for (int i = 0; i < shape.ell; ++i) {
    const int fan_out = shape.weight_rows(i);
    const int fan_in = shape.weight_cols(i);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = flat.data() + shape.weight_offset(i);
    const int count = fan_in * fan_out;
    for (int k = 0; k < count; ++k) w[k] = rng.uniform(-limit, limit);
  }
  return flat;
}

ForwardCache forward_cached(const AutoencoderShape& shape, const Vector& params,
                            const Eigen::MatrixXd& inputs) {
  shape.validate();
  if (params.size() != shape.flat_size())
    throw std::invalid_argument("forward: parameter vector has wrong length");
  if (inputs.rows() != shape.input_dim)
    throw std::invalid_argument("forward: input rows must equal input_dim");

  const int ell = shape.ell;
  ForwardCache cache;
  cache.enc_pre.reserve(ell);
  cache.enc_act.reserve(ell);
  cache.dec_pre.reserve(ell);
  cache.dec_act.reserve(ell);

  const MatrixXd* h = &inputs;
  for (int i = 0; i < ell; ++i) {
    MatrixXd pre = (shape.weight(params, i) * (*h)).colwise() + shape.bias(params, i);
    check_finite(pre, "encoder", i);
    cache.enc_pre.push_back(std::move(pre));
    cache.enc_act.push_back(relu(cache.enc_pre.back()));
    h = &cache.enc_act.back();
  }

  const MatrixXd* u = &cache.enc_act.back();
  for (int j = 0; j < ell; ++j) {
    const int wi = ell - 1 - j;
    MatrixXd pre =
        (shape.weight(params, wi).transpose() * (*u)).colwise() + shape.bias(params, ell + j);
    check_finite(pre, "decoder", j);
    cache.dec_pre.push_back(std::move(pre));
    cache.dec_act.push_back(j < ell - 1 ? relu(cache.dec_pre.back()) : cache.dec_pre.back());
    u = &cache.dec_act.back();
  }
  return cache;
}

Eigen::MatrixXd forward(const AutoencoderShape& shape, const Vector& params,
                        const Eigen::MatrixXd& inputs) {
  return forward_cached(shape, params, inputs).reconstruction();
}

Vector forward_single(const AutoencoderShape& shape, const Vector& params, const Vector& z) {
  return forward(shape, params, z);
}

double batch_loss(const AutoencoderShape& shape, const Vector& params, const Batch& batch) {
  const MatrixXd recon = forward(shape, params, batch.examples);
  return (recon - batch.examples).squaredNorm() / batch.count();
}

std::pair<double, Vector> batch_loss_and_grad(const AutoencoderShape& shape, const Vector& params,
                                              const Batch& batch) {
  const int ell = shape.ell;
  const int n = batch.count();
  const ForwardCache cache = forward_cached(shape, params, batch.examples);

  const double loss = (cache.reconstruction() - batch.examples).squaredNorm() / n;
  Vector grad = Vector::Zero(shape.flat_size());

  // Decoder sweep: layer j applied W_{wi}^T, so its matrix gradient lands in
  // W_{wi} transposed.
  MatrixXd g_out = (2.0 / n) * (cache.reconstruction() - batch.examples);
  for (int j = ell - 1; j >= 0; --j) {
    const int wi = ell - 1 - j;
    const MatrixXd g_pre =
        j < ell - 1 ? MatrixXd(g_out.cwiseProduct(relu_mask(cache.dec_pre[j]))) : g_out;
    const MatrixXd& below = j == 0 ? cache.enc_act.back() : cache.dec_act[j - 1];
    shape.bias(grad, ell + j) += g_pre.rowwise().sum();
    shape.weight(grad, wi) += below * g_pre.transpose();
    g_out = shape.weight(params, wi) * g_pre;
  }

  // Encoder sweep.
  for (int i = ell - 1; i >= 0; --i) {
    const MatrixXd g_pre = g_out.cwiseProduct(relu_mask(cache.enc_pre[i]));
    const MatrixXd& below = i == 0 ? batch.examples : cache.enc_act[i - 1];
    shape.bias(grad, i) += g_pre.rowwise().sum();
    shape.weight(grad, i) += g_pre * below.transpose();
    g_out = shape.weight(params, i).transpose() * g_pre;
  }
  return {loss, std::move(grad)};
}

Vector pearlmutter_hvp(const AutoencoderShape& shape, const Vector& params, const Batch& batch,
                       const Vector& direction) {
  if (direction.size() != shape.flat_size())
    throw std::invalid_argument("hvp: direction vector has wrong length");
  const int ell = shape.ell;
  const int n = batch.count();
  const ForwardCache cache = forward_cached(shape, params, batch.examples);

  // Forward tangent sweep: directional derivatives of every activation.
  std::vector<MatrixXd> r_enc(ell), r_dec(ell);
  {
    MatrixXd r_h = MatrixXd::Zero(shape.input_dim, n);
    for (int i = 0; i < ell; ++i) {
      const MatrixXd& below = i == 0 ? batch.examples : cache.enc_act[i - 1];
      MatrixXd r_pre = shape.weight(direction, i) * below + shape.weight(params, i) * r_h;
      r_pre.colwise() += shape.bias(direction, i);
      r_enc[i] = r_pre.cwiseProduct(relu_mask(cache.enc_pre[i]));
      r_h = r_enc[i];
    }
    MatrixXd r_u = r_enc[ell - 1];
    for (int j = 0; j < ell; ++j) {
      const int wi = ell - 1 - j;
      const MatrixXd& below = j == 0 ? cache.enc_act.back() : cache.dec_act[j - 1];
      MatrixXd r_pre = shape.weight(direction, wi).transpose() * below +
                       shape.weight(params, wi).transpose() * r_u;
      r_pre.colwise() += shape.bias(direction, ell + j);
      r_dec[j] = j < ell - 1 ? MatrixXd(r_pre.cwiseProduct(relu_mask(cache.dec_pre[j]))) : r_pre;
      r_u = r_dec[j];
    }
  }

  // Reverse sweep carrying both the adjoint and its tangent.
  Vector hv = Vector::Zero(shape.flat_size());
  MatrixXd g_out = (2.0 / n) * (cache.reconstruction() - batch.examples);
  MatrixXd r_g_out = (2.0 / n) * r_dec[ell - 1];
  for (int j = ell - 1; j >= 0; --j) {
    const int wi = ell - 1 - j;
    MatrixXd g_pre, r_g_pre;
    if (j < ell - 1) {
      const MatrixXd mask = relu_mask(cache.dec_pre[j]);
      g_pre = g_out.cwiseProduct(mask);
      r_g_pre = r_g_out.cwiseProduct(mask);
    } else {
      g_pre = g_out;
      r_g_pre = r_g_out;
    }
    const MatrixXd& below = j == 0 ? cache.enc_act.back() : cache.dec_act[j - 1];
    const MatrixXd& r_below = j == 0 ? r_enc[ell - 1] : r_dec[j - 1];
    shape.bias(hv, ell + j) += r_g_pre.rowwise().sum();
    shape.weight(hv, wi) += below * r_g_pre.transpose() + r_below * g_pre.transpose();
    r_g_out = shape.weight(direction, wi) * g_pre + shape.weight(params, wi) * r_g_pre;
    g_out = shape.weight(params, wi) * g_pre;
  }
  for (int i = ell - 1; i >= 0; --i) {
    const MatrixXd mask = relu_mask(cache.enc_pre[i]);
    const MatrixXd g_pre = g_out.cwiseProduct(mask);
    const MatrixXd r_g_pre = r_g_out.cwiseProduct(mask);
    const MatrixXd& below = i == 0 ? batch.examples : cache.enc_act[i - 1];
    shape.bias(hv, i) += r_g_pre.rowwise().sum();
    if (i == 0) {
      shape.weight(hv, i) += r_g_pre * below.transpose();  // inputs have no tangent
    } else {
      shape.weight(hv, i) += r_g_pre * below.transpose() + g_pre * r_enc[i - 1].transpose();
    }
    r_g_out = shape.weight(direction, i).transpose() * g_pre +
              shape.weight(params, i).transpose() * r_g_pre;
    g_out = shape.weight(params, i).transpose() * g_pre;
  }
  return hv;
}

ObjectiveHandle make_autoencoder_objective(const AutoencoderShape& shape,
                                           std::shared_ptr<const Eigen::MatrixXd> train,
                                           std::uint64_t probe_seed) {
  shape.validate();
  if (!train || train->cols() < 1) throw std::invalid_argument("autoencoder objective: no data");
  if (train->rows() != shape.input_dim)
    throw std::invalid_argument("autoencoder objective: data rows != input_dim");

  ObjectiveHandle obj;
  obj.dim = shape.flat_size();
  obj.name = "autoencoder";
  obj.value = [shape, train](const Vector& x) {
    return batch_loss(shape, x, Batch{*train});
  };
  obj.gradient = [shape, train](const Vector& x) {
    return batch_loss_and_grad(shape, x, Batch{*train}).second;
  };
  obj.hessian_vec = [shape, train](const Vector& x, const Vector& v) {
    return pearlmutter_hvp(shape, x, Batch{*train}, v);
  };

  // No closed form for these on a ReLU net: probe seeded Glorot draws and
  // flag the numbers as estimates.
  constexpr int kProbes = 4;
  constexpr int kPowerIters = 12;
  double sigma_est = 0.0;
  double lip_est = 0.0;
  for (int p = 0; p < kProbes; ++p) {
    Rng rng = Rng::derive(probe_seed, static_cast<std::uint64_t>(p));
    const Vector x = glorot_init(shape, rng);
    sigma_est = std::max(sigma_est, obj.gradient(x).norm());
    Vector v(obj.dim);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < kPowerIters; ++it) {
      Vector hv = obj.hessian_vec(x, v);
      lambda = hv.norm();
      if (lambda == 0.0) break;
      v = hv / lambda;
    }
    lip_est = std::max(lip_est, lambda);
  }
  obj.meta.grad_bound = sigma_est > 0.0 ? sigma_est : 1.0;
  obj.meta.lipschitz = lip_est > 0.0 ? lip_est : 1.0;
  obj.meta.grad_bound_estimated = true;
  obj.meta.f_min = 0.0;
  obj.meta.lower_bound = 0.0;
  obj.meta.validate();
  return obj;
}

}  // namespace gradlab
