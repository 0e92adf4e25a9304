#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace surnn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Mutable view of one named parameter tensor. Data is Eigen's
// column-major storage.
struct ParamTensor {
  std::string name;
  double* data = nullptr;
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
  std::span<double> values() const { return {data, static_cast<std::size_t>(size())}; }
};

using ParamList = std::vector<ParamTensor>;

inline ParamTensor param_ref(std::string name, Matrix& m) {
  return {std::move(name), m.data(), m.rows(), m.cols()};
}
inline ParamTensor param_ref(std::string name, Vector& v) {
  return {std::move(name), v.data(), v.rows(), 1};
}

struct GruCell {
  Matrix w_z, w_r, w_h;  // hidden x input
  Matrix u_z, u_r, u_h;  // hidden x hidden
  Vector b_z, b_r, b_h;

  GruCell() = default;
  GruCell(Index input_size, Index hidden_size);

  Index input_size() const { return w_z.cols(); }
  Index hidden_size() const { return w_z.rows(); }
  void collect(std::string_view prefix, ParamList& out);
};

// Single-vector GRU update:
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   c = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * c
Vector gru_step(const GruCell& cell, const Vector& x, const Vector& h_prev);

// Column-batched GRU step with the intermediates kept for backprop.
struct GruTrace {
  Matrix x, h_prev, z, r, cand, h;
};

void gru_forward(const GruCell& cell, const Matrix& x, const Matrix& h_prev, GruTrace& trace);

// Accumulates weight gradients into `grad`; writes input and previous-state
// gradients.
void gru_backward(const GruCell& cell, const GruTrace& trace, const Matrix& dh, GruCell& grad,
                  Matrix& dx, Matrix& dh_prev);

struct OutputLayer {
  Matrix weight;  // outputs x context
  Vector bias;

  OutputLayer() = default;
  OutputLayer(Index outputs, Index context) : weight(Matrix::Zero(outputs, context)),
                                              bias(Vector::Zero(outputs)) {}
  Vector logits(const Vector& context) const { return weight * context + bias; }
  void collect(std::string_view prefix, ParamList& out);
};

// tanh(W x + b).
struct FeedForward {
  Matrix weight;
  Vector bias;

  FeedForward() = default;
  FeedForward(Index outputs, Index inputs) : weight(Matrix::Zero(outputs, inputs)),
                                             bias(Vector::Zero(outputs)) {}
  Vector apply(const Vector& x) const { return (weight * x + bias).array().tanh().matrix(); }
  void collect(std::string_view prefix, ParamList& out);
};

Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);
// Column-wise softmax, in place.
void softmax_columns(Matrix& logits);

struct LossGrad {
  double loss = 0.0;
  Vector dlogits;
};

// loss = -log dist[target], dlogits = dist - onehot(target).
LossGrad cross_entropy_grad(const Vector& dist, std::size_t target);

double global_norm(const ParamList& tensors);
bool all_finite(const ParamList& tensors);
void set_zero(const ParamList& tensors);

// p <- p - lr * g, with g rescaled so that its global norm is at most `clip`
// (clip <= 0 disables clipping). Returns the pre-clipping norm.
double sgd_step(const ParamList& params, const ParamList& grads, double lr, double clip);

void init_uniform(const ParamList& params, std::mt19937_64& rng, double scale);

}  // namespace surnn
