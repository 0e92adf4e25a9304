#include "surnn/nn.hpp"

#include <cmath>

#include "surnn/error.hpp"

namespace surnn {

namespace {

Matrix sigmoid(const Matrix& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

std::string join(std::string_view prefix, std::string_view name) {
  std::string out(prefix);
  out += '.';
  out += name;
  return out;
}

}  // namespace

GruCell::GruCell(Index input_size, Index hidden_size)
    : w_z(Matrix::Zero(hidden_size, input_size)),
      w_r(Matrix::Zero(hidden_size, input_size)),
      w_h(Matrix::Zero(hidden_size, input_size)),
      u_z(Matrix::Zero(hidden_size, hidden_size)),
      u_r(Matrix::Zero(hidden_size, hidden_size)),
      u_h(Matrix::Zero(hidden_size, hidden_size)),
      b_z(Vector::Zero(hidden_size)),
      b_r(Vector::Zero(hidden_size)),
      b_h(Vector::Zero(hidden_size)) {}

void GruCell::collect(std::string_view prefix, ParamList& out) {
  out.push_back(param_ref(join(prefix, "w_z"), w_z));
  out.push_back(param_ref(join(prefix, "w_r"), w_r));
  out.push_back(param_ref(join(prefix, "w_h"), w_h));
  out.push_back(param_ref(join(prefix, "u_z"), u_z));
  out.push_back(param_ref(join(prefix, "u_r"), u_r));
  out.push_back(param_ref(join(prefix, "u_h"), u_h));
  out.push_back(param_ref(join(prefix, "b_z"), b_z));
  out.push_back(param_ref(join(prefix, "b_r"), b_r));
  out.push_back(param_ref(join(prefix, "b_h"), b_h));
}

void OutputLayer::collect(std::string_view prefix, ParamList& out) {
  out.push_back(param_ref(join(prefix, "weight"), weight));
  out.push_back(param_ref(join(prefix, "bias"), bias));
}

void FeedForward::collect(std::string_view prefix, ParamList& out) {
  out.push_back(param_ref(join(prefix, "weight"), weight));
  out.push_back(param_ref(join(prefix, "bias"), bias));
}

Vector gru_step(const GruCell& cell, const Vector& x, const Vector& h_prev) {
  if (x.size() != cell.input_size() || h_prev.size() != cell.hidden_size()) {
    throw UsageError("gru_step: expected input " + std::to_string(cell.input_size()) +
                     " and state " + std::to_string(cell.hidden_size()) + ", got " +
                     std::to_string(x.size()) + " and " + std::to_string(h_prev.size()));
  }
  const Vector z = sigmoid(cell.w_z * x + cell.u_z * h_prev + cell.b_z);
  const Vector r = sigmoid(cell.w_r * x + cell.u_r * h_prev + cell.b_r);
  const Vector rh = r.cwiseProduct(h_prev);
  const Vector cand = (cell.w_h * x + cell.u_h * rh + cell.b_h).array().tanh().matrix();
  return (1.0 - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(cand);
}

void gru_forward(const GruCell& cell, const Matrix& x, const Matrix& h_prev, GruTrace& t) {
  t.x = x;
  t.h_prev = h_prev;
  t.z = sigmoid((cell.w_z * x + cell.u_z * h_prev).colwise() + cell.b_z);
  t.r = sigmoid((cell.w_r * x + cell.u_r * h_prev).colwise() + cell.b_r);
  const Matrix rh = t.r.cwiseProduct(h_prev);
  t.cand = ((cell.w_h * x + cell.u_h * rh).colwise() + cell.b_h).array().tanh().matrix();
  t.h = (1.0 - t.z.array()).matrix().cwiseProduct(h_prev) + t.z.cwiseProduct(t.cand);
}

void gru_backward(const GruCell& cell, const GruTrace& t, const Matrix& dh, GruCell& g,
                  Matrix& dx, Matrix& dh_prev) {
  const Matrix dcand = dh.cwiseProduct(t.z);
  const Matrix dz = dh.cwiseProduct(t.cand - t.h_prev);
  dh_prev = dh - dh.cwiseProduct(t.z);

  const Matrix da_h = dcand.cwiseProduct((1.0 - t.cand.array().square()).matrix());
  const Matrix rh = t.r.cwiseProduct(t.h_prev);
  g.w_h.noalias() += da_h * t.x.transpose();
  g.u_h.noalias() += da_h * rh.transpose();
  g.b_h += da_h.rowwise().sum();
  const Matrix drh = cell.u_h.transpose() * da_h;
  const Matrix dr = drh.cwiseProduct(t.h_prev);
  dh_prev += drh.cwiseProduct(t.r);

  const Matrix da_z = dz.cwiseProduct(t.z.cwiseProduct((1.0 - t.z.array()).matrix()));
  g.w_z.noalias() += da_z * t.x.transpose();
  g.u_z.noalias() += da_z * t.h_prev.transpose();
  g.b_z += da_z.rowwise().sum();
  dh_prev.noalias() += cell.u_z.transpose() * da_z;

  const Matrix da_r = dr.cwiseProduct(t.r.cwiseProduct((1.0 - t.r.array()).matrix()));
  g.w_r.noalias() += da_r * t.x.transpose();
  g.u_r.noalias() += da_r * t.h_prev.transpose();
  g.b_r += da_r.rowwise().sum();
  dh_prev.noalias() += cell.u_r.transpose() * da_r;

  dx = cell.w_z.transpose() * da_z;
  dx.noalias() += cell.w_r.transpose() * da_r;
  dx.noalias() += cell.w_h.transpose() * da_h;
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

void softmax_columns(Matrix& logits) {
  for (Index c = 0; c < logits.cols(); ++c) {
    auto col = logits.col(c);
    const double m = col.maxCoeff();
    col = (col.array() - m).exp().matrix();
    col /= col.sum();
  }
}

LossGrad cross_entropy_grad(const Vector& dist, std::size_t target) {
  if (target >= static_cast<std::size_t>(dist.size())) {
    throw UsageError("cross_entropy_grad: target " + std::to_string(target) +
                     " out of range for distribution of size " + std::to_string(dist.size()));
  }
  LossGrad out;
  const auto t = static_cast<Index>(target);
  out.loss = -std::log(dist(t));
  out.dlogits = dist;
  out.dlogits(t) -= 1.0;
  return out;
}

double global_norm(const ParamList& tensors) {
  double sq = 0.0;
  for (const auto& t : tensors) {
    for (double v : t.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

bool all_finite(const ParamList& tensors) {
  for (const auto& t : tensors) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void set_zero(const ParamList& tensors) {
  for (const auto& t : tensors) {
    for (double& v : t.values()) v = 0.0;
  }
}

double sgd_step(const ParamList& params, const ParamList& grads, double lr, double clip) {
  if (params.size() != grads.size()) {
    throw UsageError("sgd_step: parameter and gradient lists differ in length");
  }
  const double norm = global_norm(grads);
  double scale = lr;
  if (clip > 0.0 && norm > clip) scale *= clip / norm;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw UsageError("sgd_step: shape mismatch for " + params[i].name);
    }
    auto p = params[i].values();
    auto g = grads[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= scale * g[j];
  }
  return norm;
}

void init_uniform(const ParamList& params, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (const auto& t : params) {
    for (double& v : t.values()) v = dist(rng);
  }
}

}  // namespace surnn
