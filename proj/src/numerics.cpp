#include "cnet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cnet/error.hpp"

namespace cnet {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = values.size();
  } else if (values.size() != cols_) {
    throw DimensionError("cannot append row of width " + std::to_string(values.size()) +
                         " to matrix " + shape_string());
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << '[' << rows_ << " x " << cols_ << ']';
  return os.str();
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

std::string_view to_string(Loss l) noexcept {
  switch (l) {
    case Loss::binary_cross_entropy: return "binary_cross_entropy";
    case Loss::mean_squared_error: return "mean_squared_error";
  }
  return "mean_squared_error";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::sigmoid, Activation::tanh, Activation::identity}) {
    if (to_string(a) == name) return a;
  }
  throw InputError("unknown activation '" + std::string(name) + "'");
}

Loss parse_loss(std::string_view name) {
  if (name == "bce" || name == to_string(Loss::binary_cross_entropy)) {
    return Loss::binary_cross_entropy;
  }
  if (name == "mse" || name == to_string(Loss::mean_squared_error)) {
    return Loss::mean_squared_error;
  }
  throw InputError("unknown loss '" + std::string(name) + "'");
}

Vector affine_forward(const Matrix& w, std::span<const double> b, std::span<const double> x) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw DimensionError("affine_forward: weights " + w.shape_string() + " incompatible with bias [" +
                         std::to_string(b.size()) + "] and input [" + std::to_string(x.size()) +
                         "]");
  }
  Vector out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto wr = w.row(r);
    double acc = b[r];
    for (std::size_t c = 0; c < wr.size(); ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
  return out;
}

double activate(Activation a, double z) noexcept {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid:
      // Branch on sign so exp never overflows.
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      else {
        const double e = std::exp(z);
        return e / (1.0 + e);
      }
    case Activation::tanh: return std::tanh(z);
    case Activation::identity: return z;
  }
  return z;
}

double activation_derivative(Activation a, double z, double out) noexcept {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
    case Activation::tanh: return 1.0 - out * out;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

Vector activation_forward(Activation a, std::span<const double> z) {
  Vector out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [a](double v) { return activate(a, v); });
  return out;
}

namespace {

double clamp_probability(double p) noexcept {
  return std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
}

void check_lengths(std::span<const double> y_pred, std::span<const double> y_true) {
  if (y_pred.size() != y_true.size()) {
    throw DimensionError("loss: prediction length " + std::to_string(y_pred.size()) +
                         " != target length " + std::to_string(y_true.size()));
  }
}

}  // namespace

double loss_value(Loss l, std::span<const double> y_pred, std::span<const double> y_true) {
  check_lengths(y_pred, y_true);
  if (y_pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y_pred.size(); ++i) {
    if (l == Loss::mean_squared_error) {
      const double d = y_pred[i] - y_true[i];
      total += d * d;
    } else {
      const double p = clamp_probability(y_pred[i]);
      const double y = y_true[i];
      total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
  }
  return std::max(0.0, total / static_cast<double>(y_pred.size()));
}

double loss_derivative(Loss l, double y_pred, double y_true) noexcept {
  if (l == Loss::mean_squared_error) return 2.0 * (y_pred - y_true);
  if (y_pred <= kBceEpsilon || y_pred >= 1.0 - kBceEpsilon) return 0.0;  // clamp is flat
  return -(y_true / y_pred) + (1.0 - y_true) / (1.0 - y_pred);
}

double output_delta(Loss l, Activation out, double z, double y_pred, double y_true) noexcept {
  if (l == Loss::binary_cross_entropy && out == Activation::sigmoid) {
    const double p = y_pred;
    if (p <= kBceEpsilon || p >= 1.0 - kBceEpsilon) return 0.0;
    return p - y_true;
  }
  return loss_derivative(l, y_pred, y_true) * activation_derivative(out, z, y_pred);
}

DenseTrace dense_forward(const Matrix& w, std::span<const double> b, Activation a,
                         std::span<const double> x) {
  DenseTrace t;
  t.input.assign(x.begin(), x.end());
  t.pre = affine_forward(w, b, x);
  t.out = activation_forward(a, t.pre);
  return t;
}

DenseGradient backward(const Matrix& w, Activation a, const DenseTrace& trace,
                       std::span<const double> upstream) {
  if (trace.empty()) throw InputError("backward: missing forward trace");
  if (trace.pre.size() != w.rows() || trace.input.size() != w.cols() ||
      upstream.size() != w.rows()) {
    throw DimensionError("backward: weights " + w.shape_string() + " incompatible with trace (in " +
                         std::to_string(trace.input.size()) + ", out " +
                         std::to_string(trace.pre.size()) + ") and upstream [" +
                         std::to_string(upstream.size()) + "]");
  }
  DenseGradient g{Matrix(w.rows(), w.cols()), Vector(w.rows()), Vector(w.cols(), 0.0)};
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double delta = upstream[r] * activation_derivative(a, trace.pre[r], trace.out[r]);
    g.db[r] = delta;
    auto wr = w.row(r);
    auto dwr = g.dw.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) {
      dwr[c] = delta * trace.input[c];
      g.dx[c] += delta * wr[c];
    }
  }
  return g;
}

Vector finite_difference_gradient(const ScalarFunction& f, std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw InputError("finite_difference_gradient: step must be positive");
  Vector probe(theta.begin(), theta.end());
  Vector grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace cnet
