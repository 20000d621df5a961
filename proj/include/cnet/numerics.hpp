#pragma once

// Dense linear algebra, activations, losses and their derivatives.
//
// Everything here is a pure function over value inputs. Real values are
// 64-bit throughout; matrices are row-major.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cnet {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  // Appends a row; the first append on an empty 0x0 matrix fixes the width.
  void append_row(std::span<const double> values);

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation { relu, sigmoid, tanh, identity };
enum class Loss { binary_cross_entropy, mean_squared_error };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Loss l) noexcept;
Activation parse_activation(std::string_view name);
Loss parse_loss(std::string_view name);

// Probability clamp applied before taking logarithms in the cross-entropy.
inline constexpr double kBceEpsilon = 1e-7;

// W·x + b. Throws DimensionError naming both shapes on mismatch.
Vector affine_forward(const Matrix& w, std::span<const double> b, std::span<const double> x);

double activate(Activation a, double z) noexcept;
// d act / dz expressed through the pre-activation z and the output value.
double activation_derivative(Activation a, double z, double out) noexcept;

Vector activation_forward(Activation a, std::span<const double> z);

// Mean loss over samples. Predictions are clamped to [eps, 1-eps] for BCE.
double loss_value(Loss l, std::span<const double> y_pred, std::span<const double> y_true);

// Per-sample derivative of the (un-averaged) loss with respect to the prediction.
double loss_derivative(Loss l, double y_pred, double y_true) noexcept;

// Derivative of the per-sample loss with respect to the output pre-activation.
// Uses the p - y simplification for sigmoid + BCE; otherwise chains through
// activation_derivative.
double output_delta(Loss l, Activation out, double z, double y_pred, double y_true) noexcept;

// Record of one dense layer evaluation kept for the backward pass.
struct DenseTrace {
  Vector input;
  Vector pre;
  Vector out;

  bool empty() const noexcept { return input.empty() && pre.empty(); }
};

struct DenseGradient {
  Matrix dw;
  Vector db;
  Vector dx;
};

DenseTrace dense_forward(const Matrix& w, std::span<const double> b, Activation a,
                         std::span<const double> x);

// Gradients of the loss w.r.t. weights, biases and inputs given dL/d(out).
DenseGradient backward(const Matrix& w, Activation a, const DenseTrace& trace,
                       std::span<const double> upstream);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(θ + h e_i) - f(θ - h e_i)) / 2h.
Vector finite_difference_gradient(const ScalarFunction& f, std::span<const double> theta,
                                  double h = 1e-5);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace cnet
