#include "cnet/traincore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "cnet/error.hpp"

namespace cnet {

std::string_view to_string(Criterion c) noexcept {
  return c == Criterion::train_loss ? "train_loss" : "validation_accuracy";
}

std::string_view to_string(Optimizer o) noexcept { return o == Optimizer::sgd ? "sgd" : "adam"; }

std::string_view to_string(StopReason s) noexcept {
  return s == StopReason::patience ? "patience" : "max_epochs";
}

Criterion parse_criterion(std::string_view name) {
  if (name == "train_loss") return Criterion::train_loss;
  if (name == "validation_accuracy") return Criterion::validation_accuracy;
  throw InputError("unknown criterion '" + std::string(name) + "'");
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw InputError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InputError("learning_rate must be positive");
  }
  if (batch_size < 1) throw InputError("batch_size must be at least 1");
  if (patience < 1) throw InputError("patience must be at least 1");
  if (!(threshold >= 0.0)) throw InputError("threshold must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw InputError("momentum must lie in [0, 1)");
}

bool converged(double previous_metric, double current_metric, double threshold,
               Criterion criterion) noexcept {
  const double gain = criterion == Criterion::train_loss ? previous_metric - current_metric
                                                         : current_metric - previous_metric;
  return gain >= threshold;
}

bool improves(double candidate, double best, Criterion criterion) noexcept {
  return criterion == Criterion::train_loss ? candidate < best : candidate > best;
}

namespace {

// A network flattened for repeated evaluation. Blocks whose value cannot
// change during training (no trainable block upstream, including
// themselves) are "constant"; the constant blocks read by anything
// non-constant form the frontier, whose activations are cached per row.
class Program {
 public:
  Program(const NetworkGraph& net, bool all_parameters) : net_(net) {
    const auto& blocks = net.blocks();
    const std::size_t nb = blocks.size();
    info_.resize(nb);
    if (!net.has_output()) throw ContractError("network has no output unit");
    const auto& out = net.output();

    for (std::size_t i = 0; i < nb; ++i) {
      auto& bi = info_[i];
      bi.trainable = all_parameters || blocks[i].trainable;
      bi.needs_grad = bi.trainable;
      for (const auto& s : blocks[i].sources) {
        if (const auto* in = std::get_if<InputSource>(&s)) {
          bi.segments.push_back({-1, &in->features});
        } else {
          const auto j = net.block_index(std::get<BlockSource>(s).id);
          bi.segments.push_back({static_cast<long>(j), nullptr});
          bi.needs_grad = bi.needs_grad || info_[j].needs_grad;
        }
      }
    }
    for (BlockId id : out.sources) out_blocks_.push_back(net.block_index(id));
    out_trainable_ = all_parameters || out.trainable;

    // Reachability from the output unit.
    for (std::size_t j : out_blocks_) info_[j].reachable = true;
    for (std::size_t i = nb; i-- > 0;) {
      if (!info_[i].reachable) continue;
      for (const auto& seg : info_[i].segments) {
        if (seg.block >= 0) info_[seg.block].reachable = true;
      }
    }
    // Frontier: constant blocks consumed by a non-constant block or the output.
    auto mark = [&](std::size_t j) {
      if (!info_[j].needs_grad && info_[j].cache_slot < 0) {
        info_[j].cache_slot = static_cast<long>(frontier_.size());
        frontier_.push_back(j);
      }
    };
    for (std::size_t i = 0; i < nb; ++i) {
      if (!info_[i].reachable || !info_[i].needs_grad) continue;
      for (const auto& seg : info_[i].segments) {
        if (seg.block >= 0) mark(static_cast<std::size_t>(seg.block));
      }
    }
    for (std::size_t j : out_blocks_) mark(j);

    // Parameter offsets in NetworkGraph::parameters() order.
    std::size_t off = 0;
    for (std::size_t i = 0; i < nb; ++i) {
      info_[i].w_offset = off;
      off += blocks[i].weights.size();
      info_[i].b_offset = off;
      off += blocks[i].bias.size();
    }
    out_w_offset_ = off;
    off += out.weights.size();
    out_b_offset_ = off;
    param_count_ = off + 1;

    acts_.resize(nb);
    pre_.resize(nb);
    ins_.resize(nb);
    dacts_.resize(nb);
    for (std::size_t i = 0; i < nb; ++i) {
      acts_[i].assign(blocks[i].n_units(), 0.0);
      pre_[i].assign(blocks[i].n_units(), 0.0);
      dacts_[i].assign(blocks[i].n_units(), 0.0);
      ins_[i].reserve(blocks[i].weights.cols());
    }
    for (std::size_t j : out_blocks_) out_width_ += blocks[j].n_units();
    out_in_.resize(out_width_);
  }

  std::size_t parameter_count() const noexcept { return param_count_; }
  bool any_trainable() const noexcept {
    return out_trainable_ ||
           std::any_of(info_.begin(), info_.end(), [](const auto& b) { return b.trainable; });
  }

  // Frontier activations for every row, concatenated in frontier order.
  Matrix build_cache(const Dataset& data) const {
    std::size_t width = 0;
    for (std::size_t j : frontier_) width += net_.blocks()[j].n_units();
    Matrix cache(data.rows(), width);
    if (frontier_.empty()) return cache;
    const auto& blocks = net_.blocks();
    std::vector<Vector> acts(blocks.size());
    Vector in;
    for (std::size_t r = 0; r < data.rows(); ++r) {
      auto x = data.row(r);
      auto dst = cache.row(r);
      std::size_t k = 0;
      // Constant blocks only ever read constant blocks, so a plain ordered
      // pass up to the last frontier block suffices.
      for (std::size_t i = 0; i <= frontier_max(); ++i) {
        if (info_[i].needs_grad) continue;
        in.clear();
        for (const auto& seg : info_[i].segments) {
          if (seg.block < 0) {
            for (std::size_t f : *seg.features) in.push_back(x[f]);
          } else {
            const auto& a = acts[seg.block];
            in.insert(in.end(), a.begin(), a.end());
          }
        }
        acts[i] = activation_forward(blocks[i].activation,
                                     affine_forward(blocks[i].weights, blocks[i].bias, in));
      }
      for (std::size_t j : frontier_) {
        for (double v : acts[j]) dst[k++] = v;
      }
    }
    return cache;
  }

  // Forward pass for one row; returns the prediction and leaves the trace
  // in the workspace.
  double forward(std::span<const double> x, std::span<const double> cache_row) {
    const auto& blocks = net_.blocks();
    load_cache(cache_row);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& bi = info_[i];
      if (!bi.reachable || !bi.needs_grad) continue;
      auto& in = ins_[i];
      in.clear();
      for (const auto& seg : bi.segments) {
        if (seg.block < 0) {
          for (std::size_t f : *seg.features) in.push_back(x[f]);
        } else {
          const auto& a = acts_[seg.block];
          in.insert(in.end(), a.begin(), a.end());
        }
      }
      const auto& w = blocks[i].weights;
      const auto& b = blocks[i].bias;
      for (std::size_t r = 0; r < w.rows(); ++r) {
        auto wr = w.row(r);
        double z = b[r];
        for (std::size_t c = 0; c < wr.size(); ++c) z += wr[c] * in[c];
        pre_[i][r] = z;
        acts_[i][r] = activate(blocks[i].activation, z);
      }
    }
    const auto& out = net_.output();
    std::size_t k = 0;
    for (std::size_t j : out_blocks_) {
      for (double v : acts_[j]) out_in_[k++] = v;
    }
    double z = out.bias;
    for (std::size_t c = 0; c < out_width_; ++c) z += out.weights[c] * out_in_[c];
    out_pre_ = z;
    out_pred_ = activate(out.activation, z);
    return out_pred_;
  }

  // Accumulates d(loss)/d(param) * scale for the last forward pass into grad.
  void backward(double label, Loss loss, double scale, Vector& grad) {
    const auto& blocks = net_.blocks();
    const auto& out = net_.output();
    const double delta = output_delta(loss, out.activation, out_pre_, out_pred_, label) * scale;
    if (delta == 0.0) return;
    if (out_trainable_) {
      for (std::size_t c = 0; c < out_width_; ++c) grad[out_w_offset_ + c] += delta * out_in_[c];
      grad[out_b_offset_] += delta;
    }
    std::size_t k = 0;
    for (std::size_t j : out_blocks_) {
      const std::size_t n = blocks[j].n_units();
      if (info_[j].needs_grad) {
        for (std::size_t u = 0; u < n; ++u) dacts_[j][u] += delta * out.weights[k + u];
      }
      k += n;
    }
    for (std::size_t i = blocks.size(); i-- > 0;) {
      const auto& bi = info_[i];
      if (!bi.reachable || !bi.needs_grad) continue;
      const auto& w = blocks[i].weights;
      auto& da = dacts_[i];
      const auto& in = ins_[i];
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const double d = da[r] * activation_derivative(blocks[i].activation, pre_[i][r], acts_[i][r]);
        da[r] = 0.0;
        if (d == 0.0) continue;
        if (bi.trainable) {
          double* gw = grad.data() + bi.w_offset + r * w.cols();
          for (std::size_t c = 0; c < w.cols(); ++c) gw[c] += d * in[c];
          grad[bi.b_offset + r] += d;
        }
        auto wr = w.row(r);
        std::size_t c = 0;
        for (const auto& seg : bi.segments) {
          if (seg.block < 0) {
            c += seg.features->size();
            continue;
          }
          auto& dsrc = dacts_[seg.block];
          const bool wants = info_[seg.block].needs_grad;
          for (std::size_t u = 0; u < dsrc.size(); ++u, ++c) {
            if (wants) dsrc[u] += d * wr[c];
          }
        }
      }
    }
  }

  // Visits (offset, parameter) pairs for parameters that train() may change.
  template <typename F>
  void for_each_trainable(NetworkGraph& net, F&& f) const {
    auto& blocks = net.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (!info_[i].trainable || !info_[i].reachable) continue;
      auto w = blocks[i].weights.data();
      for (std::size_t c = 0; c < w.size(); ++c) f(info_[i].w_offset + c, w[c]);
      auto& b = blocks[i].bias;
      for (std::size_t c = 0; c < b.size(); ++c) f(info_[i].b_offset + c, b[c]);
    }
    if (out_trainable_) {
      auto& out = net.output();
      for (std::size_t c = 0; c < out.weights.size(); ++c) f(out_w_offset_ + c, out.weights[c]);
      f(out_b_offset_, out.bias);
    }
  }

  template <typename F>
  void for_each_trainable_offset(F&& f) const {
    const auto& blocks = net_.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (!info_[i].trainable || !info_[i].reachable) continue;
      for (std::size_t c = 0; c < blocks[i].parameter_count(); ++c) f(info_[i].w_offset + c);
    }
    if (out_trainable_) {
      for (std::size_t c = 0; c <= out_width_; ++c) f(out_w_offset_ + c);
    }
  }

 private:
  struct Segment {
    long block;                                  // -1 for input features
    const std::vector<std::size_t>* features;    // when block < 0
  };
  struct BlockInfo {
    std::vector<Segment> segments;
    bool trainable = false;
    bool needs_grad = false;
    bool reachable = false;
    long cache_slot = -1;
    std::size_t w_offset = 0;
    std::size_t b_offset = 0;
  };

  std::size_t frontier_max() const noexcept {
    return frontier_.empty() ? 0 : *std::max_element(frontier_.begin(), frontier_.end());
  }

  void load_cache(std::span<const double> cache_row) {
    std::size_t k = 0;
    for (std::size_t j : frontier_) {
      for (double& v : acts_[j]) v = cache_row[k++];
    }
  }

  const NetworkGraph& net_;
  std::vector<BlockInfo> info_;
  std::vector<std::size_t> out_blocks_;
  std::vector<std::size_t> frontier_;
  bool out_trainable_ = false;
  std::size_t out_width_ = 0;
  std::size_t out_w_offset_ = 0;
  std::size_t out_b_offset_ = 0;
  std::size_t param_count_ = 0;

  std::vector<Vector> acts_, pre_, ins_, dacts_;
  Vector out_in_;
  double out_pre_ = 0.0;
  double out_pred_ = 0.0;
};

void check_width(const NetworkGraph& net, const Dataset& data, const char* what) {
  if (data.cols() != net.input_width()) {
    throw DimensionError(std::string(what) + " has " + std::to_string(data.cols()) +
                         " features but the network expects " + std::to_string(net.input_width()));
  }
}

Vector predict_with(Program& prog, const Dataset& data, const Matrix& cache) {
  Vector preds(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    preds[r] = prog.forward(data.row(r), cache.cols() ? cache.row(r) : std::span<const double>{});
  }
  return preds;
}

double accuracy_of(std::span<const double> preds, const std::vector<int>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    correct += static_cast<std::size_t>((preds[i] >= 0.5 ? 1 : 0) == labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double metric_with(Program& prog, const Dataset& data, const Matrix& cache, const TrainConfig& cfg) {
  const auto preds = predict_with(prog, data, cache);
  if (cfg.criterion == Criterion::train_loss) return loss_value(cfg.loss, preds, data.labels());
  return accuracy_of(preds, data.y);
}

}  // namespace

TrainResult train(NetworkGraph& net, const Dataset& train_data, const Dataset* valid,
                  const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  check_width(net, train_data, "training data");
  if (train_data.empty()) throw DataError("training data is empty");
  const bool use_valid = cfg.criterion == Criterion::validation_accuracy;
  if (use_valid) {
    if (valid == nullptr || valid->empty()) {
      throw InputError("criterion validation_accuracy requires validation data");
    }
    check_width(net, *valid, "validation data");
  }

  Program prog(net, false);
  const Matrix train_cache = prog.build_cache(train_data);
  const Matrix valid_cache = use_valid ? prog.build_cache(*valid) : Matrix{};
  const Dataset& metric_data = use_valid ? *valid : train_data;
  const Matrix& metric_cache = use_valid ? valid_cache : train_cache;

  auto row_cache = [](const Matrix& c, std::size_t r) {
    return c.cols() ? c.row(r) : std::span<const double>{};
  };

  TrainResult result;
  result.initial_metric = metric_with(prog, metric_data, metric_cache, cfg);
  result.final_metric = result.initial_metric;

  const std::size_t n = train_data.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);

  Vector grad(prog.parameter_count(), 0.0);
  Vector m1(prog.parameter_count(), 0.0);
  Vector m2(prog.parameter_count(), 0.0);
  std::vector<std::size_t> active;
  prog.for_each_trainable_offset([&](std::size_t off) { active.push_back(off); });
  std::size_t step = 0;

  std::optional<double> best;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    if (!active.empty()) {
      for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
        const std::size_t end = std::min(n, begin + cfg.batch_size);
        const double scale = 1.0 / static_cast<double>(end - begin);
        for (std::size_t off : active) grad[off] = 0.0;
        for (std::size_t k = begin; k < end; ++k) {
          const std::size_t r = order[k];
          prog.forward(train_data.row(r), row_cache(train_cache, r));
          prog.backward(static_cast<double>(train_data.y[r]), cfg.loss, scale, grad);
        }
        ++step;
        if (cfg.optimizer == Optimizer::adam) {
          const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
          prog.for_each_trainable(net, [&](std::size_t off, double& p) {
            const double g = grad[off];
            m1[off] = cfg.adam_beta1 * m1[off] + (1.0 - cfg.adam_beta1) * g;
            m2[off] = cfg.adam_beta2 * m2[off] + (1.0 - cfg.adam_beta2) * g * g;
            p -= cfg.learning_rate * (m1[off] / c1) / (std::sqrt(m2[off] / c2) + cfg.adam_epsilon);
          });
        } else {
          prog.for_each_trainable(net, [&](std::size_t off, double& p) {
            m1[off] = cfg.momentum * m1[off] - cfg.learning_rate * grad[off];
            p += m1[off];
          });
        }
      }
    }
    const double metric = metric_with(prog, metric_data, metric_cache, cfg);
    if (!std::isfinite(metric)) throw ContractError("training diverged: non-finite metric");
    result.metric_history.push_back(metric);
    result.epochs_run = epoch;
    result.final_metric = metric;
    if (!best || improves(metric, *best, cfg.criterion)) {
      best = metric;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.stopped_by = StopReason::patience;
      break;
    }
  }
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Vector predict(const NetworkGraph& net, const Dataset& data) {
  check_width(net, data, "dataset");
  Program prog(net, true);
  return predict_with(prog, data, Matrix{});
}

Matrix transform(const NetworkGraph& net, const Dataset& data) {
  check_width(net, data, "dataset");
  Matrix out(data.rows(), net.feature_width());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto f = net.features(data.row(r));
    std::copy(f.begin(), f.end(), out.row(r).begin());
  }
  return out;
}

double evaluate(const NetworkGraph& net, const Dataset& data, EvalMetric metric, Loss loss) {
  if (data.empty()) throw DataError("cannot evaluate on an empty dataset");
  const auto preds = predict(net, data);
  if (metric == EvalMetric::loss) return loss_value(loss, preds, data.labels());
  return accuracy_of(preds, data.y);
}

double criterion_metric(const NetworkGraph& net, const Dataset& train_data, const Dataset* valid,
                        const TrainConfig& cfg) {
  if (cfg.criterion == Criterion::validation_accuracy) {
    if (valid == nullptr) throw InputError("criterion validation_accuracy requires validation data");
    return evaluate(net, *valid, EvalMetric::accuracy);
  }
  return evaluate(net, train_data, EvalMetric::loss, cfg.loss);
}

double dataset_loss(const NetworkGraph& net, const Dataset& data, Loss loss) {
  return evaluate(net, data, EvalMetric::loss, loss);
}

Vector parameter_gradient(const NetworkGraph& net, const Dataset& data, Loss loss) {
  check_width(net, data, "dataset");
  if (data.empty()) throw DataError("cannot differentiate over an empty dataset");
  Program prog(net, true);
  Vector grad(prog.parameter_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    prog.forward(data.row(r), {});
    prog.backward(static_cast<double>(data.y[r]), loss, scale, grad);
  }
  return grad;
}

}  // namespace cnet
