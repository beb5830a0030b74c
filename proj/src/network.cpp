#include "pfair/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfair/error.hpp"
#include "pfair/kernels.hpp"

namespace pfair {

namespace {

double selu(double y) { return y > 0.0 ? kSeluLambda * y : kSeluLambda * kSeluAlpha * std::expm1(y); }

double selu_grad(double y) { return y > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(y); }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t head_offset_check(const std::vector<Head>& heads) {
  std::size_t total = 0;
  for (const auto& h : heads) {
    if (h.width == 0) throw Error(ErrorCode::invalid_argument, "output head of width 0");
    if (h.loss != HeadLoss::softmax && h.width != 1)
      throw Error(ErrorCode::invalid_argument, "squared and sigmoid heads are one unit wide");
    total += h.width;
  }
  return total;
}

DenseLayer make_layer(std::size_t in, std::size_t out, bool normalized, std::mt19937_64& rng) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.weight.resize(in * out);
  layer.bias.assign(out, 0.0);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1))));
  for (auto& w : layer.weight) w = normal(rng);
  layer.normalized = normalized;
  if (normalized) {
    layer.gamma.assign(out, 1.0);
    layer.beta.assign(out, 0.0);
    layer.running_mean.assign(out, 0.0);
    layer.running_var.assign(out, 1.0);
  }
  return layer;
}

// Row loss and, when grad is non-empty, d(loss)/d(raw output) scaled by
// grad_scale.
double head_loss(const std::vector<Head>& heads, std::span<const double> raw, std::span<const double> target,
                 std::span<double> grad, double grad_scale) {
  double loss = 0.0;
  std::size_t off = 0;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const Head& head = heads[h];
    const double t = target[h];
    switch (head.loss) {
      case HeadLoss::squared: {
        const double e = raw[off] - t;
        loss += e * e;
        if (!grad.empty()) grad[off] = 2.0 * e * grad_scale;
        break;
      }
      case HeadLoss::sigmoid: {
        const double o = raw[off];
        loss += softplus(o) - t * o;
        if (!grad.empty()) grad[off] = (sigmoid(o) - t) * grad_scale;
        break;
      }
      case HeadLoss::softmax: {
        const auto cls = static_cast<std::size_t>(t);
        double mx = raw[off];
        for (std::size_t k = 1; k < head.width; ++k) mx = std::max(mx, raw[off + k]);
        double sum = 0.0;
        for (std::size_t k = 0; k < head.width; ++k) sum += std::exp(raw[off + k] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - raw[off + cls];
        if (!grad.empty()) {
          for (std::size_t k = 0; k < head.width; ++k) {
            const double p = std::exp(raw[off + k] - lse);
            grad[off + k] = (p - (k == cls ? 1.0 : 0.0)) * grad_scale;
          }
        }
        break;
      }
    }
    off += head.width;
  }
  return loss;
}

// Flat view over every trainable array, used by Adam.
std::vector<std::vector<double>*> trainable(std::vector<DenseLayer>& layers) {
  std::vector<std::vector<double>*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (l.normalized) {
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  }
  return out;
}

}  // namespace

Network::Network(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths, std::vector<Head> heads,
                 std::mt19937_64& rng)
    : heads_(std::move(heads)) {
  const std::size_t out_dim = head_offset_check(heads_);
  std::size_t in = input_dim;
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw Error(ErrorCode::invalid_argument, "hidden layer of width 0");
    layers_.push_back(make_layer(in, w, true, rng));
    in = w;
  }
  layers_.push_back(make_layer(in, out_dim, false, rng));
}

Network::Network(std::vector<DenseLayer> layers, std::vector<Head> heads)
    : layers_(std::move(layers)), heads_(std::move(heads)) {
  if (layers_.empty()) throw Error(ErrorCode::invalid_argument, "network without layers");
  const std::size_t out_dim = head_offset_check(heads_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    bool ok = l.weight.size() == l.in * l.out && l.bias.size() == l.out;
    if (l.normalized) {
      ok = ok && l.gamma.size() == l.out && l.beta.size() == l.out && l.running_mean.size() == l.out &&
           l.running_var.size() == l.out;
    }
    if (i > 0) ok = ok && layers_[i - 1].out == l.in;
    if (!ok) throw Error(ErrorCode::length_mismatch, "layer " + std::to_string(i) + " has inconsistent shapes");
  }
  if (layers_.back().normalized || layers_.back().out != out_dim)
    throw Error(ErrorCode::length_mismatch, "output layer does not match the heads");
}

std::size_t Network::max_width() const noexcept {
  std::size_t w = 0;
  for (const auto& l : layers_) w = std::max({w, l.in, l.out});
  return w;
}

void Network::forward(std::span<const double> x, std::span<double> out, std::span<double> scratch) const {
  if (x.size() != input_dim()) throw Error(ErrorCode::arity_mismatch, "network input width mismatch");
  if (out.size() != output_dim()) throw Error(ErrorCode::length_mismatch, "network output width mismatch");
  const std::size_t mw = max_width();
  if (scratch.size() < 2 * mw) throw Error(ErrorCode::length_mismatch, "scratch too small");
  std::span<double> a = scratch.subspan(0, mw);
  std::span<double> b = scratch.subspan(mw, mw);
  std::span<const double> cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    std::span<double> dst = (i + 1 == layers_.size()) ? out : b.subspan(0, l.out);
    kernels::gemv(l.weight, l.out, l.in, cur, l.bias, dst);
    if (l.normalized) {
      for (std::size_t j = 0; j < l.out; ++j) {
        const double xhat = (dst[j] - l.running_mean[j]) / std::sqrt(l.running_var[j] + kBatchNormEps);
        dst[j] = selu(l.gamma[j] * xhat + l.beta[j]);
      }
    }
    std::swap(a, b);
    cur = a.subspan(0, l.out);
  }
}

std::vector<double> Network::forward(std::span<const double> x) const {
  std::vector<double> out(output_dim());
  std::vector<double> scratch(2 * max_width());
  forward(x, out, scratch);
  return out;
}

void Network::activate(std::span<double> raw) const {
  std::size_t off = 0;
  for (const Head& h : heads_) {
    if (h.loss == HeadLoss::sigmoid) {
      raw[off] = sigmoid(raw[off]);
    } else if (h.loss == HeadLoss::softmax) {
      double mx = raw[off];
      for (std::size_t k = 1; k < h.width; ++k) mx = std::max(mx, raw[off + k]);
      double sum = 0.0;
      for (std::size_t k = 0; k < h.width; ++k) sum += (raw[off + k] = std::exp(raw[off + k] - mx));
      for (std::size_t k = 0; k < h.width; ++k) raw[off + k] /= sum;
    }
    off += h.width;
  }
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size() + (l.normalized ? 2 * l.out : 0);
  return n;
}

std::size_t Network::mac_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + (l.normalized ? 2 * l.out : 0);
  return n;
}

std::vector<double> Network::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers_) {
    for (const auto* v : {&l.weight, &l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var})
      out.insert(out.end(), v->begin(), v->end());
  }
  return out;
}

double evaluate_loss(const Network& net, std::span<const double> inputs, std::span<const double> targets,
                     std::size_t rows) {
  if (rows == 0) return 0.0;
  const std::size_t d = net.input_dim(), h = net.heads().size();
  std::vector<double> out(net.output_dim()), scratch(2 * net.max_width());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    net.forward(inputs.subspan(r * d, d), out, scratch);
    total += head_loss(net.heads(), out, targets.subspan(r * h, h), {}, 0.0);
  }
  return total / static_cast<double>(rows);
}

TrainReport train(Network& net, std::span<const double> inputs, std::span<const double> targets,
                  std::size_t rows, const TrainOptions& options, std::mt19937_64& rng) {
  const std::size_t d = net.input_dim(), nh = net.heads().size();
  if (inputs.size() != rows * d || targets.size() != rows * nh)
    throw Error(ErrorCode::length_mismatch, "training inputs/targets do not match the row count");
  if (options.batch_size == 0 || !(options.learning_rate > 0.0))
    throw Error(ErrorCode::invalid_argument, "batch size and learning rate must be positive");

  auto& layers = net.mutable_layers();
  const bool has_norm = std::any_of(layers.begin(), layers.end(), [](const DenseLayer& l) { return l.normalized; });
  const std::size_t nl = layers.size();

  TrainReport report;
  report.initial_loss = evaluate_loss(net, inputs, targets, rows);
  if (!std::isfinite(report.initial_loss)) throw Error(ErrorCode::non_finite_loss, "initial loss is not finite");
  report.final_loss = report.initial_loss;
  std::vector<DenseLayer> best = layers;

  auto params = trainable(layers);
  std::vector<std::vector<double>> grads(params.size()), m1(params.size()), m2(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads[i].assign(params[i]->size(), 0.0);
    m1[i].assign(params[i]->size(), 0.0);
    m2[i].assign(params[i]->size(), 0.0);
  }

  const std::size_t cap = std::min(options.batch_size, rows);
  // Per layer activations: acts[0] is the input batch, acts[i+1] the output of
  // layer i. pre holds the pre-activation (post batch-norm) for SELU layers.
  std::vector<std::vector<double>> acts(nl + 1), pre(nl), xhat(nl), inv_std(nl), delta(nl);
  acts[0].resize(cap * d);
  for (std::size_t i = 0; i < nl; ++i) {
    acts[i + 1].resize(cap * layers[i].out);
    pre[i].resize(cap * layers[i].out);
    xhat[i].resize(cap * layers[i].out);
    inv_std[i].resize(layers[i].out);
    delta[i].resize(cap * layers[i].out);
  }
  std::vector<double> back(cap * net.max_width());

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < rows; start += cap) {
      const std::size_t bsz = std::min(cap, rows - start);
      if (bsz == 1 && has_norm) continue;  // batch statistics need two rows
      const double inv_b = 1.0 / static_cast<double>(bsz);

      for (std::size_t r = 0; r < bsz; ++r) {
        const std::size_t src = order[start + r];
        std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(src * d), d, acts[0].begin() + static_cast<std::ptrdiff_t>(r * d));
      }

      for (std::size_t i = 0; i < nl; ++i) {
        DenseLayer& l = layers[i];
        const std::size_t in = l.in, out = l.out;
        double* z = acts[i + 1].data();
        for (std::size_t r = 0; r < bsz; ++r) {
          kernels::gemv(l.weight, out, in, std::span<const double>(acts[i].data() + r * in, in), l.bias,
                        std::span<double>(z + r * out, out));
        }
        if (!l.normalized) continue;
        for (std::size_t j = 0; j < out; ++j) {
          double mean = 0.0;
          for (std::size_t r = 0; r < bsz; ++r) mean += z[r * out + j];
          mean *= inv_b;
          double var = 0.0;
          for (std::size_t r = 0; r < bsz; ++r) {
            const double c = z[r * out + j] - mean;
            var += c * c;
          }
          var *= inv_b;
          const double is = 1.0 / std::sqrt(var + kBatchNormEps);
          inv_std[i][j] = is;
          for (std::size_t r = 0; r < bsz; ++r) {
            const double xh = (z[r * out + j] - mean) * is;
            xhat[i][r * out + j] = xh;
            const double y = l.gamma[j] * xh + l.beta[j];
            pre[i][r * out + j] = y;
            z[r * out + j] = selu(y);
          }
          const double unbiased = var * static_cast<double>(bsz) / static_cast<double>(bsz - 1);
          l.running_mean[j] = (1.0 - kBatchNormMomentum) * l.running_mean[j] + kBatchNormMomentum * mean;
          l.running_var[j] = (1.0 - kBatchNormMomentum) * l.running_var[j] + kBatchNormMomentum * unbiased;
        }
      }

      // Output gradient.
      const std::size_t od = layers.back().out;
      double batch_loss = 0.0;
      for (std::size_t r = 0; r < bsz; ++r) {
        const std::size_t src = order[start + r];
        batch_loss += head_loss(net.heads(), std::span<const double>(acts[nl].data() + r * od, od),
                                targets.subspan(src * nh, nh), std::span<double>(delta[nl - 1].data() + r * od, od),
                                inv_b);
      }
      if (!std::isfinite(batch_loss))
        throw Error(ErrorCode::non_finite_loss, "training diverged in epoch " + std::to_string(epoch));

      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      std::size_t gi = params.size();
      for (std::size_t ii = nl; ii-- > 0;) {
        DenseLayer& l = layers[ii];
        const std::size_t in = l.in, out = l.out;
        double* dz = delta[ii].data();
        if (l.normalized) {
          auto& dgamma = grads[gi - 2];
          auto& dbeta = grads[gi - 1];
          gi -= 2;
          // delta currently holds d/d(activation); fold SELU and batch norm.
          for (std::size_t j = 0; j < out; ++j) {
            double sum_dx = 0.0, sum_dx_xh = 0.0;
            for (std::size_t r = 0; r < bsz; ++r) {
              const std::size_t k = r * out + j;
              const double dy = dz[k] * selu_grad(pre[ii][k]);
              dgamma[j] += dy * xhat[ii][k];
              dbeta[j] += dy;
              const double dxh = dy * l.gamma[j];
              dz[k] = dxh;
              sum_dx += dxh;
              sum_dx_xh += dxh * xhat[ii][k];
            }
            const double scale = inv_std[ii][j] * inv_b;
            for (std::size_t r = 0; r < bsz; ++r) {
              const std::size_t k = r * out + j;
              dz[k] = scale * (static_cast<double>(bsz) * dz[k] - sum_dx - xhat[ii][k] * sum_dx_xh);
            }
          }
        }
        auto& dw = grads[gi - 2];
        auto& db = grads[gi - 1];
        gi -= 2;
        for (std::size_t r = 0; r < bsz; ++r) {
          std::span<const double> a_prev(acts[ii].data() + r * in, in);
          for (std::size_t j = 0; j < out; ++j) {
            const double g = dz[r * out + j];
            if (g == 0.0) continue;
            kernels::axpy(g, a_prev, std::span<double>(dw.data() + j * in, in));
            db[j] += g;
          }
        }
        if (ii == 0) break;
        // Propagate to the previous layer's activations.
        std::fill(back.begin(), back.begin() + static_cast<std::ptrdiff_t>(bsz * in), 0.0);
        for (std::size_t r = 0; r < bsz; ++r) {
          std::span<double> da(back.data() + r * in, in);
          for (std::size_t j = 0; j < out; ++j) {
            const double g = dz[r * out + j];
            if (g != 0.0) kernels::axpy(g, std::span<const double>(l.weight.data() + j * in, in), da);
          }
        }
        std::copy_n(back.begin(), bsz * in, delta[ii - 1].begin());
      }

      ++step;
      const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = *params[p];
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double g = grads[p][k];
          m1[p][k] = options.beta1 * m1[p][k] + (1.0 - options.beta1) * g;
          m2[p][k] = options.beta2 * m2[p][k] + (1.0 - options.beta2) * g * g;
          w[k] -= options.learning_rate * (m1[p][k] / c1) / (std::sqrt(m2[p][k] / c2) + options.adam_eps);
        }
      }
    }

    const double loss = evaluate_loss(net, inputs, targets, rows);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::non_finite_loss, "training diverged in epoch " + std::to_string(epoch));
    report.epoch_losses.push_back(loss);
    if (loss < report.final_loss) {
      report.final_loss = loss;
      report.best_epoch = epoch;
      best = layers;
    }
  }
  layers = std::move(best);
  return report;
}

}  // namespace pfair
