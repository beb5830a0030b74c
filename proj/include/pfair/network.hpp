#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace pfair {

// Fully connected layer, optionally followed by batch normalization and SELU.
// Weights are row-major out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
  bool normalized = false;  // hidden layers: Linear -> BatchNorm -> SELU
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

enum class HeadLoss { squared, sigmoid, softmax };

// One output block. squared and sigmoid heads are one unit wide; softmax
// heads have one unit per class.
struct Head {
  HeadLoss loss = HeadLoss::squared;
  std::size_t width = 1;
};

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

class Network {
 public:
  Network() = default;
  // LeCun-normal weights, zero biases, identity batch normalization.
  Network(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths, std::vector<Head> heads,
          std::mt19937_64& rng);
  // Assembles a network from explicit layers; throws length-mismatch when the
  // shapes do not chain.
  Network(std::vector<DenseLayer> layers, std::vector<Head> heads);

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t max_width() const noexcept;
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
  const std::vector<Head>& heads() const noexcept { return heads_; }

  // Inference mode: batch normalization uses running statistics. Writes raw
  // outputs (values or logits). scratch must hold 2 * max_width() doubles.
  void forward(std::span<const double> x, std::span<double> out, std::span<double> scratch) const;
  std::vector<double> forward(std::span<const double> x) const;

  // Applies the head link functions in place: sigmoid / softmax.
  void activate(std::span<double> raw) const;

  // Weights, biases and batch-normalization scale/shift. Running statistics
  // are not parameters.
  std::size_t parameter_count() const noexcept;
  // One per weight plus one each for batch-normalization scale and shift.
  std::size_t mac_count() const noexcept;

  // Every stored number, running statistics included.
  std::vector<double> flatten() const;

 private:
  std::vector<DenseLayer> layers_;
  std::vector<Head> heads_;
};

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t best_epoch = 0;  // 0 means the initialization was never beaten
  std::vector<double> epoch_losses;
};

// Mean per-row loss over the full set in inference mode. targets is rows x
// heads: the target value for squared heads, 0/1 for sigmoid heads and the
// class index for softmax heads.
double evaluate_loss(const Network& net, std::span<const double> inputs, std::span<const double> targets,
                     std::size_t rows);

// Mini-batch Adam. After every epoch the full-set loss is measured and the
// best parameters seen (initialization included) are kept, so final_loss never
// exceeds initial_loss. Throws non-finite-loss on divergence.
TrainReport train(Network& net, std::span<const double> inputs, std::span<const double> targets,
                  std::size_t rows, const TrainOptions& options, std::mt19937_64& rng);

}  // namespace pfair
