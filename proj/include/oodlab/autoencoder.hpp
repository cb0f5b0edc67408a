#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oodlab/errors.hpp"
#include "oodlab/image.hpp"

namespace oodlab {

// Convolutional autoencoder used to measure visual divergence between domains:
// a model fit to one domain's images reconstructs look-alike images well and
// everything else badly, so held-out reconstruction error acts as a distance.
//
// Architecture: per encoder stage, a 3x3 same-padding convolution, leaky ReLU,
// then 2x2 max-pooling; a fully connected bottleneck to `latent_dim`; a fully
// connected expansion; per decoder stage, a stride-2 transposed convolution
// that exactly doubles both spatial dimensions, with leaky ReLU between stages
// and a sigmoid on the final output. All math is double precision and the whole
// pipeline (init, shuffling, updates) is bit-deterministic given the seed.
struct AEConfig {
  int input_h = 32;
  int input_w = 256;
  std::vector<int> channels = {1, 8, 16};  // channels[0] is the input plane
  int kernel = 3;  // only 3 is supported
  int pool = 2;    // only 2 is supported
  int latent_dim = 64;
  double leaky_slope = 0.01;
  std::uint64_t seed = 42;

  int stages() const { return static_cast<int>(channels.size()) - 1; }
  int feature_h() const { return input_h >> stages(); }
  int feature_w() const { return input_w >> stages(); }
  int flat_dim() const { return channels.back() * feature_h() * feature_w(); }

  void validate() const;  // DataError on impossible geometry

  // The scale used for full studies: 64x1024 inputs, channels 1-16-32-64-128,
  // latent 512 (about 33.8M parameters).
  static AEConfig full_scale();
};

struct ConvLayer {
  int out_ch = 0;
  int in_ch = 0;
  std::vector<double> w;  // [out][in][ky][kx], 3x3
  std::vector<double> b;  // [out]
};

struct DenseLayer {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> w;  // [out][in]
  std::vector<double> b;  // [out]
};

// Also serves as the gradient container and the Adam moment container: those
// are exactly parameter-shaped.
struct AEParams {
  AEConfig config;
  std::vector<ConvLayer> enc_convs;   // one per encoder stage
  DenseLayer enc_fc;                  // flat features -> latent
  DenseLayer dec_fc;                  // latent -> flat features
  std::vector<ConvLayer> dec_tconvs;  // one per decoder stage

  static AEParams zeros(const AEConfig& cfg);

  // Tensors in declaration order (conv w/b per stage, enc_fc w/b, dec_fc w/b,
  // tconv w/b per stage); the order defines both the init stream and the file
  // layout.
  std::vector<std::vector<double>*> tensors();
  std::vector<const std::vector<double>*> tensors() const;
  std::size_t parameter_count() const;
};

// He-style uniform init, bounds sqrt(6 / fan_in), biases zero, drawn from a
// generator seeded with config.seed in declaration order.
AEParams init_autoencoder(const AEConfig& cfg);

// Reconstructions for a batch. Images must match the configured input size.
std::vector<GrayImage> ae_forward(const AEParams& params, const std::vector<GrayImage>& batch);

// Mean squared reconstruction error: mean over images of the per-image pixel
// mean of (reconstruction - input)^2.
double ae_loss(const AEParams& params, const std::vector<GrayImage>& batch);

// Plain MSE between two equal-shape images.
double ae_loss(const GrayImage& recon, const GrayImage& input);

struct BackwardResult {
  AEParams grads;  // exact gradient of ae_loss with respect to every parameter
  double loss = 0;
};

BackwardResult ae_backward(const AEParams& params, const std::vector<GrayImage>& batch);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig hp;
  long long step = 0;
  AEParams m;  // first-moment accumulator
  AEParams v;  // second-moment accumulator

  static AdamState create(const AEConfig& cfg, AdamConfig hp = {});
};

// Bias-corrected Adam over a single tensor; exposed so the update rule can be
// exercised on scalar problems directly.
void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, long long t, const AdamConfig& hp);

// In-place Adam step over all parameter tensors. Throws NumericError when a
// gradient is non-finite (the message names the offending tensor).
void adam_step(AEParams& params, const AEParams& grads, AdamState& state);

struct TrainOptions {
  int epochs = 100;
  int batch_size = 8;
};

struct TrainResult {
  AEParams params;  // snapshot with the best validation MSE seen
  double best_val_mse = 0;
  int best_epoch = 0;  // 0 means the untrained initialization
  std::vector<double> val_history;
};

// Mini-batch Adam training with per-epoch reshuffling and best-on-validation
// snapshotting. epochs == 0 returns the initialization untouched. The returned
// snapshot never has a validation MSE above any epoch-end snapshot seen.
TrainResult train_autoencoder(const AEConfig& cfg, const std::vector<GrayImage>& train,
                              const std::vector<GrayImage>& val, const TrainOptions& opt = {});

// Mean reconstruction error of `params` over `images`; the visual divergence
// from the model's training domain to wherever the images came from.
double visual_divergence(const AEParams& params, const std::vector<GrayImage>& images);

// Little-endian binary file: magic, config block, then every tensor in
// declaration order as 32-bit floats. Rewriting identical params yields
// identical bytes.
void save_ae_params(const AEParams& params, const std::filesystem::path& path);
AEParams load_ae_params(const std::filesystem::path& path);

}  // namespace oodlab
