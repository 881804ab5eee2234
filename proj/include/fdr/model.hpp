#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdr/matrix.hpp"

namespace fdr {

/// y = W x + b with W stored (out x in) row-major.
struct AffineLayer {
  Matrix weight;
  std::vector<double> bias;

  std::size_t fan_in() const { return weight.cols(); }
  std::size_t fan_out() const { return weight.rows(); }
  std::size_t param_count() const { return weight.size() + bias.size(); }

  bool operator==(const AffineLayer&) const = default;
};

struct HeadDims {
  std::size_t input = 0;
  std::vector<std::size_t> hidden;
  std::size_t output = 2;

  std::size_t layer_count() const { return hidden.size() + 1; }
};

/// Small feed-forward classification head: affine layers with a rectifier
/// between hidden layers and two output logits. freeze_mask[l] = true means
/// layer l receives no updates from any training call.
struct MlpHead {
  std::vector<AffineLayer> layers;
  std::vector<std::uint8_t> freeze_mask;
  std::uint64_t init_seed = 0;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t input_dim() const { return layers.front().fan_in(); }
  std::size_t output_dim() const { return layers.back().fan_out(); }
  std::size_t param_count() const;
  HeadDims dims() const;
  bool frozen(std::size_t layer) const { return freeze_mask[layer] != 0; }

  bool operator==(const MlpHead&) const = default;
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases,
/// deterministic in the seed. All layers start trainable.
MlpHead init_head(const HeadDims& dims, std::uint64_t seed);

/// Re-draws one layer from the same init rule; used to replace the last
/// layer before fine-tuning.
void reinit_layer(MlpHead& head, std::size_t layer, std::uint64_t seed);

void set_freeze_mask(MlpHead& head, std::vector<std::uint8_t> mask);

struct PredictionBatch {
  Matrix logits;               // n x 2
  Matrix probs;                // n x 2, rows sum to 1
  std::vector<std::uint8_t> hard;  // argmax, ties toward class 0

  std::vector<double> positive_scores() const;  // probs column 1
};

PredictionBatch forward(const MlpHead& head, const Matrix& features);

/// Per-layer inputs kept around for backprop. activations[0] is the input
/// batch, activations[l+1] is the post-rectifier output of layer l (the raw
/// logits for the last layer).
struct ForwardCache {
  std::vector<Matrix> activations;

  const Matrix& logits() const { return activations.back(); }
};

ForwardCache forward_cached(const MlpHead& head, const Matrix& features);

Matrix softmax_rows(const Matrix& logits);

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const MlpHead& head);
};

/// Backpropagates d(loss)/d(logits) through the head. Frozen layers get
/// zero gradients; propagation stops below the lowest trainable layer.
Gradients backward(const MlpHead& head, const ForwardCache& cache, const Matrix& dlogits);

/// Text header + raw little-endian float32 parameter blobs. Loading and
/// re-saving a file reproduces it byte for byte.
void save_head(const MlpHead& head, const std::string& path);
MlpHead load_head(const std::string& path);

}  // namespace fdr
