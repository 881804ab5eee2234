#include "fdr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fdr/error.hpp"
#include "fdr/rng.hpp"

namespace fdr {

std::size_t MlpHead::param_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.param_count();
  return total;
}

HeadDims MlpHead::dims() const {
  HeadDims d;
  d.input = input_dim();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) d.hidden.push_back(layers[l].fan_out());
  d.output = output_dim();
  return d;
}

namespace {

AffineLayer glorot_layer(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  AffineLayer layer;
  layer.weight = Matrix(fan_out, fan_in);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& w : layer.weight.data()) w = rng.uniform(-limit, limit);
  layer.bias.assign(fan_out, 0.0);
  return layer;
}

std::vector<std::size_t> chain_sizes(const HeadDims& dims) {
  require(dims.input > 0, "init_head: input dimension must be positive");
  require(dims.output > 0, "init_head: output dimension must be positive");
  std::vector<std::size_t> sizes;
  sizes.push_back(dims.input);
  for (std::size_t h : dims.hidden) {
    require(h > 0, "init_head: hidden width must be positive");
    sizes.push_back(h);
  }
  sizes.push_back(dims.output);
  return sizes;
}

}  // namespace

MlpHead init_head(const HeadDims& dims, std::uint64_t seed) {
  const auto sizes = chain_sizes(dims);
  MlpHead head;
  head.init_seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    head.layers.push_back(glorot_layer(sizes[l + 1], sizes[l], rng));
  }
  head.freeze_mask.assign(head.layers.size(), 0);
  return head;
}

void reinit_layer(MlpHead& head, std::size_t layer, std::uint64_t seed) {
  require(layer < head.layer_count(), "reinit_layer: layer index ", layer, " out of range");
  Rng rng(seed);
  head.layers[layer] = glorot_layer(head.layers[layer].fan_out(), head.layers[layer].fan_in(), rng);
}

void set_freeze_mask(MlpHead& head, std::vector<std::uint8_t> mask) {
  require(mask.size() == head.layer_count(), "set_freeze_mask: mask length ", mask.size(),
          " does not match layer count ", head.layer_count());
  head.freeze_mask = std::move(mask);
}

namespace {

Matrix affine_forward(const AffineLayer& layer, const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t in = layer.fan_in();
  const std::size_t out = layer.fan_out();
  Matrix y(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = layer.weight.row(o);
      double acc = layer.bias[o];
      for (std::size_t k = 0; k < in; ++k) acc += w[k] * xi[k];
      yi[o] = acc;
    }
  }
  return y;
}

void relu_inplace(Matrix& m) {
  for (auto& v : m.data()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* z = logits.row(i);
    double* p = probs.row(i);
    double zmax = z[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) zmax = std::max(zmax, z[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      p[c] = std::exp(z[c] - zmax);
      sum += p[c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) p[c] /= sum;
  }
  return probs;
}

ForwardCache forward_cached(const MlpHead& head, const Matrix& features) {
  require(features.cols() == head.input_dim(), "forward: feature width ", features.cols(),
          " does not match head input dim ", head.input_dim());
  ForwardCache cache;
  cache.activations.reserve(head.layer_count() + 1);
  cache.activations.push_back(features);
  for (std::size_t l = 0; l < head.layer_count(); ++l) {
    Matrix z = affine_forward(head.layers[l], cache.activations.back());
    if (l + 1 < head.layer_count()) relu_inplace(z);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

PredictionBatch forward(const MlpHead& head, const Matrix& features) {
  ForwardCache cache = forward_cached(head, features);
  PredictionBatch batch;
  batch.logits = std::move(cache.activations.back());
  batch.probs = softmax_rows(batch.logits);
  batch.hard.resize(batch.probs.rows());
  for (std::size_t i = 0; i < batch.probs.rows(); ++i) {
    batch.hard[i] = batch.probs(i, 1) > batch.probs(i, 0) ? 1 : 0;
  }
  return batch;
}

std::vector<double> PredictionBatch::positive_scores() const {
  std::vector<double> scores(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) scores[i] = probs(i, 1);
  return scores;
}

Gradients Gradients::zeros_like(const MlpHead& head) {
  Gradients g;
  g.weight.reserve(head.layer_count());
  g.bias.reserve(head.layer_count());
  for (const auto& layer : head.layers) {
    g.weight.emplace_back(layer.fan_out(), layer.fan_in());
    g.bias.emplace_back(layer.fan_out(), 0.0);
  }
  return g;
}

Gradients backward(const MlpHead& head, const ForwardCache& cache, const Matrix& dlogits) {
  Gradients grads = Gradients::zeros_like(head);
  const std::size_t layer_count = head.layer_count();
  require(cache.activations.size() == layer_count + 1, "backward: cache does not match head");

  std::size_t lowest_trainable = layer_count;
  for (std::size_t l = 0; l < layer_count; ++l) {
    if (!head.frozen(l)) {
      lowest_trainable = l;
      break;
    }
  }
  if (lowest_trainable == layer_count) return grads;  // everything frozen

  Matrix delta = dlogits;
  for (std::size_t l = layer_count; l-- > lowest_trainable;) {
    const Matrix& input = cache.activations[l];
    const AffineLayer& layer = head.layers[l];
    const std::size_t n = delta.rows();
    if (!head.frozen(l)) {
      Matrix& dw = grads.weight[l];
      auto& db = grads.bias[l];
      for (std::size_t i = 0; i < n; ++i) {
        const double* di = delta.row(i);
        const double* xi = input.row(i);
        for (std::size_t o = 0; o < layer.fan_out(); ++o) {
          const double d = di[o];
          db[o] += d;
          double* dwo = dw.row(o);
          for (std::size_t k = 0; k < layer.fan_in(); ++k) dwo[k] += d * xi[k];
        }
      }
    }
    if (l == lowest_trainable) break;
    // d(input) = delta * W, masked by the rectifier of the layer below
    // (its output is cached in `input`; positive output implies a positive
    // pre-activation, so the mask is input > 0).
    Matrix dprev(n, layer.fan_in());
    for (std::size_t i = 0; i < n; ++i) {
      const double* di = delta.row(i);
      const double* xi = input.row(i);
      double* dp = dprev.row(i);
      for (std::size_t k = 0; k < layer.fan_in(); ++k) {
        if (xi[k] > 0.0) {
          double acc = 0.0;
          for (std::size_t o = 0; o < layer.fan_out(); ++o) acc += di[o] * layer.weight(o, k);
          dp[k] = acc;
        } else {
          dp[k] = 0.0;
        }
      }
    }
    delta = std::move(dprev);
  }
  return grads;
}

void save_head(const MlpHead& head, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '", path, "' for writing");
  const HeadDims dims = head.dims();
  std::ostringstream header;
  header << "fdr-head v1\n";
  header << "dims:";
  header << ' ' << dims.input;
  for (std::size_t h : dims.hidden) header << ' ' << h;
  header << ' ' << dims.output << "\n";
  header << "freeze:";
  for (std::uint8_t f : head.freeze_mask) header << ' ' << int(f);
  header << "\n";
  header << "seed: " << head.init_seed << "\n";
  std::size_t blob_count = head.param_count();
  header << "params: " << blob_count << "\n\n";
  const std::string header_str = header.str();
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  auto write_f32 = [&out](double v) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof(float));
  };
  for (const auto& layer : head.layers) {
    for (double w : layer.weight.data()) write_f32(w);
    for (double b : layer.bias) write_f32(b);
  }
  require(out.good(), "write to '", path, "' failed");
}

MlpHead load_head(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '", path, "' for reading");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "fdr-head v1",
          "'", path, "': not an fdr head file");

  auto read_kv = [&](const std::string& key) -> std::string {
    require(static_cast<bool>(std::getline(in, line)), "'", path, "': truncated header");
    require(line.rfind(key + ":", 0) == 0, "'", path, "': expected '", key, ":' line, got '", line, "'");
    return line.substr(key.size() + 1);
  };

  std::istringstream dims_in(read_kv("dims"));
  std::vector<std::size_t> sizes;
  for (std::size_t v; dims_in >> v;) sizes.push_back(v);
  require(sizes.size() >= 2, "'", path, "': dims line needs at least input and output");

  std::istringstream freeze_in(read_kv("freeze"));
  std::vector<std::uint8_t> mask;
  for (int v; freeze_in >> v;) {
    require(v == 0 || v == 1, "'", path, "': freeze entries must be 0/1");
    mask.push_back(static_cast<std::uint8_t>(v));
  }
  require(mask.size() == sizes.size() - 1, "'", path, "': freeze mask length ", mask.size(),
          " does not match layer count ", sizes.size() - 1);

  std::uint64_t seed = 0;
  {
    std::istringstream seed_in(read_kv("seed"));
    require(static_cast<bool>(seed_in >> seed), "'", path, "': bad seed line");
  }
  std::size_t declared_params = 0;
  {
    std::istringstream params_in(read_kv("params"));
    require(static_cast<bool>(params_in >> declared_params), "'", path, "': bad params line");
  }
  require(static_cast<bool>(std::getline(in, line)) && line.empty(),
          "'", path, "': expected blank line before parameter blob");

  MlpHead head;
  head.init_seed = seed;
  head.freeze_mask = std::move(mask);
  auto read_f32 = [&in, &path]() {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), sizeof(float));
    require(in.gcount() == sizeof(float), "'", path, "': parameter blob truncated");
    return static_cast<double>(f);
  };
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    AffineLayer layer;
    layer.weight = Matrix(sizes[l + 1], sizes[l]);
    for (auto& w : layer.weight.data()) w = read_f32();
    layer.bias.resize(sizes[l + 1]);
    for (auto& b : layer.bias) b = read_f32();
    total += layer.param_count();
    head.layers.push_back(std::move(layer));
  }
  require(total == declared_params, "'", path, "': params count mismatch, header says ",
          declared_params, " but layers hold ", total);
  char extra = 0;
  require(!in.read(&extra, 1), "'", path, "': trailing bytes after parameter blob");
  return head;
}

}  // namespace fdr
