#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trav/image_io.hpp"
#include "trav/objectives.hpp"

namespace trav {

/// Convolutional encoder-decoder: `stages` stride-2 stages with channel
/// widths base_width * {1, 2, 4, 6, 8, ...}, a decoder with skip connections
/// back to output stride 4 and a 1x1 head producing `embed_dim` features.
struct EncoderConfig {
  int input_height = 64;
  int input_width = 96;
  int embed_dim = 32;
  int stages = 4;
  int base_width = 16;
  std::uint64_t seed = 0;

  static constexpr int kOutputStride = 4;

  int output_height() const { return input_height / kOutputStride; }
  int output_width() const { return input_width / kOutputStride; }
  /// Channel width of the stem (index 0) and of every encoder stage.
  std::vector<int> channels() const;
  void validate() const;
};

/// Per-pixel vectors on the output-stride grid, stored dim x (height * width)
/// with pixel index row * width + col.
template <typename S>
struct PixelEmbeddingMap {
  int height = 0;
  int width = 0;
  int dim = 0;
  bool normalized = false;
  RowMatrix<S> data;

  Vector<S> at(int row, int col) const { return data.col(static_cast<Eigen::Index>(row) * width + col); }
};

/// Full-resolution traversability scores in [0, 1], row-major.
struct TraversabilityMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

template <typename S>
struct Parameter {
  std::string name;
  RowMatrix<S> value;
};

/// RGB image as a 3 x (H * W) tensor with values in [0, 1].
template <typename S>
RowMatrix<S> image_to_tensor(const Image8& rgb);

template <typename S>
class Network {
 public:
  using Act = RowMatrix<S>;

  /// Activations retained by forward() for backward().
  struct Tape {
    std::vector<Act> cols;     // im2col buffers (or the input for 1x1 layers)
    std::vector<Act> outputs;  // post-activation outputs per conv layer
    Act features;
    Act embeddings;
    Vector<S> norms;
  };

  struct Output {
    PixelEmbeddingMap<S> features;    // pre-normalization head output
    PixelEmbeddingMap<S> embeddings;  // unit-norm features (clustering / contrastive)
    PixelEmbeddingMap<S> occ;         // OCC projection of the features
  };

  explicit Network(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  std::vector<Parameter<S>>& parameters() { return params_; }
  const std::vector<Parameter<S>>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// `image` is 3 x (H * W) in [0, 1]; throws InputError on shape mismatch.
  Output forward(const Act& image, Tape* tape = nullptr) const;

  /// Accumulates parameter gradients into `grads` (ordered like parameters()).
  /// Any of the incoming gradients may be empty (treated as zero).
  void backward(const Tape& tape, const Act& d_features, const Act& d_embeddings, const Act& d_occ,
                std::vector<Act>& grads) const;

  std::vector<Act> zero_gradients() const;

 private:
  struct Conv {
    int cin = 0;
    int cout = 0;
    int kernel = 3;
    int stride = 1;
    bool relu = true;
    std::size_t weight = 0;
    std::size_t bias = 0;
  };

  std::size_t add_conv(const std::string& name, int cin, int cout, int kernel, int stride, bool relu);

  EncoderConfig config_;
  std::vector<Parameter<S>> params_;
  std::vector<Conv> convs_;
  std::size_t occ_proj_ = 0;
};

/// Bilinear resampling with pixel-center alignment and edge clamping.
std::vector<double> upsample_bilinear(const std::vector<double>& grid, int height, int width, int out_height,
                                      int out_width);

/// OCC scores on the embedding grid upsampled by `stride` to image resolution.
template <typename S>
TraversabilityMap score_map(const PixelEmbeddingMap<S>& occ_embeddings, const OCCHead<S>& head,
                            int stride = EncoderConfig::kOutputStride);

}  // namespace trav
