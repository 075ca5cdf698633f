#include "trav/model.hpp"

#include <cmath>

#include "trav/errors.hpp"
#include "trav/rng.hpp"

namespace trav {

std::vector<int> EncoderConfig::channels() const {
  static constexpr int kMultipliers[] = {1, 2, 4, 6, 8};
  std::vector<int> out;
  for (int s = 0; s <= stages; ++s) out.push_back(base_width * kMultipliers[std::min(s, 4)]);
  return out;
}

void EncoderConfig::validate() const {
  if (embed_dim < 2) throw InputError("encoder: embed_dim must be >= 2");
  if (stages < 2 || stages > 6) throw InputError("encoder: stages must be in [2, 6]");
  if (base_width < 1) throw InputError("encoder: base_width must be positive");
  const int factor = 1 << stages;
  if (input_height <= 0 || input_width <= 0 || input_height % factor != 0 || input_width % factor != 0) {
    throw InputError("encoder: input size must be divisible by " + std::to_string(factor));
  }
}

template <typename S>
RowMatrix<S> image_to_tensor(const Image8& rgb) {
  if (rgb.channels != 3) throw InputError("image_to_tensor: expected an RGB image");
  const Eigen::Index n = static_cast<Eigen::Index>(rgb.width) * rgb.height;
  RowMatrix<S> out(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) out(c, i) = static_cast<S>(rgb.data[static_cast<std::size_t>(i) * 3 + c]) / S(255);
  }
  return out;
}

namespace {

template <typename S>
void im2col3(const RowMatrix<S>& in, int h, int w, int stride, int ho, int wo, RowMatrix<S>& cols) {
  const auto channels = static_cast<int>(in.rows());
  cols.setZero(static_cast<Eigen::Index>(channels) * 9, static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < channels; ++c) {
    const S* src = in.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          const S* src_row = src + static_cast<std::ptrdiff_t>(iy) * w;
          S* dst_row = dst + static_cast<std::ptrdiff_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) dst_row[ox] = src_row[ix];
          }
        }
      }
    }
  }
}

template <typename S>
void col2im3(const RowMatrix<S>& cols, int h, int w, int stride, int ho, int wo, RowMatrix<S>& in_grad) {
  const auto channels = static_cast<int>(cols.rows() / 9);
  in_grad.setZero(channels, static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < channels; ++c) {
    S* dst = in_grad.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          S* dst_row = dst + static_cast<std::ptrdiff_t>(iy) * w;
          const S* src_row = src + static_cast<std::ptrdiff_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

template <typename S>
RowMatrix<S> upsample2(const RowMatrix<S>& in, int h, int w) {
  RowMatrix<S> out(in.rows(), static_cast<Eigen::Index>(4) * h * w);
  const int w2 = 2 * w;
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const S* src = in.row(c).data();
    S* dst = out.row(c).data();
    for (int y = 0; y < 2 * h; ++y) {
      for (int x = 0; x < w2; ++x) dst[y * w2 + x] = src[(y / 2) * w + x / 2];
    }
  }
  return out;
}

template <typename S>
RowMatrix<S> upsample2_backward(const RowMatrix<S>& grad, int h, int w) {
  RowMatrix<S> out = RowMatrix<S>::Zero(grad.rows(), static_cast<Eigen::Index>(h) * w);
  const int w2 = 2 * w;
  for (Eigen::Index c = 0; c < grad.rows(); ++c) {
    const S* src = grad.row(c).data();
    S* dst = out.row(c).data();
    for (int y = 0; y < 2 * h; ++y) {
      for (int x = 0; x < w2; ++x) dst[(y / 2) * w + x / 2] += src[y * w2 + x];
    }
  }
  return out;
}

template <typename S>
void fill_normal(RowMatrix<S>& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(rng.normal() * stddev);
  }
}

}  // namespace

template <typename S>
Network<S>::Network(const EncoderConfig& config) : config_(config) {
  config_.validate();
  const std::vector<int> ch = config_.channels();
  const int stages = config_.stages;
  add_conv("stem", 3, ch[0], 3, 1, true);
  for (int s = 1; s <= stages; ++s) {
    add_conv("down" + std::to_string(s) + "a", ch[s - 1], ch[s], 3, 2, true);
    add_conv("down" + std::to_string(s) + "b", ch[s], ch[s], 3, 1, true);
  }
  int below = ch[stages];
  for (int s = stages - 1; s >= 2; --s) {
    add_conv("dec" + std::to_string(s), below + ch[s], ch[s], 3, 1, true);
    below = ch[s];
  }
  add_conv("head", below, config_.embed_dim, 1, 1, false);
  occ_proj_ = params_.size();
  params_.push_back({"occ_proj.weight", RowMatrix<S>(config_.embed_dim, config_.embed_dim)});

  Rng rng = Rng::derive(config_.seed, 0x6d6f64656cull);
  for (const Conv& conv : convs_) {
    const int fan_in = conv.cin * conv.kernel * conv.kernel;
    const double gain = conv.relu ? 2.0 : 1.0;
    fill_normal(params_[conv.weight].value, rng, std::sqrt(gain / fan_in));
    params_[conv.bias].value.setZero();
  }
  fill_normal(params_[occ_proj_].value, rng, std::sqrt(1.0 / config_.embed_dim));
}

template <typename S>
std::size_t Network<S>::add_conv(const std::string& name, int cin, int cout, int kernel, int stride, bool relu) {
  Conv conv{cin, cout, kernel, stride, relu, params_.size(), params_.size() + 1};
  params_.push_back({name + ".weight", RowMatrix<S>(cout, cin * kernel * kernel)});
  params_.push_back({name + ".bias", RowMatrix<S>(cout, 1)});
  convs_.push_back(conv);
  return convs_.size() - 1;
}

template <typename S>
std::size_t Network<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename S>
std::vector<RowMatrix<S>> Network<S>::zero_gradients() const {
  std::vector<Act> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(Act::Zero(p.value.rows(), p.value.cols()));
  return grads;
}

template <typename S>
typename Network<S>::Output Network<S>::forward(const Act& image, Tape* tape) const {
  const int h0 = config_.input_height;
  const int w0 = config_.input_width;
  if (image.rows() != 3 || image.cols() != static_cast<Eigen::Index>(h0) * w0) {
    throw InputError("forward: image shape does not match the configured input size");
  }
  Tape local;
  Tape& t = tape ? *tape : local;
  t.cols.assign(convs_.size(), Act());
  t.outputs.assign(convs_.size(), Act());

  std::size_t layer = 0;
  auto run = [&](const Act& in, int h, int w) -> const Act& {
    const Conv& conv = convs_[layer];
    const Act& weight = params_[conv.weight].value;
    const Act& bias = params_[conv.bias].value;
    Act& cols = t.cols[layer];
    Act& out = t.outputs[layer];
    if (conv.kernel == 3) {
      const int ho = h / conv.stride;
      const int wo = w / conv.stride;
      im2col3(in, h, w, conv.stride, ho, wo, cols);
      out.noalias() = weight * cols;
    } else {
      cols = in;
      out.noalias() = weight * in;
    }
    out.colwise() += bias.col(0);
    if (conv.relu) out = out.cwiseMax(S(0));
    ++layer;
    return out;
  };

  const int stages = config_.stages;
  const Act input = image.array() - S(0.5);
  std::vector<const Act*> skips(static_cast<std::size_t>(stages) + 1);
  skips[0] = &run(input, h0, w0);
  int h = h0;
  int w = w0;
  for (int s = 1; s <= stages; ++s) {
    const Act& a = run(*skips[s - 1], h, w);
    h /= 2;
    w /= 2;
    skips[s] = &run(a, h, w);
  }
  const Act* d = skips[stages];
  for (int s = stages - 1; s >= 2; --s) {
    Act up = upsample2(*d, h, w);
    h *= 2;
    w *= 2;
    Act cat(up.rows() + skips[s]->rows(), up.cols());
    cat << up, *skips[s];
    d = &run(cat, h, w);
  }
  Act linear_in = *d;
  const Act& f = run(linear_in, h, w);

  t.features = f;
  t.norms = f.colwise().norm().transpose();
  t.norms = t.norms.cwiseMax(S(1e-12));
  t.embeddings = f.array().rowwise() / t.norms.transpose().array();

  Output out;
  const int dim = config_.embed_dim;
  out.features = {h, w, dim, false, f};
  out.embeddings = {h, w, dim, true, t.embeddings};
  out.occ = {h, w, dim, false, params_[occ_proj_].value * f};
  return out;
}

template <typename S>
void Network<S>::backward(const Tape& t, const Act& d_features, const Act& d_embeddings, const Act& d_occ,
                          std::vector<Act>& grads) const {
  if (grads.size() != params_.size()) throw InputError("backward: gradient list does not match parameters");
  const Act& f = t.features;
  Act df = Act::Zero(f.rows(), f.cols());
  if (d_features.size() > 0) df += d_features;
  if (d_embeddings.size() > 0) {
    const Act& z = t.embeddings;
    const Eigen::Matrix<S, 1, Eigen::Dynamic> dots = z.cwiseProduct(d_embeddings).colwise().sum();
    Act proj = d_embeddings - (z.array().rowwise() * dots.array()).matrix();
    df += (proj.array().rowwise() / t.norms.transpose().array()).matrix();
  }
  if (d_occ.size() > 0) {
    const Act& wp = params_[occ_proj_].value;
    grads[occ_proj_].noalias() += d_occ * f.transpose();
    df.noalias() += wp.transpose() * d_occ;
  }

  // Returns the gradient w.r.t. the layer input (empty when !need_input).
  auto conv_back = [&](std::size_t layer, Act dout, int h_in, int w_in, bool need_input) -> Act {
    const Conv& conv = convs_[layer];
    if (conv.relu) dout = (t.outputs[layer].array() > S(0)).select(dout, S(0));
    grads[conv.weight].noalias() += dout * t.cols[layer].transpose();
    grads[conv.bias] += dout.rowwise().sum();
    if (!need_input) return {};
    Act dcols = params_[conv.weight].value.transpose() * dout;
    if (conv.kernel == 1) return dcols;
    Act din;
    col2im3(dcols, h_in, w_in, conv.stride, h_in / conv.stride, w_in / conv.stride, din);
    return din;
  };

  const int stages = config_.stages;
  const std::vector<int> ch = config_.channels();
  std::vector<int> hs(static_cast<std::size_t>(stages) + 1);
  std::vector<int> ws(static_cast<std::size_t>(stages) + 1);
  hs[0] = config_.input_height;
  ws[0] = config_.input_width;
  for (int s = 1; s <= stages; ++s) {
    hs[s] = hs[s - 1] / 2;
    ws[s] = ws[s - 1] / 2;
  }
  std::vector<Act> dskip(static_cast<std::size_t>(stages) + 1);
  for (int s = 0; s <= stages; ++s) dskip[s] = Act::Zero(ch[s], static_cast<Eigen::Index>(hs[s]) * ws[s]);

  const std::size_t head = convs_.size() - 1;
  Act dd = conv_back(head, df, hs[2], ws[2], true);
  // Decoder layers were created for s = stages-1 .. 2, so walk them backwards.
  for (int s = 2; s <= stages - 1; ++s) {
    const std::size_t layer = 1 + 2 * static_cast<std::size_t>(stages) + static_cast<std::size_t>(stages - 1 - s);
    Act dcat = conv_back(layer, dd, hs[s], ws[s], true);
    const Eigen::Index up_rows = dcat.rows() - ch[s];
    dskip[s] += dcat.bottomRows(ch[s]);
    dd = upsample2_backward<S>(dcat.topRows(up_rows), hs[s + 1], ws[s + 1]);
  }
  dskip[stages] += dd;

  for (int s = stages; s >= 1; --s) {
    const std::size_t a = 1 + 2 * static_cast<std::size_t>(s - 1);
    Act dt = conv_back(a + 1, dskip[s], hs[s], ws[s], true);
    dskip[s - 1] += conv_back(a, dt, hs[s - 1], ws[s - 1], true);
  }
  conv_back(0, dskip[0], hs[0], ws[0], false);
}

std::vector<double> upsample_bilinear(const std::vector<double>& grid, int height, int width, int out_height,
                                      int out_width) {
  if (grid.size() != static_cast<std::size_t>(height) * width || height <= 0 || width <= 0) {
    throw InputError("upsample_bilinear: grid size mismatch");
  }
  std::vector<double> out(static_cast<std::size_t>(out_height) * out_width);
  const double sy = static_cast<double>(height) / out_height;
  const double sx = static_cast<double>(width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, height - 1);
    const double ay = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, width - 1);
      const double ax = fx - x0;
      const double top = (1 - ax) * grid[y0 * width + x0] + ax * grid[y0 * width + x1];
      const double bottom = (1 - ax) * grid[y1 * width + x0] + ax * grid[y1 * width + x1];
      out[static_cast<std::size_t>(y) * out_width + x] = (1 - ay) * top + ay * bottom;
    }
  }
  return out;
}

template <typename S>
TraversabilityMap score_map(const PixelEmbeddingMap<S>& occ, const OCCHead<S>& head, int stride) {
  if (occ.dim != head.center.size() || occ.data.rows() != head.center.size()) {
    throw InputError("score_map: OCC head dimension does not match the embeddings");
  }
  std::vector<double> scores(static_cast<std::size_t>(occ.height) * occ.width);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto d2 = static_cast<double>((occ.data.col(static_cast<Eigen::Index>(i)) - head.center).squaredNorm());
    scores[i] = std::exp(-d2 / static_cast<double>(head.temperature));
  }
  TraversabilityMap out;
  out.height = occ.height * stride;
  out.width = occ.width * stride;
  out.values = upsample_bilinear(scores, occ.height, occ.width, out.height, out.width);
  for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
  return out;
}

template RowMatrix<float> image_to_tensor<float>(const Image8&);
template RowMatrix<double> image_to_tensor<double>(const Image8&);
template class Network<float>;
template class Network<double>;
template TraversabilityMap score_map<float>(const PixelEmbeddingMap<float>&, const OCCHead<float>&, int);
template TraversabilityMap score_map<double>(const PixelEmbeddingMap<double>&, const OCCHead<double>&, int);

}  // namespace trav
