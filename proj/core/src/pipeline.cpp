#include "trav/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "trav/dataset.hpp"
#include "trav/digest.hpp"
#include "trav/errors.hpp"
#include "trav/parallel.hpp"
#include "trav/rng.hpp"

namespace trav {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// TrainConfig

std::vector<ConfigField> TrainConfig::fields() {
  return {
      {"dataset_root", &dataset_root},
      {"batch_size", &batch_size},
      {"epochs", &epochs},
      {"learning_rate", &learning_rate},
      {"lr_schedule", &lr_schedule},
      {"momentum", &momentum},
      {"weight_decay", &weight_decay},
      {"grad_clip", &grad_clip},
      {"lambda_clu", &lambda_clu},
      {"lambda_con", &lambda_con},
      {"occ_only", &occ_only},
      {"no_clustering", &no_clustering},
      {"no_contrastive", &no_contrastive},
      {"seed", &seed},
      {"precision", &precision},
      {"embed_dim", &embed_dim},
      {"stages", &stages},
      {"base_width", &base_width},
      {"pixels_per_objective", &pixels_per_objective},
      {"occ_temperature", &occ_temperature},
      {"occ_unlabeled_weight", &occ_unlabeled_weight},
      {"occ_margin", &occ_margin},
      {"prototypes", &prototypes},
      {"sinkhorn_epsilon", &sinkhorn_epsilon},
      {"sinkhorn_iters", &sinkhorn_iters},
      {"cluster_temperature", &cluster_temperature},
      {"contrastive_temperature", &contrastive_temperature},
      {"prototype_freeze_epochs", &prototype_freeze_epochs},
      {"crop_scale_min", &crop_scale_min},
      {"crop_scale_max", &crop_scale_max},
      {"flip_probability", &flip_probability},
      {"color_jitter", &color_jitter},
      {"checkpoint_every", &checkpoint_every},
      {"workers", &workers},
  };
}

std::string TrainConfig::to_json() const {
  TrainConfig copy = *this;
  return fields_to_json(copy.fields());
}

TrainConfig TrainConfig::from_json(const std::string& text, const std::string& origin) {
  TrainConfig c;
  fields_from_json(c.fields(), text, origin);
  return c;
}

double TrainConfig::effective_lambda_clu() const { return (occ_only || no_clustering) ? 0.0 : lambda_clu; }
double TrainConfig::effective_lambda_con() const { return (occ_only || no_contrastive) ? 0.0 : lambda_con; }

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (lr_schedule != "cosine" && lr_schedule != "constant") fail("lr_schedule must be 'cosine' or 'constant'");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) fail("grad_clip must be >= 0");
  if (!(lambda_clu >= 0.0) || !(lambda_con >= 0.0)) fail("lambda_clu and lambda_con must be >= 0");
  if (precision != "float32" && precision != "float64") fail("precision must be 'float32' or 'float64'");
  if (pixels_per_objective < 2) fail("pixels_per_objective must be >= 2");
  if (!(occ_temperature > 0.0)) fail("occ_temperature must be > 0");
  if (!(occ_unlabeled_weight >= 0.0 && occ_unlabeled_weight <= 1.0)) fail("occ_unlabeled_weight must be in [0, 1]");
  if (!(occ_margin >= 0.0)) fail("occ_margin must be >= 0");
  if (prototypes < 2) fail("prototypes must be >= 2");
  if (!(sinkhorn_epsilon > 0.0) || sinkhorn_iters < 1) fail("sinkhorn_epsilon > 0 and sinkhorn_iters >= 1 required");
  if (!(cluster_temperature > 0.0) || !(contrastive_temperature > 0.0)) fail("temperatures must be > 0");
  if (prototype_freeze_epochs < 0) fail("prototype_freeze_epochs must be >= 0");
  if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0)) {
    fail("crop scales must satisfy 0 < min <= max <= 1");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) fail("flip_probability must be in [0, 1]");
  if (!(color_jitter >= 0.0 && color_jitter < 1.0)) fail("color_jitter must be in [0, 1)");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (workers < 1) fail("workers must be >= 1");
}

bool is_resume_mutable_key(const std::string& key) {
  static const std::set<std::string> kMutable = {"epochs", "checkpoint_every", "workers", "dataset_root"};
  return kMutable.count(key) != 0;
}

std::vector<std::string> config_differences(const TrainConfig& checkpoint, const TrainConfig& requested) {
  const json a = json::parse(checkpoint.to_json());
  const json b = json::parse(requested.to_json());
  std::vector<std::string> out;
  for (const auto& [key, value] : a.items()) {
    if (is_resume_mutable_key(key)) continue;
    if (!b.contains(key) || b.at(key) != value) {
      out.push_back(key + " (checkpoint=" + value.dump() + ", requested=" + (b.contains(key) ? b.at(key).dump() : "?") +
                    ")");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data

std::vector<TrainingFrame> load_training_frames(const fs::path& dataset_root) {
  const DatasetLayout layout{dataset_root};
  const fs::path manifest_path = layout.labels_dir() / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) {
    throw DataError("missing labels: " + manifest_path.string() + " not found (run the labels step first)");
  }
  json manifest;
  try {
    manifest = json::parse(read_file_bytes(manifest_path));
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  std::vector<TrainingFrame> frames;
  for (const auto& id_json : manifest.at("frames")) {
    TrainingFrame f;
    f.id = id_json.get<std::string>();
    f.image = read_png(layout.image_path(f.id), 3);
    if (!fs::is_regular_file(layout.label_path(f.id))) throw DataError("missing label mask for frame " + f.id);
    f.labels = decode_label_mask(read_png(layout.label_path(f.id), 1));
    if (f.labels.width() != f.image.width || f.labels.height() != f.image.height) {
      throw DataError("label mask size differs from image size for frame " + f.id);
    }
    frames.push_back(std::move(f));
  }
  if (frames.empty()) throw DataError("no labeled frames in " + manifest_path.string());
  return frames;
}

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566ull;
constexpr std::uint64_t kStepTag = 0x73746570ull;
constexpr std::uint64_t kPrototypeTag = 0x70726f74ull;
constexpr int kStride = EncoderConfig::kOutputStride;

EncoderConfig encoder_for(const TrainConfig& c, int height, int width) {
  EncoderConfig e;
  e.input_height = height;
  e.input_width = width;
  e.embed_dim = c.embed_dim;
  e.stages = c.stages;
  e.base_width = c.base_width;
  e.seed = c.seed;
  return e;
}

LabelCode cell_label(const LabelMask& labels, const AugmentationParams& view, int cell, int grid_width) {
  const int row = cell / grid_width;
  const int col = cell % grid_width;
  const Eigen::Vector2d src = view_to_source(view, labels.width(), labels.height(),
                                             {(col + 0.5) * kStride, (row + 0.5) * kStride});
  const int x = std::clamp(static_cast<int>(std::floor(src.x())), 0, labels.width() - 1);
  const int y = std::clamp(static_cast<int>(std::floor(src.y())), 0, labels.height() - 1);
  return labels.at(y, x);
}

struct CellRef {
  int image = 0;
  int view = 0;
  int cell = 0;
};

struct PairRef {
  int image = 0;
  int first = 0;
  int second = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Trainer

template <typename S>
Trainer<S>::Trainer(TrainConfig config, std::vector<TrainingFrame> frames)
    : Trainer(config, std::move(frames),
              frames.empty() ? EncoderConfig{} : encoder_for(config, frames.front().image.height,
                                                             frames.front().image.width)) {}

template <typename S>
Trainer<S>::Trainer(TrainConfig config, std::vector<TrainingFrame>&& frames, EncoderConfig encoder)
    : config_(std::move(config)), frames_(std::move(frames)), state_(encoder) {
  config_.validate();
  if (frames_.empty()) throw DataError("no training frames");
  for (const auto& f : frames_) {
    if (f.image.width != encoder.input_width || f.image.height != encoder.input_height) {
      throw DataError("frame " + f.id + " has a different image size");
    }
  }
  const int dim = config_.embed_dim;
  Rng rng = Rng::derive(config_.seed, kPrototypeTag);
  state_.bank.prototypes.resize(config_.prototypes, dim);
  for (Eigen::Index i = 0; i < state_.bank.prototypes.size(); ++i) {
    state_.bank.prototypes.data()[i] = static_cast<S>(rng.normal());
  }
  state_.bank.renormalize();
  state_.head.center = Vector<S>::Zero(dim);
  state_.head.temperature = static_cast<S>(config_.occ_temperature);
  state_.head.unlabeled_weight = static_cast<S>(config_.occ_unlabeled_weight);
  state_.head.margin = static_cast<S>(config_.occ_margin);
  state_.momentum = state_.network.zero_gradients();
  state_.prototype_momentum = RowMatrix<S>::Zero(config_.prototypes, dim);
}

template <typename S>
std::int64_t Trainer<S>::steps_per_epoch() const {
  const auto n = static_cast<std::int64_t>(frames_.size());
  return (n + config_.batch_size - 1) / config_.batch_size;
}

template <typename S>
std::int64_t Trainer<S>::total_steps() const {
  return steps_per_epoch() * config_.epochs;
}

template <typename S>
double Trainer<S>::learning_rate_at(std::int64_t step) const {
  if (config_.lr_schedule == "constant" || total_steps() == 0) return config_.learning_rate;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps()));
  return config_.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename S>
void Trainer<S>::initialize_center() {
  if (state_.center_initialized) return;
  const EncoderConfig& enc = state_.network.config();
  const int gw = enc.output_width();
  const int cells = enc.output_height() * gw;
  const auto identity = AugmentationParams::identity(enc.input_width, enc.input_height);
  std::vector<Vector<S>> sums(frames_.size());
  std::vector<std::int64_t> counts(frames_.size(), 0);
  parallel_for(frames_.size(), config_.workers, [&](std::size_t i) {
    const auto out = state_.network.forward(image_to_tensor<S>(frames_[i].image));
    sums[i] = Vector<S>::Zero(enc.embed_dim);
    for (int c = 0; c < cells; ++c) {
      if (cell_label(frames_[i].labels, identity, c, gw) == LabelCode::Positive) {
        sums[i] += out.occ.data.col(c);
        ++counts[i];
      }
    }
  });
  Vector<S> total = Vector<S>::Zero(enc.embed_dim);
  std::int64_t count = 0;
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    total += sums[i];
    count += counts[i];
  }
  if (count == 0) throw DataError("no positive label cells in the training frames");
  Vector<S> center = total / static_cast<S>(count);
  // Keep the center away from zero coordinates, which features reach trivially.
  constexpr double kMinAbs = 0.01;
  for (Eigen::Index k = 0; k < center.size(); ++k) {
    if (std::abs(static_cast<double>(center(k))) < kMinAbs) center(k) = static_cast<S>(center(k) < 0 ? -kMinAbs : kMinAbs);
  }
  state_.head.center = center;
  state_.center_initialized = true;
}

template <typename S>
StepMetrics Trainer<S>::step() {
  using Act = RowMatrix<S>;
  initialize_center();
  const EncoderConfig& enc = state_.network.config();
  const int width = enc.input_width;
  const int height = enc.input_height;
  const int gw = enc.output_width();
  const int cells = enc.output_height() * gw;
  const int dim = enc.embed_dim;

  const std::int64_t spe = steps_per_epoch();
  const std::int64_t step = state_.step;
  const std::int64_t epoch = step / spe;
  const std::int64_t batch_index = step % spe;

  std::vector<std::size_t> order(frames_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng::derive(config_.seed, kShuffleTag, epoch).shuffle(order);
  const auto begin = static_cast<std::size_t>(batch_index * config_.batch_size);
  const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config_.batch_size));
  const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t n = batch.size();

  Rng rng = Rng::derive(config_.seed, kStepTag, step);
  const AugmentConfig aug{config_.crop_scale_min, config_.crop_scale_max, config_.flip_probability,
                          config_.color_jitter};
  std::vector<std::array<AugmentationParams, 2>> views(n);
  for (auto& v : views) {
    v[0] = sample_augmentation(rng, width, height, aug);
    v[1] = sample_augmentation(rng, width, height, aug);
  }

  struct ViewPass {
    typename Network<S>::Tape tape;
    typename Network<S>::Output out;
  };
  std::vector<std::array<ViewPass, 2>> passes(n);
  std::vector<PixelPairs> pairs(n);
  parallel_for(n, config_.workers, [&](std::size_t i) {
    const Act source = image_to_tensor<S>(frames_[batch[i]].image);
    for (int v = 0; v < 2; ++v) {
      passes[i][v].out = state_.network.forward(apply_augmentation<S>(source, width, height, views[i][v]),
                                                &passes[i][v].tape);
    }
    pairs[i] = pixel_correspondence(views[i][0], views[i][1], width, height, kStride);
  });

  auto batch_digest = [&] {
    std::ostringstream digest_input;
    digest_input << "step=" << step;
    for (std::size_t i = 0; i < n; ++i) digest_input << ' ' << frames_[batch[i]].id << ':' << views[i][0].seed << ':' << views[i][1].seed;
    return sha256_hex(digest_input.str());
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (int v = 0; v < 2; ++v) {
      if (!passes[i][v].out.occ.data.allFinite() || !passes[i][v].out.embeddings.data.allFinite()) {
        throw NumericError("non-finite network output at step " + std::to_string(step) + " (frame " +
                           frames_[batch[i]].id + "); batch digest " + batch_digest());
      }
    }
  }

  std::vector<std::array<Act, 2>> d_occ(n);
  std::vector<std::array<Act, 2>> d_emb(n);
  for (auto& arr : d_occ) arr = {Act::Zero(dim, cells), Act::Zero(dim, cells)};
  for (auto& arr : d_emb) arr = {Act::Zero(dim, cells), Act::Zero(dim, cells)};

  StepMetrics m;
  m.step = step;
  m.epoch = epoch;
  const auto budget = static_cast<std::size_t>(config_.pixels_per_objective);

  // One-class term over cells of both views.
  {
    std::vector<CellRef> candidates;
    std::vector<PixelLabel> candidate_labels;
    for (std::size_t i = 0; i < n; ++i) {
      for (int v = 0; v < 2; ++v) {
        for (int c = 0; c < cells; ++c) {
          const LabelCode code = cell_label(frames_[batch[i]].labels, views[i][v], c, gw);
          if (code == LabelCode::Ignore) continue;
          candidates.push_back({static_cast<int>(i), v, c});
          candidate_labels.push_back(code == LabelCode::Positive ? PixelLabel::Positive : PixelLabel::Unlabeled);
        }
      }
    }
    const auto picked = rng.sample_indices(candidates.size(), budget);
    Act z(static_cast<Eigen::Index>(picked.size()), dim);
    std::vector<PixelLabel> labels(picked.size());
    for (std::size_t k = 0; k < picked.size(); ++k) {
      const CellRef& r = candidates[picked[k]];
      z.row(static_cast<Eigen::Index>(k)) = passes[r.image][r.view].out.occ.data.col(r.cell).transpose();
      labels[k] = candidate_labels[picked[k]];
    }
    const OccLoss<S> occ = occ_loss<S>(z, labels, state_.head);
    ++counters_.occ_evaluations;
    m.occ_skipped = occ.skipped;
    m.positives = static_cast<std::int64_t>(occ.positives);
    m.loss_occ = static_cast<double>(occ.value);
    m.term_occ = m.loss_occ;
    if (!occ.skipped) {
      for (std::size_t k = 0; k < picked.size(); ++k) {
        const CellRef& r = candidates[picked[k]];
        d_occ[r.image][r.view].col(r.cell) += occ.grad.row(static_cast<Eigen::Index>(k)).transpose();
      }
    }
  }

  Act prototype_grad = Act::Zero(config_.prototypes, dim);
  const double lambda_clu = config_.effective_lambda_clu();
  const double lambda_con = config_.effective_lambda_con();

  auto gather_pairs = [&](const std::vector<PairRef>& refs, const std::vector<std::size_t>& picked, Act& z1, Act& z2) {
    z1.resize(static_cast<Eigen::Index>(picked.size()), dim);
    z2.resize(static_cast<Eigen::Index>(picked.size()), dim);
    for (std::size_t k = 0; k < picked.size(); ++k) {
      const PairRef& r = refs[picked[k]];
      z1.row(static_cast<Eigen::Index>(k)) = passes[r.image][0].out.embeddings.data.col(r.first).transpose();
      z2.row(static_cast<Eigen::Index>(k)) = passes[r.image][1].out.embeddings.data.col(r.second).transpose();
    }
  };
  auto scatter_pairs = [&](const std::vector<PairRef>& refs, const std::vector<std::size_t>& picked, const Act& g1,
                           const Act& g2, double weight) {
    const auto w = static_cast<S>(weight);
    for (std::size_t k = 0; k < picked.size(); ++k) {
      const PairRef& r = refs[picked[k]];
      d_emb[r.image][0].col(r.first) += w * g1.row(static_cast<Eigen::Index>(k)).transpose();
      d_emb[r.image][1].col(r.second) += w * g2.row(static_cast<Eigen::Index>(k)).transpose();
    }
  };

  if (lambda_clu > 0.0) {
    std::vector<PairRef> refs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < pairs[i].size(); ++k) {
        const LabelCode code = cell_label(frames_[batch[i]].labels, views[i][0], pairs[i].first[k], gw);
        if (code == LabelCode::Unlabeled) refs.push_back({static_cast<int>(i), pairs[i].first[k], pairs[i].second[k]});
      }
    }
    const auto picked = rng.sample_indices(refs.size(), budget);
    if (picked.size() >= 2) {
      Act z1;
      Act z2;
      gather_pairs(refs, picked, z1, z2);
      const SwappedPredictionParams sp{config_.sinkhorn_epsilon, config_.sinkhorn_iters, config_.cluster_temperature};
      const auto clu = swapped_prediction_loss<S>(z1, z2, state_.bank, sp);
      ++counters_.clustering_evaluations;
      m.loss_clu = static_cast<double>(clu.value);
      m.term_clu = lambda_clu * m.loss_clu;
      scatter_pairs(refs, picked, clu.grad_z1, clu.grad_z2, lambda_clu);
      if (epoch >= config_.prototype_freeze_epochs) prototype_grad = static_cast<S>(lambda_clu) * clu.grad_prototypes;
    }
  }

  if (lambda_con > 0.0) {
    std::vector<PairRef> refs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < pairs[i].size(); ++k) {
        refs.push_back({static_cast<int>(i), pairs[i].first[k], pairs[i].second[k]});
      }
    }
    const auto picked = rng.sample_indices(refs.size(), budget);
    if (picked.size() >= 2) {
      Act z1;
      Act z2;
      gather_pairs(refs, picked, z1, z2);
      const auto con = info_nce<S>(z1, z2, static_cast<S>(config_.contrastive_temperature));
      ++counters_.contrastive_evaluations;
      m.loss_con = static_cast<double>(con.value);
      m.term_con = lambda_con * m.loss_con;
      scatter_pairs(refs, picked, con.grad_z1, con.grad_z2, lambda_con);
    }
  }

  m.loss_total = m.term_occ + m.term_clu + m.term_con;
  if (!std::isfinite(m.loss_total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step << " (occ=" << m.loss_occ << ", clu=" << m.loss_clu
        << ", con=" << m.loss_con << "); batch digest " << batch_digest();
    throw NumericError(msg.str());
  }

  std::vector<std::vector<Act>> image_grads(n);
  parallel_for(n, config_.workers, [&](std::size_t i) {
    image_grads[i] = state_.network.zero_gradients();
    for (int v = 0; v < 2; ++v) {
      state_.network.backward(passes[i][v].tape, Act(), d_emb[i][v], d_occ[i][v], image_grads[i]);
    }
    passes[i][0] = {};
    passes[i][1] = {};
  });
  std::vector<Act> grads = std::move(image_grads[0]);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += image_grads[i][p];
  }

  double norm_sq = prototype_grad.squaredNorm();
  for (const auto& g : grads) norm_sq += static_cast<double>(g.squaredNorm());
  if (!std::isfinite(norm_sq)) throw NumericError("non-finite gradient at step " + std::to_string(step));
  const double norm = std::sqrt(norm_sq);
  S scale = S(1);
  if (config_.grad_clip > 0.0 && norm > config_.grad_clip) scale = static_cast<S>(config_.grad_clip / norm);
  m.prototype_grad_norm = static_cast<double>(prototype_grad.norm());

  const double lr = learning_rate_at(step);
  m.lr = lr;
  const auto lr_s = static_cast<S>(lr);
  const auto mu = static_cast<S>(config_.momentum);
  const auto wd = static_cast<S>(config_.weight_decay);
  auto& params = state_.network.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Act g = scale * grads[p];
    if (params[p].name.ends_with(".weight")) g += wd * params[p].value;
    state_.momentum[p] = mu * state_.momentum[p] + g;
    params[p].value -= lr_s * state_.momentum[p];
  }
  if (lambda_clu > 0.0 && epoch >= config_.prototype_freeze_epochs) {
    state_.prototype_momentum = mu * state_.prototype_momentum + scale * prototype_grad;
    state_.bank.prototypes -= lr_s * state_.prototype_momentum;
    state_.bank.renormalize();
  }

  state_.step += 1;
  state_.history.push_back(m);
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

const char* const kHistoryFields[] = {"loss_total", "loss_occ", "loss_clu", "loss_con", "term_occ",
                                      "term_clu",   "term_con", "lr",       "prototype_grad_norm"};

double* history_field(StepMetrics& m, int k) {
  double* fields[] = {&m.loss_total, &m.loss_occ, &m.loss_clu, &m.loss_con, &m.term_occ,
                      &m.term_clu,   &m.term_con, &m.lr,       &m.prototype_grad_norm};
  return fields[k];
}

}  // namespace

template <typename S>
RecordFile Trainer<S>::to_records() const {
  const EncoderConfig& enc = state_.network.config();
  RecordFile rf;
  rf.put_bytes("meta/config", config_.to_json());
  rf.put_i64("meta/encoder", {enc.input_height, enc.input_width, enc.embed_dim, enc.stages, enc.base_width,
                              static_cast<std::int64_t>(enc.seed)});
  rf.put_i64("meta/step", {state_.step, state_.center_initialized ? 1 : 0});
  for (std::size_t p = 0; p < state_.network.parameters().size(); ++p) {
    const auto& param = state_.network.parameters()[p];
    rf.put_matrix<S>("param/" + param.name, param.value);
    rf.put_matrix<S>("momentum/" + param.name, state_.momentum[p]);
  }
  rf.put_matrix<S>("occ/center", RowMatrix<S>(state_.head.center));
  rf.put_matrix<S>("cluster/prototypes", state_.bank.prototypes);
  rf.put_matrix<S>("cluster/momentum", state_.prototype_momentum);

  std::vector<std::int64_t> steps;
  std::vector<std::int64_t> epochs;
  std::vector<std::int64_t> skipped;
  std::vector<std::int64_t> positives;
  for (const auto& m : state_.history) {
    steps.push_back(m.step);
    epochs.push_back(m.epoch);
    skipped.push_back(m.occ_skipped ? 1 : 0);
    positives.push_back(m.positives);
  }
  rf.put_i64("history/step", steps);
  rf.put_i64("history/epoch", epochs);
  rf.put_i64("history/occ_skipped", skipped);
  rf.put_i64("history/positives", positives);
  for (int k = 0; k < static_cast<int>(std::size(kHistoryFields)); ++k) {
    std::vector<double> values;
    for (auto m : state_.history) values.push_back(*history_field(m, k));
    rf.put_f64(std::string("history/") + kHistoryFields[k], values);
  }
  return rf;
}

template <typename S>
void Trainer<S>::save(const fs::path& path) const {
  to_records().write(path);
}

template <typename S>
Trainer<S> Trainer<S>::resume(const fs::path& checkpoint, TrainConfig config, std::vector<TrainingFrame> frames) {
  const RecordFile rf = RecordFile::read(checkpoint);
  const TrainConfig stored = TrainConfig::from_json(rf.get_bytes("meta/config"), checkpoint.string());
  const auto diffs = config_differences(stored, config);
  if (!diffs.empty()) {
    std::string msg = "config mismatch with checkpoint " + checkpoint.string() + ":";
    for (const auto& d : diffs) msg += " " + d + ";";
    throw ConfigMismatchError(msg);
  }
  Trainer trainer(std::move(config), std::move(frames));
  auto& st = trainer.state_;
  auto load = [&](const std::string& name, RowMatrix<S>& dst) {
    RowMatrix<S> value = rf.get_matrix<S>(name);
    if (value.rows() != dst.rows() || value.cols() != dst.cols()) {
      throw DataError("checkpoint record '" + name + "' has an unexpected shape");
    }
    dst = std::move(value);
  };
  for (std::size_t p = 0; p < st.network.parameters().size(); ++p) {
    auto& param = st.network.parameters()[p];
    load("param/" + param.name, param.value);
    load("momentum/" + param.name, st.momentum[p]);
  }
  RowMatrix<S> center = RowMatrix<S>(st.head.center);
  load("occ/center", center);
  st.head.center = center.col(0);
  load("cluster/prototypes", st.bank.prototypes);
  load("cluster/momentum", st.prototype_momentum);
  const auto meta = rf.get_i64("meta/step");
  if (meta.size() != 2) throw DataError("checkpoint record 'meta/step' is malformed");
  st.step = meta[0];
  st.center_initialized = meta[1] != 0;

  const auto steps = rf.get_i64("history/step");
  const auto epochs = rf.get_i64("history/epoch");
  const auto skipped = rf.get_i64("history/occ_skipped");
  const auto positives = rf.get_i64("history/positives");
  std::vector<std::vector<double>> fields;
  for (const char* name : kHistoryFields) fields.push_back(rf.get_f64(std::string("history/") + name));
  st.history.resize(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    StepMetrics& m = st.history[i];
    m.step = steps.at(i);
    m.epoch = epochs.at(i);
    m.occ_skipped = skipped.at(i) != 0;
    m.positives = positives.at(i);
    for (std::size_t k = 0; k < fields.size(); ++k) *history_field(m, static_cast<int>(k)) = fields[k].at(i);
  }
  return trainer;
}

// ---------------------------------------------------------------------------
// Driver

namespace {

json metrics_json(const StepMetrics& m) {
  const double now =
      std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  return json{{"step", m.step},         {"epoch", m.epoch},       {"loss_total", m.loss_total},
              {"loss_occ", m.loss_occ}, {"loss_clu", m.loss_clu}, {"loss_con", m.loss_con},
              {"term_occ", m.term_occ}, {"term_clu", m.term_clu}, {"term_con", m.term_con},
              {"lr", m.lr},             {"occ_skipped", m.occ_skipped},
              {"positives", m.positives}, {"prototype_grad_norm", m.prototype_grad_norm},
              {"timestamp", now}};
}

template <typename S>
TrainResult run_training(const TrainConfig& config, std::vector<TrainingFrame> frames, const TrainOptions& options) {
  fs::create_directories(options.out_dir);
  Trainer<S> trainer = options.resume_from.empty()
                           ? Trainer<S>(config, std::move(frames))
                           : Trainer<S>::resume(options.resume_from, config, std::move(frames));
  TrainResult result;
  result.metrics_log = options.out_dir / "metrics.jsonl";
  std::ofstream log(result.metrics_log, options.resume_from.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write " + result.metrics_log.string());

  const std::int64_t spe = trainer.steps_per_epoch();
  std::int64_t executed = 0;
  while (trainer.state().step < trainer.total_steps() && (options.max_steps < 0 || executed < options.max_steps)) {
    const StepMetrics m = trainer.step();
    ++executed;
    log << metrics_json(m).dump() << '\n';
    log.flush();
    if (options.on_step) options.on_step(m);
    const std::int64_t done = trainer.state().step;
    if (config.checkpoint_every > 0 && done % spe == 0 && (done / spe) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03lld.ckpt", static_cast<long long>(done / spe));
      trainer.save(options.out_dir / name);
    }
  }
  result.final_checkpoint = options.out_dir / "final.ckpt";
  trainer.save(result.final_checkpoint);
  result.history = trainer.state().history;
  result.counters = trainer.counters();
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (config.dataset_root.empty()) throw ConfigError("dataset_root is not set");
  std::vector<TrainingFrame> frames = load_training_frames(config.dataset_root);
  if (config.precision == "float64") return run_training<double>(config, std::move(frames), options);
  return run_training<float>(config, std::move(frames), options);
}

template <typename S>
InferenceModel<S> load_inference_model(const RecordFile& rf) {
  const TrainConfig config = TrainConfig::from_json(rf.get_bytes("meta/config"), "checkpoint");
  const auto enc_meta = rf.get_i64("meta/encoder");
  if (enc_meta.size() != 6) throw DataError("checkpoint record 'meta/encoder' is malformed");
  EncoderConfig enc;
  enc.input_height = static_cast<int>(enc_meta[0]);
  enc.input_width = static_cast<int>(enc_meta[1]);
  enc.embed_dim = static_cast<int>(enc_meta[2]);
  enc.stages = static_cast<int>(enc_meta[3]);
  enc.base_width = static_cast<int>(enc_meta[4]);
  enc.seed = static_cast<std::uint64_t>(enc_meta[5]);
  InferenceModel<S> model{Network<S>(enc), {}};
  for (auto& param : model.network.parameters()) {
    RowMatrix<S> value = rf.get_matrix<S>("param/" + param.name);
    if (value.rows() != param.value.rows() || value.cols() != param.value.cols()) {
      throw DataError("checkpoint record 'param/" + param.name + "' has an unexpected shape");
    }
    param.value = std::move(value);
  }
  model.head.center = rf.get_matrix<S>("occ/center").col(0);
  model.head.temperature = static_cast<S>(config.occ_temperature);
  model.head.unlabeled_weight = static_cast<S>(config.occ_unlabeled_weight);
  model.head.margin = static_cast<S>(config.occ_margin);
  return model;
}

namespace {

template <typename S>
std::vector<std::string> predict_with(const RecordFile& rf, const fs::path& dataset_root, const fs::path& pred_dir,
                                      int workers) {
  const InferenceModel<S> model = load_inference_model<S>(rf);
  const DatasetLayout layout{dataset_root};
  const std::vector<std::string> ids = list_png_stems(layout.images_dir());
  if (ids.empty()) throw DataError("no images under " + layout.images_dir().string());
  fs::create_directories(pred_dir);
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const Image8 image = read_png(layout.image_path(ids[i]), 3);
    const auto out = model.network.forward(image_to_tensor<S>(image));
    const TraversabilityMap scores = score_map<S>(out.occ, model.head);
    Image8 gray(scores.width, scores.height, 1);
    for (std::size_t k = 0; k < scores.values.size(); ++k) {
      gray.data[k] = static_cast<std::uint8_t>(std::lround(std::clamp(scores.values[k], 0.0, 1.0) * 255.0));
    }
    write_png(pred_dir / (ids[i] + ".png"), gray);
  });
  return ids;
}

}  // namespace

std::vector<std::string> predict_dataset(const fs::path& checkpoint, const fs::path& dataset_root,
                                         const fs::path& pred_dir, int workers) {
  const RecordFile rf = RecordFile::read(checkpoint);
  const TrainConfig config = TrainConfig::from_json(rf.get_bytes("meta/config"), checkpoint.string());
  if (config.precision == "float64") return predict_with<double>(rf, dataset_root, pred_dir, workers);
  return predict_with<float>(rf, dataset_root, pred_dir, workers);
}

template class Trainer<float>;
template class Trainer<double>;
template InferenceModel<float> load_inference_model<float>(const RecordFile&);
template InferenceModel<double> load_inference_model<double>(const RecordFile&);

}  // namespace trav
