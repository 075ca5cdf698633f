#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "trav/augment.hpp"
#include "trav/checkpoint.hpp"
#include "trav/config.hpp"
#include "trav/image_io.hpp"
#include "trav/model.hpp"
#include "trav/raster.hpp"

namespace trav {

/// Training configuration. Serialized as a flat JSON object with exactly these keys.
struct TrainConfig {
  std::string dataset_root;
  int batch_size = 8;
  int epochs = 20;
  double learning_rate = 0.01;
  std::string lr_schedule = "cosine";  // or "constant"
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double grad_clip = 5.0;  // global L2 norm; 0 disables
  double lambda_clu = 1.0;
  double lambda_con = 1.0;
  bool occ_only = false;
  bool no_clustering = false;
  bool no_contrastive = false;
  std::uint64_t seed = 0;
  std::string precision = "float32";  // or "float64"

  int embed_dim = 32;
  int stages = 4;
  int base_width = 16;

  int pixels_per_objective = 1024;
  double occ_temperature = 1.0;
  double occ_unlabeled_weight = 0.1;
  double occ_margin = 1.0;
  int prototypes = 16;
  double sinkhorn_epsilon = 0.05;
  int sinkhorn_iters = 3;
  double cluster_temperature = 0.1;
  double contrastive_temperature = 0.2;
  int prototype_freeze_epochs = 1;

  double crop_scale_min = 0.4;
  double crop_scale_max = 1.0;
  double flip_probability = 0.5;
  double color_jitter = 0.4;

  int checkpoint_every = 0;  // epochs between intermediate checkpoints; 0 = final only
  int workers = 1;

  std::vector<ConfigField> fields();
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text, const std::string& origin = "config");

  /// Ablation flags force their weights to zero (occ_only zeroes both).
  double effective_lambda_clu() const;
  double effective_lambda_con() const;
  bool clustering_enabled() const { return effective_lambda_clu() > 0.0; }
  bool contrastive_enabled() const { return effective_lambda_con() > 0.0; }

  void validate() const;
};

/// Keys that may differ between a checkpoint and the config resuming it.
bool is_resume_mutable_key(const std::string& key);

/// Field-level differences between two configs over guarded keys, formatted
/// as "key (checkpoint=..., requested=...)".
std::vector<std::string> config_differences(const TrainConfig& checkpoint, const TrainConfig& requested);

struct TrainingFrame {
  std::string id;
  Image8 image;
  LabelMask labels;
};

/// Frames listed in labels/manifest.json with their images and label masks.
/// Throws DataError when labels are missing.
std::vector<TrainingFrame> load_training_frames(const std::filesystem::path& dataset_root);

struct StepMetrics {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double loss_total = 0.0;
  double loss_occ = 0.0;
  double loss_clu = 0.0;
  double loss_con = 0.0;
  double term_occ = 0.0;  // weighted contributions; loss_total is their sum
  double term_clu = 0.0;
  double term_con = 0.0;
  double lr = 0.0;
  double prototype_grad_norm = 0.0;
  bool occ_skipped = false;
  std::int64_t positives = 0;
};

struct TrainCounters {
  std::int64_t occ_evaluations = 0;
  std::int64_t clustering_evaluations = 0;
  std::int64_t contrastive_evaluations = 0;
};

template <typename S>
struct TrainState {
  Network<S> network;
  PrototypeBank<S> bank;
  OCCHead<S> head;
  bool center_initialized = false;
  std::vector<RowMatrix<S>> momentum;  // one per network parameter
  RowMatrix<S> prototype_momentum;
  std::int64_t step = 0;
  std::vector<StepMetrics> history;

  explicit TrainState(const EncoderConfig& config) : network(config) {}
};

template <typename S>
class Trainer {
 public:
  Trainer(TrainConfig config, std::vector<TrainingFrame> frames);

  /// Restores a checkpoint; throws ConfigMismatchError listing differing guarded keys.
  static Trainer resume(const std::filesystem::path& checkpoint, TrainConfig config, std::vector<TrainingFrame> frames);

  /// Sets the OCC center to the mean projected feature of positive cells over
  /// one pass of the training frames; a no-op once initialized.
  void initialize_center();

  StepMetrics step();
  std::int64_t steps_per_epoch() const;
  std::int64_t total_steps() const;

  RecordFile to_records() const;
  void save(const std::filesystem::path& path) const;

  const TrainState<S>& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  const TrainCounters& counters() const { return counters_; }

 private:
  Trainer(TrainConfig config, std::vector<TrainingFrame>&& frames, EncoderConfig encoder);

  double learning_rate_at(std::int64_t step) const;

  TrainConfig config_;
  std::vector<TrainingFrame> frames_;
  TrainState<S> state_;
  TrainCounters counters_;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_log;
  std::vector<StepMetrics> history;
  TrainCounters counters;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::filesystem::path resume_from;  // empty = fresh run
  std::int64_t max_steps = -1;        // stop early (for tests); -1 = run all epochs
  std::function<void(const StepMetrics&)> on_step;
};

/// Trains to completion, writing metrics.jsonl, periodic checkpoints and
/// final.ckpt into out_dir. NaN losses throw NumericError with a batch digest.
TrainResult train(const TrainConfig& config, const TrainOptions& options);

/// Network + OCC head restored from a checkpoint for inference.
template <typename S>
struct InferenceModel {
  Network<S> network;
  OCCHead<S> head;
};

template <typename S>
InferenceModel<S> load_inference_model(const RecordFile& records);

/// Writes pred/<frame_id>.png (score * 255) for every image of a dataset.
std::vector<std::string> predict_dataset(const std::filesystem::path& checkpoint,
                                         const std::filesystem::path& dataset_root,
                                         const std::filesystem::path& pred_dir, int workers = 1);

}  // namespace trav
