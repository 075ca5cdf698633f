#include "trav/cli.hpp"

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "trav/config.hpp"
#include "trav/dataset.hpp"
#include "trav/digest.hpp"
#include "trav/errors.hpp"
#include "trav/evaluation.hpp"
#include "trav/labels.hpp"
#include "trav/pipeline.hpp"
#include "trav/synthworld.hpp"

namespace trav::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
  sub->add_option("--config", c.config_path, "flat JSON config file");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--set", c.overrides, "config override key=value (repeatable)")->take_all();
  if (with_seed) sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--workers", c.workers, "parallel workers (1 for deterministic runs)");
}

std::string format_value(double v) { return format_double(v); }

// Defaults, then the config file, then typed flags, then --set overrides.
void resolve(const std::vector<ConfigField>& fields, const Common& c,
             const std::vector<std::pair<std::string, std::string>>& typed) {
  if (!c.config_path.empty()) {
    if (!fs::is_regular_file(c.config_path)) throw DataError("config file not found: " + c.config_path);
    fields_from_json(fields, read_text_file(c.config_path), c.config_path);
  }
  if (c.seed) set_field(fields, "seed", std::to_string(*c.seed));
  if (c.workers) set_field(fields, "workers", std::to_string(*c.workers));
  for (const auto& [key, value] : typed) set_field(fields, key, value);
  for (const auto& o : c.overrides) {
    const auto [key, value] = split_override(o);
    set_field(fields, key, value);
  }
}

void write_run_json(const fs::path& dir, const std::string& command, const std::string& config_json,
                    const std::vector<fs::path>& inputs) {
  fs::create_directories(dir);
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config"] = json::parse(config_json);
  j["inputs"] = json::array();
  for (const auto& p : inputs) j["inputs"].push_back(p.generic_string());
  j["content_digest"] = content_digest(inputs);
  write_text_file(dir / "run.json", j.dump(2) + "\n");
}

fs::path require_dir(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
  return fs::path(value);
}

// ---------------------------------------------------------------------------

struct SynthSettings {
  WorldSpec spec;
  int workers = 1;

  std::vector<ConfigField> fields() {
    return {{"seed", &spec.seed},
            {"traversable_fraction", &spec.traversable_fraction},
            {"world_size", &spec.world_size},
            {"cell_size", &spec.cell_size},
            {"blob_scale", &spec.blob_scale},
            {"corridor_half_width", &spec.corridor_half_width},
            {"speed", &spec.speed},
            {"pose_rate", &spec.pose_rate},
            {"frame_interval", &spec.frame_interval},
            {"tail_seconds", &spec.tail_seconds},
            {"turn_rate", &spec.turn_rate},
            {"camera_height", &spec.camera_height},
            {"camera_pitch_deg", &spec.camera_pitch_deg},
            {"image_width", &spec.image_width},
            {"image_height", &spec.image_height},
            {"focal", &spec.focal},
            {"max_range", &spec.max_range},
            {"train_frames", &spec.train_frames},
            {"heldout_frames", &spec.heldout_frames},
            {"shifted_frames", &spec.shifted_frames},
            {"brightness_jitter", &spec.brightness_jitter},
            {"workers", &workers}};
  }
};

int cmd_synth(const Common& c, std::ostream& out) {
  SynthSettings s;
  resolve(s.fields(), c, {});
  const fs::path dir = require_dir(c.out, "--out");
  generate_world(s.spec, dir, s.workers);
  write_run_json(dir, "synth", fields_to_json(s.fields()), {});
  out << "synthetic world written to " << dir.string() << " (" << s.spec.train_frames << " train, "
      << s.spec.heldout_frames << " held-out, " << s.spec.shifted_frames << " shifted frames)\n";
  return kExitOk;
}

struct LabelSettings {
  LabelParams params;

  std::vector<ConfigField> fields() {
    return {{"horizon", &params.horizon},
            {"stride", &params.stride},
            {"footprint_width", &params.footprint.width},
            {"footprint_length", &params.footprint.length},
            {"ground_offset", &params.footprint.ground_offset},
            {"z_near", &params.z_near},
            {"workers", &params.workers}};
  }
};

int cmd_labels(const Common& c, const std::string& data, std::optional<double> horizon, std::optional<double> stride,
               std::ostream& out) {
  LabelSettings s;
  std::vector<std::pair<std::string, std::string>> typed;
  if (horizon) typed.emplace_back("horizon", format_value(*horizon));
  if (stride) typed.emplace_back("stride", format_value(*stride));
  resolve(s.fields(), c, typed);
  const fs::path root = require_dir(data, "--data");
  const DatasetLayout layout{root};
  const std::vector<fs::path> inputs = {layout.images_dir(), layout.poses_file(), layout.calib_file()};
  const DatasetLabelReport report = generate_dataset_labels(root, s.params);
  write_run_json(c.out.empty() ? layout.labels_dir() : fs::path(c.out), "labels", fields_to_json(s.fields()), inputs);
  out << "labeled " << report.labeled.size() << " frames, skipped " << report.skipped.size() << '\n';
  for (const auto& [id, reason] : report.skipped) out << "  skipped " << id << ": " << reason << '\n';
  return kExitOk;
}

int cmd_train(const Common& c, const std::string& data, const std::string& resume, std::int64_t max_steps,
              std::ostream& out) {
  TrainConfig config;
  std::vector<std::pair<std::string, std::string>> typed;
  if (!data.empty()) typed.emplace_back("dataset_root", data);
  resolve(config.fields(), c, typed);
  config.validate();
  if (config.dataset_root.empty()) throw ConfigError("dataset_root is not set (use --data)");
  const fs::path dir = require_dir(c.out, "--out");
  const DatasetLayout layout{config.dataset_root};
  std::vector<fs::path> inputs = {layout.images_dir(), layout.labels_dir()};
  if (!resume.empty()) inputs.emplace_back(resume);
  write_run_json(dir, "train", config.to_json(), inputs);

  TrainOptions options;
  options.out_dir = dir;
  options.resume_from = resume;
  options.max_steps = max_steps;
  std::int64_t last_epoch = -1;
  options.on_step = [&](const StepMetrics& m) {
    if (m.epoch != last_epoch) {
      last_epoch = m.epoch;
      out << "epoch " << m.epoch << " step " << m.step << " loss " << m.loss_total << " (occ " << m.loss_occ
          << ", clu " << m.loss_clu << ", con " << m.loss_con << ")\n";
    }
  };
  const TrainResult result = train(config, options);
  out << "final checkpoint " << result.final_checkpoint.string() << '\n';
  return kExitOk;
}

struct EvalSettings {
  bool macro = false;
  int workers = 1;

  std::vector<ConfigField> fields() { return {{"macro", &macro}, {"workers", &workers}}; }
};

int cmd_eval(const Common& c, std::string pred, std::string gt, const std::string& checkpoint, const std::string& data,
             std::string images, bool macro, std::ostream& out) {
  EvalSettings s;
  std::vector<std::pair<std::string, std::string>> typed;
  if (macro) typed.emplace_back("macro", "true");
  resolve(s.fields(), c, typed);
  const fs::path dir = require_dir(c.out, "--out");
  std::vector<fs::path> inputs;
  if (!checkpoint.empty()) {
    if (data.empty()) throw ConfigError("--checkpoint needs --data");
    if (!pred.empty()) throw ConfigError("--pred and --checkpoint are exclusive");
    const DatasetLayout layout{data};
    pred = (dir / "pred").string();
    if (gt.empty()) gt = layout.gt_dir().string();
    if (images.empty()) images = layout.images_dir().string();
    inputs = {checkpoint, layout.images_dir(), gt};
    predict_dataset(checkpoint, data, pred, s.workers);
  } else {
    if (pred.empty() || gt.empty()) throw ConfigError("eval needs --pred and --gt (or --checkpoint and --data)");
    if (images.empty() && !data.empty()) images = DatasetLayout{data}.images_dir().string();
    inputs = {pred, gt};
  }
  EvalOptions options;
  options.pred_dir = pred;
  options.gt_dir = gt;
  options.images_dir = images;
  options.out_dir = dir;
  options.macro = s.macro;
  options.workers = s.workers;
  const EvalReport report = evaluate(options);
  write_run_json(dir, "eval", fields_to_json(s.fields()), inputs);
  out << report.to_table();
  return kExitOk;
}

struct VizSettings {
  int workers = 1;

  std::vector<ConfigField> fields() { return {{"workers", &workers}}; }
};

int cmd_viz(const Common& c, const std::string& data, const std::string& checkpoint, std::string pred,
            std::ostream& out) {
  VizSettings s;
  resolve(s.fields(), c, {});
  const fs::path dir = require_dir(c.out, "--out");
  const DatasetLayout layout{require_dir(data, "--data")};
  std::vector<fs::path> inputs = {layout.images_dir()};
  if (!checkpoint.empty()) {
    pred = (dir / "pred").string();
    predict_dataset(checkpoint, layout.root, pred, s.workers);
    inputs.emplace_back(checkpoint);
  } else if (!pred.empty()) {
    inputs.emplace_back(pred);
  } else {
    inputs.emplace_back(layout.labels_dir());
  }
  fs::create_directories(dir / "overlays");
  std::size_t written = 0;
  for (const auto& id : list_png_stems(layout.images_dir())) {
    const Image8 rgb = read_png(layout.image_path(id), 3);
    Image8 scores;
    if (!pred.empty()) {
      const fs::path p = fs::path(pred) / (id + ".png");
      if (!fs::is_regular_file(p)) throw DataError("missing prediction for frame " + id);
      scores = read_png(p, 1);
    } else {
      if (!fs::is_regular_file(layout.label_path(id))) continue;
      const LabelMask labels = decode_label_mask(read_png(layout.label_path(id), 1));
      scores = Image8(labels.width(), labels.height(), 1);
      for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) scores.at(y, x) = labels.at(y, x) == LabelCode::Positive ? 255 : 0;
      }
    }
    if (scores.width != rgb.width || scores.height != rgb.height) throw DataError("size mismatch for frame " + id);
    write_png(dir / "overlays" / (id + ".png"), render_overlay(&rgb, scores));
    ++written;
  }
  write_run_json(dir, "viz", fields_to_json(s.fields()), inputs);
  out << "wrote " << written << " overlays to " << (dir / "overlays").string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised traversability pipeline: synth, labels, train, eval, viz", "trav"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  std::string data;
  std::string resume;
  std::string pred;
  std::string gt;
  std::string checkpoint;
  std::string images;
  std::optional<double> horizon;
  std::optional<double> stride;
  std::int64_t max_steps = -1;
  bool macro = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic world dataset");
  add_common(synth, common, true);

  CLI::App* labels = app.add_subcommand("labels", "paint self-supervised footprint labels");
  add_common(labels, common, false);
  labels->add_option("--data", data, "dataset root")->required();
  labels->add_option("--horizon", horizon, "seconds of future trajectory");
  labels->add_option("--stride", stride, "seconds between footprint samples");

  CLI::App* train_cmd = app.add_subcommand("train", "train the traversability model");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--data", data, "dataset root (sets dataset_root)");
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");
  train_cmd->add_option("--max-steps", max_steps, "stop after this many steps");

  CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
  add_common(eval, common, false);
  eval->add_option("--pred", pred, "prediction directory");
  eval->add_option("--gt", gt, "ground-truth directory");
  eval->add_option("--checkpoint", checkpoint, "predict with this checkpoint first");
  eval->add_option("--data", data, "dataset root used with --checkpoint");
  eval->add_option("--images", images, "frames for overlays");
  eval->add_flag("--macro", macro, "average metrics per frame");

  CLI::App* viz = app.add_subcommand("viz", "render score or label overlays");
  add_common(viz, common, false);
  viz->add_option("--data", data, "dataset root")->required();
  viz->add_option("--checkpoint", checkpoint, "predict with this checkpoint");
  viz->add_option("--pred", pred, "existing prediction directory");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, out);
    if (labels->parsed()) return cmd_labels(common, data, horizon, stride, out);
    if (train_cmd->parsed()) return cmd_train(common, data, resume, max_steps, out);
    if (eval->parsed()) return cmd_eval(common, pred, gt, checkpoint, data, images, macro, out);
    if (viz->parsed()) return cmd_viz(common, data, checkpoint, pred, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << "no subcommand given\n";
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace trav::cli
