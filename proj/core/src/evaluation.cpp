#include "trav/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "json.hpp"
#include "trav/dataset.hpp"
#include "trav/digest.hpp"
#include "trav/errors.hpp"
#include "trav/image_io.hpp"
#include "trav/parallel.hpp"

namespace trav {

namespace fs = std::filesystem;

namespace {

struct ClassCounts {
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const std::uint8_t> truth, const char* what) {
  if (scores.size() != truth.size()) throw InputError(std::string(what) + ": scores and truth differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] > 1) throw InputError(std::string(what) + ": truth values must be 0 or 1");
    if (!std::isfinite(scores[i])) throw InputError(std::string(what) + ": non-finite score");
    (truth[i] ? c.positives : c.negatives) += 1;
  }
  if (c.positives == 0 || c.negatives == 0) {
    throw UndefinedMetricError(std::string(what) + " is undefined unless both classes are present");
  }
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  const ClassCounts counts = check_inputs(scores, truth, "auroc");
  const auto order = order_by_score(scores, false);
  double u = 0.0;
  std::int64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::int64_t pos = 0;
    std::int64_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] ? pos : neg) += 1;
      ++j;
    }
    u += static_cast<double>(pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(neg));
    negatives_below += neg;
    i = j;
  }
  return u / (static_cast<double>(counts.positives) * static_cast<double>(counts.negatives));
}

PrMetrics pr_metrics(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  const ClassCounts counts = check_inputs(scores, truth, "pr_metrics");
  const auto order = order_by_score(scores, true);
  PrMetrics out;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  double prev_recall = 0.0;
  bool have_best = false;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == threshold) {
      (truth[order[j]] ? tp : fp) += 1;
      ++j;
    }
    i = j;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(counts.positives);
    out.curve.push_back({threshold, precision, recall});
    out.auprc += (recall - prev_recall) * precision;
    prev_recall = recall;
    const double f1 = tp == 0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    // Descending sweep: only a strictly better F1 moves the choice to a lower threshold.
    if (!have_best || f1 > out.best_f1) {
      have_best = true;
      out.best_f1 = f1;
      out.precision = precision;
      out.recall = recall;
      out.threshold = threshold;
    }
  }
  return out;
}

double iou_at(std::span<const double> scores, std::span<const std::uint8_t> truth, double threshold) {
  check_inputs(scores, truth, "iou");
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    inter += (predicted && truth[i]) ? 1 : 0;
    uni += (predicted || truth[i]) ? 1 : 0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

EvalReport score_pixels(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.empty()) throw UndefinedMetricError("no pixels to evaluate (all ignore-coded?)");
  EvalReport r;
  r.auroc = auroc(scores, truth);
  PrMetrics pr = pr_metrics(scores, truth);
  r.auprc = pr.auprc;
  r.best_f1 = pr.best_f1;
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.threshold = pr.threshold;
  r.threshold_curve = std::move(pr.curve);
  r.iou = iou_at(scores, truth, 0.5);
  r.pixels = static_cast<std::int64_t>(scores.size());
  r.positives = std::count(truth.begin(), truth.end(), std::uint8_t{1});
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["aggregation"] = macro ? "macro" : "micro";
  j["auroc"] = auroc;
  j["auprc"] = auprc;
  j["best_f1"] = best_f1;
  j["precision"] = precision;
  j["recall"] = recall;
  j["threshold"] = threshold;
  j["iou"] = iou;
  j["frames"] = frames;
  j["pixels"] = pixels;
  j["positives"] = positives;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : threshold_curve) curve.push_back({p.threshold, p.precision, p.recall});
  j["threshold_curve"] = std::move(curve);
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  const std::pair<const char*, double> rows[] = {{"auroc", auroc},         {"auprc", auprc},
                                                 {"best_f1", best_f1},     {"precision", precision},
                                                 {"recall", recall},       {"threshold", threshold},
                                                 {"iou@0.5", iou}};
  std::string out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-12s %10s\n", "metric", macro ? "macro" : "micro");
  out += line;
  for (const auto& [name, value] : rows) {
    std::snprintf(line, sizeof(line), "%-12s %10.6f\n", name, value);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-12s %10lld\n%-12s %10lld\n", "frames", static_cast<long long>(frames), "pixels",
                static_cast<long long>(pixels));
  out += line;
  return out;
}

namespace {

struct FrameData {
  std::vector<double> scores;
  std::vector<std::uint8_t> truth;
};

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
  return s;
}

}  // namespace

Image8 render_overlay(const Image8* rgb, const Image8& pred, const Image8* gt) {
  Image8 out(pred.width, pred.height, 3);
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      double base[3];
      for (int c = 0; c < 3; ++c) base[c] = rgb ? rgb->at(y, x, c) : 96.0;
      const double s = pred.at(y, x) / 255.0;
      const double heat[3] = {255.0 * (1.0 - s), 255.0 * s, 0.0};
      const bool ignored = gt && gt->at(y, x) == kMaskIgnore;
      for (int c = 0; c < 3; ++c) {
        const double v = ignored ? base[c] : 0.5 * base[c] + 0.5 * heat[c];
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

EvalReport evaluate(const EvalOptions& options) {
  if (!fs::is_directory(options.pred_dir)) throw DataError("prediction directory not found: " + options.pred_dir.string());
  if (!fs::is_directory(options.gt_dir)) throw DataError("ground-truth directory not found: " + options.gt_dir.string());
  const auto pred_ids = list_png_stems(options.pred_dir);
  const auto gt_ids = list_png_stems(options.gt_dir);
  std::vector<std::string> no_pred;
  std::vector<std::string> no_gt;
  std::set_difference(gt_ids.begin(), gt_ids.end(), pred_ids.begin(), pred_ids.end(), std::back_inserter(no_pred));
  std::set_difference(pred_ids.begin(), pred_ids.end(), gt_ids.begin(), gt_ids.end(), std::back_inserter(no_gt));
  if (!no_pred.empty() || !no_gt.empty()) {
    std::string msg = "frame sets differ:";
    if (!no_pred.empty()) msg += " missing predictions for [" + join_ids(no_pred) + "]";
    if (!no_gt.empty()) msg += " missing ground truth for [" + join_ids(no_gt) + "]";
    throw DataError(msg);
  }
  if (gt_ids.empty()) throw UndefinedMetricError("no frames to evaluate in " + options.gt_dir.string());

  const bool write = !options.out_dir.empty();
  if (write) fs::create_directories(options.out_dir / "overlays");

  std::vector<FrameData> frames(gt_ids.size());
  parallel_for(gt_ids.size(), options.workers, [&](std::size_t i) {
    const std::string& id = gt_ids[i];
    const Image8 pred = read_png(options.pred_dir / (id + ".png"), 1);
    const Image8 gt = read_png(options.gt_dir / (id + ".png"), 1);
    if (pred.width != gt.width || pred.height != gt.height) {
      throw DataError("prediction and ground truth differ in size for frame " + id);
    }
    FrameData& fd = frames[i];
    for (std::size_t k = 0; k < gt.data.size(); ++k) {
      const std::uint8_t g = gt.data[k];
      if (g == kMaskIgnore) continue;
      if (g != 0 && g != kMaskPositive) {
        throw DataError("ground truth for frame " + id + " has value " + std::to_string(g) + " (expected 0, 128, 255)");
      }
      fd.scores.push_back(pred.data[k] / 255.0);
      fd.truth.push_back(g == kMaskPositive ? 1 : 0);
    }
    if (write) {
      Image8 rgb;
      const fs::path image_path = options.images_dir / (id + ".png");
      const bool have_rgb = !options.images_dir.empty() && fs::is_regular_file(image_path);
      if (have_rgb) {
        rgb = read_png(image_path, 3);
        if (rgb.width != gt.width || rgb.height != gt.height) throw DataError("image size differs for frame " + id);
      }
      write_png(options.out_dir / "overlays" / (id + ".png"), render_overlay(have_rgb ? &rgb : nullptr, pred, &gt));
    }
  });

  FrameData pooled;
  for (const auto& fd : frames) {
    pooled.scores.insert(pooled.scores.end(), fd.scores.begin(), fd.scores.end());
    pooled.truth.insert(pooled.truth.end(), fd.truth.begin(), fd.truth.end());
  }
  EvalReport report = score_pixels(pooled.scores, pooled.truth);
  report.frames = static_cast<std::int64_t>(frames.size());

  if (options.macro) {
    EvalReport mean;
    int used = 0;
    for (const auto& fd : frames) {
      const auto pos = std::count(fd.truth.begin(), fd.truth.end(), std::uint8_t{1});
      if (pos == 0 || pos == static_cast<std::ptrdiff_t>(fd.truth.size())) continue;
      const EvalReport r = score_pixels(fd.scores, fd.truth);
      mean.auroc += r.auroc;
      mean.auprc += r.auprc;
      mean.best_f1 += r.best_f1;
      mean.precision += r.precision;
      mean.recall += r.recall;
      mean.threshold += r.threshold;
      mean.iou += r.iou;
      ++used;
    }
    if (used == 0) throw UndefinedMetricError("no frame has both classes; macro metrics are undefined");
    report.auroc = mean.auroc / used;
    report.auprc = mean.auprc / used;
    report.best_f1 = mean.best_f1 / used;
    report.precision = mean.precision / used;
    report.recall = mean.recall / used;
    report.threshold = mean.threshold / used;
    report.iou = mean.iou / used;
    report.macro = true;
  }

  if (write) {
    write_text_file(options.out_dir / "report.json", report.to_json());
    write_text_file(options.out_dir / "report.txt", report.to_table());
  }
  return report;
}

}  // namespace trav
