#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trav/image_io.hpp"

namespace trav {

struct CurvePoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrMetrics {
  double best_f1 = 0.0;
  double precision = 0.0;  // at best_f1
  double recall = 0.0;     // at best_f1
  double threshold = 0.0;  // at best_f1
  double auprc = 0.0;
  std::vector<CurvePoint> curve;  // thresholds strictly decreasing
};

/// Mann-Whitney AUROC with ties counted as one half. truth values are 0 or 1.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Sweeps every distinct score as a threshold (positive iff score >= threshold).
PrMetrics pr_metrics(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Intersection over union of {score >= threshold} against the positive set.
double iou_at(std::span<const double> scores, std::span<const std::uint8_t> truth, double threshold = 0.5);

struct EvalReport {
  double auroc = 0.0;
  double auprc = 0.0;
  double best_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
  double iou = 0.0;
  std::vector<CurvePoint> threshold_curve;
  std::int64_t frames = 0;
  std::int64_t pixels = 0;
  std::int64_t positives = 0;
  bool macro = false;

  std::string to_json() const;
  std::string to_table() const;
};

/// Score heatmap (red low, green high) blended onto the frame, or onto gray
/// when `rgb` is null. Pixels ignore-coded in `gt` keep the frame color.
Image8 render_overlay(const Image8* rgb, const Image8& scores, const Image8* gt = nullptr);

/// Metrics over a pooled pixel set.
EvalReport score_pixels(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct EvalOptions {
  std::filesystem::path pred_dir;
  std::filesystem::path gt_dir;
  std::filesystem::path images_dir;  // optional; overlays fall back to gray
  std::filesystem::path out_dir;     // empty = no files written
  bool macro = false;                // per-frame mean instead of pixel pooling
  int workers = 1;
};

/// Scores pred/<id>.png (value/255) against gt/<id>.png (0, 128, 255=ignore).
/// Writes report.json, report.txt and overlays/<id>.png into out_dir.
EvalReport evaluate(const EvalOptions& options);

}  // namespace trav
