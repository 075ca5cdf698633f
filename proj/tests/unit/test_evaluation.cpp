#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trav/errors.hpp"
#include "trav/evaluation.hpp"
#include "trav/image_io.hpp"
#include "trav/rng.hpp"

namespace trav {
namespace {

using Truth = std::vector<std::uint8_t>;

struct Case {
  std::vector<double> scores;
  Truth truth;
};

// Both classes present; scores drawn from a small set so ties are common.
Case random_case(Rng& rng, std::size_t n, int levels) {
  Case c;
  do {
    c.scores.clear();
    c.truth.clear();
    for (std::size_t i = 0; i < n; ++i) {
      c.truth.push_back(rng.uniform() < 0.4 ? 1 : 0);
      const double base = std::floor(rng.uniform() * levels) / levels;
      c.scores.push_back(std::clamp(base + (c.truth.back() ? 0.2 : 0.0), 0.0, 1.0));
    }
  } while (std::count(c.truth.begin(), c.truth.end(), 1) == 0 ||
           std::count(c.truth.begin(), c.truth.end(), 0) == 0);
  return c;
}

TEST(Auroc, HandCases) {
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, Truth{1, 0, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, Truth{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.4, 0.4, 0.4, 0.4, 0.4}, Truth{1, 0, 1, 0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.1, 0.9}, Truth{1, 0}), 0.0);
}

TEST(Auroc, RejectsBadInput) {
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, Truth{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auroc(std::vector<double>{}, Truth{}), UndefinedMetricError);
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, Truth{1}), InputError);
  EXPECT_THROW(pr_metrics(std::vector<double>{0.1, 0.2}, Truth{0, 0}), UndefinedMetricError);
}

TEST(Auroc, MatchesPairEnumeration) {
  Rng rng(20);
  for (int trial = 0; trial < 200; ++trial) {
    const Case c = random_case(rng, 2 + rng.index(199), 1 + trial % 12);
    EXPECT_NEAR(auroc(c.scores, c.truth), oracle::auroc_pairs(c.scores, c.truth), 1e-12);
  }
}

TEST(Auroc, MonotoneTransformInvariance) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Case c = random_case(rng, 150, 9);
    std::vector<double> t(c.scores.size());
    std::transform(c.scores.begin(), c.scores.end(), t.begin(), [](double s) { return std::exp(3.0 * s) - 7.0; });
    EXPECT_EQ(auroc(c.scores, c.truth), auroc(t, c.truth));
  }
}

TEST(Auroc, ComplementSumsToOne) {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const Case c = random_case(rng, 120, 7);
    Truth flipped(c.truth.size());
    std::transform(c.truth.begin(), c.truth.end(), flipped.begin(), [](std::uint8_t v) { return std::uint8_t(1 - v); });
    EXPECT_NEAR(auroc(c.scores, c.truth) + auroc(c.scores, flipped), 1.0, 1e-12);
  }
}

TEST(PrMetrics, PerfectSeparation) {
  const auto pr = pr_metrics(std::vector<double>{0.9, 0.8, 0.3, 0.1}, Truth{1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(pr.best_f1, 1.0);
  EXPECT_DOUBLE_EQ(pr.auprc, 1.0);
  EXPECT_DOUBLE_EQ(pr.threshold, 0.8);
}

TEST(PrMetrics, AllPredictedPositive) {
  // One threshold that labels everything positive.
  const auto pr = pr_metrics(std::vector<double>{0.5, 0.5, 0.5, 0.5}, Truth{1, 0, 1, 0});
  ASSERT_EQ(pr.curve.size(), 1u);
  EXPECT_DOUBLE_EQ(pr.precision, 0.5);
  EXPECT_DOUBLE_EQ(pr.recall, 1.0);
  EXPECT_DOUBLE_EQ(pr.best_f1, 2.0 / 3.0);
}

TEST(PrMetrics, SixElementHandCase) {
  const std::vector<double> s{0.9, 0.7, 0.7, 0.4, 0.2, 0.1};
  const Truth t{1, 0, 1, 1, 0, 0};
  const auto pr = pr_metrics(s, t);
  // thresholds 0.9: P 1 R 1/3; 0.7: P 2/3 R 2/3; 0.4: P 3/4 R 1; 0.2: P 3/5; 0.1: P 1/2
  ASSERT_EQ(pr.curve.size(), 5u);
  EXPECT_DOUBLE_EQ(pr.best_f1, 6.0 / 7.0);
  EXPECT_DOUBLE_EQ(pr.threshold, 0.4);
  EXPECT_NEAR(pr.auprc, 1.0 / 3 + (1.0 / 3) * (2.0 / 3) + (1.0 / 3) * 0.75, 1e-15);
}

TEST(PrMetrics, TieGoesToHigherThreshold) {
  // 0.8 gives P 1 R 1/2 (F1 2/3), 0.2 gives P 1/2 R 1 (F1 2/3).
  const auto pr = pr_metrics(std::vector<double>{0.8, 0.2, 0.2, 0.2}, Truth{1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(pr.best_f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(pr.threshold, 0.8);
}

TEST(PrMetrics, MatchesBruteForceSweep) {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const Case c = random_case(rng, 2 + rng.index(199), 1 + trial % 20);
    const auto pr = pr_metrics(c.scores, c.truth);
    const auto sweep = oracle::threshold_sweep(c.scores, c.truth);
    ASSERT_EQ(pr.curve.size(), sweep.size());
    double auprc = 0.0;
    double prev_recall = 0.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < sweep.size(); ++k) {
      EXPECT_EQ(pr.curve[k].threshold, sweep[k].threshold);
      EXPECT_EQ(pr.curve[k].precision, sweep[k].precision);
      EXPECT_EQ(pr.curve[k].recall, sweep[k].recall);
      if (k > 0) EXPECT_LT(pr.curve[k].threshold, pr.curve[k - 1].threshold);
      auprc += (sweep[k].recall - prev_recall) * sweep[k].precision;
      prev_recall = sweep[k].recall;
      if (sweep[k].f1 > sweep[best].f1) best = k;
    }
    EXPECT_EQ(pr.auprc, auprc);
    EXPECT_EQ(pr.best_f1, sweep[best].f1);
    EXPECT_EQ(pr.threshold, sweep[best].threshold);
    for (double v : {pr.auprc, pr.best_f1, pr.precision, pr.recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Iou, HandCase) {
  // predicted {0, 1, 3}, truth {0, 2, 3}: intersection 2, union 4
  EXPECT_DOUBLE_EQ(iou_at(std::vector<double>{0.9, 0.6, 0.2, 0.5}, Truth{1, 0, 1, 1}), 0.5);
}

class EvaluateDirs : public ::testing::Test {
 protected:
  testing::TempDir dir{"eval"};

  void write_frame(const std::string& id, const Image8& pred, const Image8& gt) {
    std::filesystem::create_directories(dir / "pred");
    std::filesystem::create_directories(dir / "gt");
    write_png(dir / "pred" / (id + ".png"), pred);
    write_png(dir / "gt" / (id + ".png"), gt);
  }

  EvalOptions options() const {
    EvalOptions o;
    o.pred_dir = dir / "pred";
    o.gt_dir = dir / "gt";
    o.out_dir = dir / "out";
    return o;
  }
};

Image8 striped_gt(int w, int h, int offset) {
  Image8 gt(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) gt.at(y, x) = ((x + offset) / 3) % 2 ? kMaskPositive : 0;
  }
  gt.at(0, 0) = kMaskIgnore;
  return gt;
}

Image8 pred_from(const Image8& gt, bool invert) {
  Image8 p(gt.width, gt.height, 1);
  for (std::size_t k = 0; k < gt.data.size(); ++k) {
    const bool pos = gt.data[k] == kMaskPositive;
    p.data[k] = (pos != invert) ? 255 : 0;
  }
  return p;
}

TEST_F(EvaluateDirs, PerfectPredictions) {
  for (int i = 0; i < 3; ++i) {
    const Image8 gt = striped_gt(12, 8, i);
    write_frame("f" + std::to_string(i), pred_from(gt, false), gt);
  }
  const EvalReport r = evaluate(options());
  EXPECT_DOUBLE_EQ(r.auroc, 1.0);
  EXPECT_DOUBLE_EQ(r.auprc, 1.0);
  EXPECT_DOUBLE_EQ(r.best_f1, 1.0);
  EXPECT_DOUBLE_EQ(r.iou, 1.0);
  EXPECT_EQ(r.frames, 3);
  EXPECT_EQ(r.pixels, 3 * (12 * 8 - 1));
  EXPECT_TRUE(std::filesystem::is_regular_file(dir / "out" / "report.json"));
  EXPECT_TRUE(std::filesystem::is_regular_file(dir / "out" / "report.txt"));
  EXPECT_TRUE(std::filesystem::is_regular_file(dir / "out" / "overlays" / "f2.png"));
  const EvalReport macro = [&] {
    EvalOptions o = options();
    o.macro = true;
    o.out_dir.clear();
    return evaluate(o);
  }();
  EXPECT_TRUE(macro.macro);
  EXPECT_DOUBLE_EQ(macro.auroc, 1.0);
}

TEST_F(EvaluateDirs, InvertedPredictions) {
  const Image8 gt = striped_gt(12, 8, 1);
  write_frame("a", pred_from(gt, true), gt);
  EXPECT_DOUBLE_EQ(evaluate(options()).auroc, 0.0);
}

TEST_F(EvaluateDirs, AllIgnoredIsUndefined) {
  Image8 gt(6, 4, 1);
  std::fill(gt.data.begin(), gt.data.end(), kMaskIgnore);
  write_frame("a", Image8(6, 4, 1), gt);
  EXPECT_THROW(evaluate(options()), UndefinedMetricError);
}

TEST_F(EvaluateDirs, MismatchListsMissingIds) {
  const Image8 gt = striped_gt(6, 4, 0);
  write_frame("a", pred_from(gt, false), gt);
  write_frame("b", pred_from(gt, false), gt);
  std::filesystem::remove(dir / "pred" / "b.png");
  write_png(dir / "pred" / "c.png", gt);
  try {
    evaluate(options());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("missing predictions for [b]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("missing ground truth for [c]"), std::string::npos) << msg;
  }
}

TEST(Overlay, IgnoredPixelsKeepFrameColor) {
  Image8 rgb(2, 1, 3);
  rgb.data = {10, 20, 30, 40, 50, 60};
  Image8 pred(2, 1, 1);
  pred.data = {255, 0};
  Image8 gt(2, 1, 1);
  gt.data = {kMaskPositive, kMaskIgnore};
  const Image8 out = render_overlay(&rgb, pred, &gt);
  EXPECT_EQ(out.at(0, 1, 0), 40);
  EXPECT_EQ(out.at(0, 1, 2), 60);
  EXPECT_EQ(out.at(0, 0, 0), 5);
  EXPECT_EQ(out.at(0, 0, 1), 138);
}

}  // namespace
}  // namespace trav
