#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadscene/linalg.hpp"

namespace cadscene {

/// Non-interpolated average precision. Items are ranked by descending
/// score; items with equal scores form one group that is retrieved
/// together, so every positive in a group gets the precision measured at
/// the end of that group. Throws InvalidArgument without positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct ClassMetric {
  int class_id = 0;
  std::string name;
  double value = 0.0;
  std::size_t positives = 0;
};

struct EvalReport {
  std::vector<ClassMetric> ap;       // evaluated foreground classes
  std::vector<int> skipped_classes;  // absent from the ground truth
  double amap = 0.0;
  std::vector<ClassMetric> iou;
  std::optional<double> miou;
  std::size_t points = 0;
  std::size_t scenes = 0;

  /// Human-readable table plus summary line.
  void write_text(std::ostream& out) const;
  /// One "key=value" per line.
  void write_key_values(std::ostream& out) const;
};

enum class ApPooling { kPooled, kPerScene };

/// AP per foreground class from the matching probability column, with
/// binary labels gt == class. AmAP is the mean over classes that occur in
/// the ground truth; absent classes are listed in skipped_classes.
EvalReport evaluate_salient(const Matrix& probabilities, std::span<const int> gt_labels,
                            const std::vector<int>& foreground_classes,
                            const std::vector<std::string>& class_names = {});

/// Multi-scene evaluation. kPooled concatenates every scene's points;
/// kPerScene averages each class's AP over the scenes in which it occurs.
EvalReport evaluate_salient(const std::vector<Matrix>& probabilities,
                            const std::vector<std::vector<int>>& gt_labels,
                            const std::vector<int>& foreground_classes, ApPooling pooling,
                            const std::vector<std::string>& class_names = {});

struct IouResult {
  std::vector<ClassMetric> per_class;  // classes occurring in gt or prediction
  double miou = 0.0;
};

/// IoU_c = |pred = c and gt = c| / |pred = c or gt = c| for each listed class
/// present in either labelling; mIoU is their mean.
IouResult mean_iou(std::span<const int> predicted, std::span<const int> gt,
                   const std::vector<int>& classes);

/// Row-wise argmax.
std::vector<int> argmax_labels(const Matrix& probabilities);

}  // namespace cadscene
