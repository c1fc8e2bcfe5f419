#include "cadscene/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "cadscene/errors.hpp"

namespace cadscene {

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("average_precision: scores and labels differ in length");
  }
  std::size_t total_pos = 0;
  for (int y : labels) total_pos += y != 0 ? 1 : 0;
  if (total_pos == 0) throw InvalidArgument("average_precision: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  std::size_t retrieved = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_pos += labels[order[j]] != 0 ? 1 : 0;
      ++j;
    }
    retrieved += j - i;
    hits += group_pos;
    sum += static_cast<double>(group_pos) * static_cast<double>(hits) /
           static_cast<double>(retrieved);
    i = j;
  }
  return sum / static_cast<double>(total_pos);
}

namespace {

std::string class_label(int c, const std::vector<std::string>& names) {
  if (c >= 0 && c < static_cast<int>(names.size())) return names[static_cast<std::size_t>(c)];
  return "class_" + std::to_string(c);
}

void check_columns(const Matrix& probabilities, const std::vector<int>& classes) {
  for (int c : classes) {
    if (c < 0 || c >= probabilities.cols()) {
      throw DimensionError("evaluate_salient: no probability column for class " +
                           std::to_string(c));
    }
  }
}

}  // namespace

EvalReport evaluate_salient(const Matrix& probabilities, std::span<const int> gt_labels,
                            const std::vector<int>& foreground_classes,
                            const std::vector<std::string>& class_names) {
  return evaluate_salient(std::vector<Matrix>{probabilities},
                          std::vector<std::vector<int>>{{gt_labels.begin(), gt_labels.end()}},
                          foreground_classes, ApPooling::kPooled, class_names);
}

EvalReport evaluate_salient(const std::vector<Matrix>& probabilities,
                            const std::vector<std::vector<int>>& gt_labels,
                            const std::vector<int>& foreground_classes, ApPooling pooling,
                            const std::vector<std::string>& class_names) {
  if (probabilities.size() != gt_labels.size()) {
    throw DimensionError("evaluate_salient: one ground-truth array per probability table");
  }
  EvalReport report;
  report.scenes = probabilities.size();
  for (std::size_t s = 0; s < probabilities.size(); ++s) {
    check_columns(probabilities[s], foreground_classes);
    if (probabilities[s].rows() != static_cast<Eigen::Index>(gt_labels[s].size())) {
      throw DimensionError("evaluate_salient: scene " + std::to_string(s) +
                           " has mismatched point counts");
    }
    report.points += gt_labels[s].size();
  }

  for (int c : foreground_classes) {
    ClassMetric metric{c, class_label(c, class_names), 0.0, 0};
    if (pooling == ApPooling::kPooled) {
      std::vector<double> scores;
      std::vector<int> binary;
      for (std::size_t s = 0; s < probabilities.size(); ++s) {
        for (std::size_t i = 0; i < gt_labels[s].size(); ++i) {
          scores.push_back(probabilities[s](static_cast<Eigen::Index>(i), c));
          binary.push_back(gt_labels[s][i] == c ? 1 : 0);
          metric.positives += gt_labels[s][i] == c ? 1 : 0;
        }
      }
      if (metric.positives == 0) {
        report.skipped_classes.push_back(c);
        continue;
      }
      metric.value = average_precision(scores, binary);
    } else {
      double total = 0.0;
      int scenes_with_class = 0;
      for (std::size_t s = 0; s < probabilities.size(); ++s) {
        std::vector<double> scores;
        std::vector<int> binary;
        std::size_t pos = 0;
        for (std::size_t i = 0; i < gt_labels[s].size(); ++i) {
          scores.push_back(probabilities[s](static_cast<Eigen::Index>(i), c));
          binary.push_back(gt_labels[s][i] == c ? 1 : 0);
          pos += gt_labels[s][i] == c ? 1 : 0;
        }
        if (pos == 0) continue;
        metric.positives += pos;
        total += average_precision(scores, binary);
        ++scenes_with_class;
      }
      if (scenes_with_class == 0) {
        report.skipped_classes.push_back(c);
        continue;
      }
      metric.value = total / scenes_with_class;
    }
    report.ap.push_back(metric);
  }

  if (!report.ap.empty()) {
    double sum = 0.0;
    for (const auto& m : report.ap) sum += m.value;
    report.amap = sum / static_cast<double>(report.ap.size());
  }
  return report;
}

IouResult mean_iou(std::span<const int> predicted, std::span<const int> gt,
                   const std::vector<int>& classes) {
  if (predicted.size() != gt.size()) throw DimensionError("mean_iou: length mismatch");
  IouResult result;
  double sum = 0.0;
  for (int c : classes) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool p = predicted[i] == c;
      const bool g = gt[i] == c;
      inter += (p && g) ? 1 : 0;
      uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) continue;
    std::size_t positives = 0;
    for (int g : gt) positives += g == c ? 1 : 0;
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    result.per_class.push_back({c, "", iou, positives});
    sum += iou;
  }
  if (!result.per_class.empty()) result.miou = sum / static_cast<double>(result.per_class.size());
  return result;
}

std::vector<int> argmax_labels(const Matrix& probabilities) {
  std::vector<int> out(static_cast<std::size_t>(probabilities.rows()));
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index best = 0;
    probabilities.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

void EvalReport::write_text(std::ostream& out) const {
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(20) << "class" << std::right << std::setw(10) << "AP"
      << std::setw(12) << "positives" << '\n';
  for (const auto& m : ap) {
    out << std::left << std::setw(20) << m.name << std::right << std::setw(10) << m.value
        << std::setw(12) << m.positives << '\n';
  }
  for (int c : skipped_classes) {
    out << std::left << std::setw(20) << ("class_" + std::to_string(c)) << std::right
        << std::setw(10) << "skipped" << std::setw(12) << 0 << "  (absent from ground truth)\n";
  }
  if (!iou.empty()) {
    out << '\n' << std::left << std::setw(20) << "class" << std::right << std::setw(10) << "IoU"
        << '\n';
    for (const auto& m : iou) {
      out << std::left << std::setw(20) << m.name << std::right << std::setw(10) << m.value << '\n';
    }
  }
  out << "\nAmAP " << amap;
  if (miou) out << "  mIoU " << *miou;
  out << "  points " << points << "  scenes " << scenes << '\n';
  out.unsetf(std::ios::floatfield);
}

void EvalReport::write_key_values(std::ostream& out) const {
  out << std::setprecision(17);
  out << "amap=" << amap << '\n';
  for (const auto& m : ap) out << "ap." << m.name << '=' << m.value << '\n';
  for (int c : skipped_classes) out << "skipped.class_" << c << "=1\n";
  if (miou) {
    out << "miou=" << *miou << '\n';
    for (const auto& m : iou) out << "iou." << m.name << '=' << m.value << '\n';
  }
  out << "points=" << points << '\n' << "scenes=" << scenes << '\n';
}

}  // namespace cadscene
