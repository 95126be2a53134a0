#include "occ/metrics.hpp"

#include <ostream>

#include "occ/csv.hpp"
#include "occ/error.hpp"

namespace occ {

IouReport miou(const LabeledVoxelGrid& prediction, const LabeledVoxelGrid& ground_truth) {
  if (!prediction.same_layout(ground_truth)) throw DimensionError("prediction and ground truth layouts differ");
  prediction.validate();
  ground_truth.validate();
  const std::size_t classes = ground_truth.num_classes;
  IouReport report;
  report.intersection.assign(classes, 0);
  report.union_count.assign(classes, 0);
  for (std::size_t i = 0; i < prediction.labels.size(); ++i) {
    const std::uint8_t p = prediction.labels[i];
    const std::uint8_t g = ground_truth.labels[i];
    const bool p_occ = prediction.is_occupied(p);
    const bool g_occ = ground_truth.is_occupied(g);
    if (p == g) {
      if (p_occ) {
        ++report.intersection[p];
        ++report.union_count[p];
      }
      continue;
    }
    if (p_occ) ++report.union_count[p];
    if (g_occ) ++report.union_count[g];
  }
  report.per_class.resize(classes);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t j = 0; j < classes; ++j) {
    if (report.union_count[j] == 0) continue;
    const double iou = static_cast<double>(report.intersection[j]) / static_cast<double>(report.union_count[j]);
    report.per_class[j] = iou;
    sum += iou;
    ++present;
  }
  if (present == 0) throw EmptyDataError("no semantic class appears in either grid");
  report.miou = sum / static_cast<double>(present);
  return report;
}

void write_iou_csv(std::ostream& out, const IouReport& report) {
  out << "class,intersection,union,iou\n";
  for (std::size_t j = 0; j < report.per_class.size(); ++j) {
    out << j << ',' << report.intersection[j] << ',' << report.union_count[j] << ',';
    if (report.per_class[j]) out << format_number(*report.per_class[j]);
    out << '\n';
  }
  out << "miou,,," << format_number(report.miou) << '\n';
}

}  // namespace occ
