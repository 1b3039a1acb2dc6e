#include "cxr/features/region_features.hpp"

#include <algorithm>

#include "cxr/error.hpp"

namespace cxr::features {

void RegionFeatureSet::validate() const {
  if (features.rows() != static_cast<Eigen::Index>(data::kNumRegions) ||
      features.cols() != static_cast<Eigen::Index>(data::kFeatureDim)) {
    throw DimensionError("region feature set must be [29x1024], got " + nn::shape_string(features));
  }
  nn::require_finite(features, "region features");
  if (boxes && boxes->size() != data::kNumRegions) {
    throw DimensionError("region feature set has " + std::to_string(boxes->size()) + " boxes, expected 29");
  }
}

RegionFeatureSet from_sample(const data::Sample& sample) {
  RegionFeatureSet set;
  set.features.resize(data::kNumRegions, data::kFeatureDim);
  std::vector<Box> boxes(data::kNumRegions);
  bool all_boxes = true;
  if (sample.regions.size() != data::kNumRegions) {
    throw ValidationError("sample " + sample.sample_id + " does not have 29 regions");
  }
  for (const auto& r : sample.regions) {
    if (!r.projected || r.feature.size() != data::kFeatureDim) {
      throw DimensionError("sample " + sample.sample_id + ", region '" + r.region_name +
                           "': expected a projected 1024-dim feature");
    }
    for (std::size_t d = 0; d < data::kFeatureDim; ++d) {
      set.features(static_cast<Eigen::Index>(r.region_id), static_cast<Eigen::Index>(d)) = r.feature[d];
    }
    if (r.box) boxes[r.region_id] = *r.box; else all_boxes = false;
  }
  if (all_boxes) set.boxes = std::move(boxes);
  set.validate();
  return set;
}

RegionFeatureSet project_features(const nn::Tensor& raw, const nn::Dense& projection) {
  if (raw.rows() != static_cast<Eigen::Index>(data::kNumRegions)) {
    throw DimensionError("project_features: expected 29 rows, got " + nn::shape_string(raw));
  }
  if (projection.in_dim() != raw.cols()) {
    throw DimensionError("project_features: raw features " + nn::shape_string(raw) + " do not match projection " +
                         nn::shape_string(projection.weight().value));
  }
  if (projection.out_dim() != static_cast<Eigen::Index>(data::kFeatureDim)) {
    throw DimensionError("project_features: projection must output 1024 dims, outputs " +
                         std::to_string(projection.out_dim()));
  }
  nn::require_finite(raw, "raw region features");
  RegionFeatureSet set{projection.apply(raw), std::nullopt};
  set.validate();
  return set;
}

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) throw ValidationError("iou: boxes must satisfy x1<x2 and y1<y2");
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return inter / uni;
}

RegionFeatureSet mock_detect(const data::Sample& sample, double jitter, std::uint64_t seed,
                             const data::AnatomicalLayout& layout, double image_size) {
  if (!(jitter >= 0.0 && jitter < 0.5)) throw ValidationError("mock_detect: jitter must lie in [0, 0.5)");
  RegionFeatureSet set = from_sample(sample);
  nn::Rng rng(seed ^ std::stoull(data::fnv1a_hex(sample.sample_id), nullptr, 16));
  std::vector<Box> boxes;
  boxes.reserve(data::kNumRegions);
  for (std::size_t r = 0; r < data::kNumRegions; ++r) {
    Box b = layout.pixels(r, image_size);
    if (jitter > 0.0) {
      const double w = b.width();
      const double h = b.height();
      b.x1 += rng.uniform(-jitter, jitter) * w;
      b.x2 += rng.uniform(-jitter, jitter) * w;
      b.y1 += rng.uniform(-jitter, jitter) * h;
      b.y2 += rng.uniform(-jitter, jitter) * h;
    }
    boxes.push_back(b);
  }
  set.boxes = std::move(boxes);
  return set;
}

double RegionIouTable::for_region(std::string_view name) const {
  for (std::size_t i = 0; i < region_names.size(); ++i) {
    if (region_names[i] == name) return mean_iou[i];
  }
  throw ValidationError("no IoU entry for region '" + std::string(name) + "'");
}

RegionIouTable region_iou_report(const std::vector<std::vector<Box>>& pred, const std::vector<std::vector<Box>>& gold,
                                 const data::RegionVocabulary& regions) {
  if (pred.size() != gold.size()) {
    throw DimensionError("region_iou_report: " + std::to_string(pred.size()) + " predicted images vs " +
                         std::to_string(gold.size()) + " gold images");
  }
  RegionIouTable table;
  table.region_names = regions.names();
  table.mean_iou.assign(regions.size(), 0.0);
  table.images = pred.size();
  if (pred.empty()) return table;
  double image_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != regions.size() || gold[i].size() != regions.size()) {
      throw DimensionError("region_iou_report: image " + std::to_string(i) + " does not have 29 boxes on both sides");
    }
    double image_total = 0.0;
    for (std::size_t r = 0; r < regions.size(); ++r) {
      const double v = iou(pred[i][r], gold[i][r]);
      table.mean_iou[r] += v;
      image_total += v;
    }
    image_sum += image_total / static_cast<double>(regions.size());
  }
  for (double& v : table.mean_iou) v /= static_cast<double>(pred.size());
  table.mean_of_image_means = image_sum / static_cast<double>(pred.size());
  return table;
}

}  // namespace cxr::features
