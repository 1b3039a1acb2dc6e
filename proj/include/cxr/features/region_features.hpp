#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/data/dataset.hpp"
#include "cxr/data/layout.hpp"
#include "cxr/nn/layers.hpp"

namespace cxr::features {

using data::Box;

// The six regions broken out in the key-region IoU/METEOR table.
inline constexpr std::array<std::string_view, 6> kKeyRegions = {
    "right lung", "left lung", "spine", "mediastinum", "cardiac silhouette", "abdomen"};

// 29 x 1024 region features in region-id order, optionally with one box per region.
struct RegionFeatureSet {
  nn::Tensor features;
  std::optional<std::vector<Box>> boxes;

  void validate() const;
  Eigen::VectorXd row(std::size_t region_id) const { return features.row(static_cast<Eigen::Index>(region_id)).transpose(); }
};

// Stored features of a sample, rows ordered by region id. Requires projected features.
RegionFeatureSet from_sample(const data::Sample& sample);

// Raw per-region features [29 x d_raw] through a d_raw -> 1024 dense map.
RegionFeatureSet project_features(const nn::Tensor& raw, const nn::Dense& projection);

// Intersection over union; throws ValidationError on degenerate boxes.
double iou(const Box& a, const Box& b);

// Stand-in detector: the sample's stored features plus layout boxes whose
// coordinates are shifted by uniform(-jitter, jitter) times the box width/height.
RegionFeatureSet mock_detect(const data::Sample& sample, double jitter, std::uint64_t seed,
                             const data::AnatomicalLayout& layout = data::AnatomicalLayout::builtin(),
                             double image_size = 512.0);

struct RegionIouTable {
  std::vector<std::string> region_names;
  std::vector<double> mean_iou;   // per region, averaged over images
  double mean_of_image_means = 0; // mean over regions per image, then over images
  std::size_t images = 0;

  double for_region(std::string_view name) const;
};

// pred[i][r] vs gold[i][r] for image i, region r (region-id order).
RegionIouTable region_iou_report(const std::vector<std::vector<Box>>& pred, const std::vector<std::vector<Box>>& gold,
                                 const data::RegionVocabulary& regions = data::RegionVocabulary::builtin());

}  // namespace cxr::features
