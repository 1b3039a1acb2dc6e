#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "cxr/data/dataset.hpp"

namespace cxr::data {

// Region name -> normalized box in [0,1]^2, one row per region in vocabulary order.
class AnatomicalLayout {
 public:
  AnatomicalLayout() = default;
  explicit AnatomicalLayout(std::vector<Box> normalized) : boxes_(std::move(normalized)) {}

  // CSV "name,x1,y1,x2,y2"; '#' lines are comments. Every vocabulary region must appear once.
  static AnatomicalLayout load(const std::filesystem::path& path, const RegionVocabulary& regions);
  static const AnatomicalLayout& builtin();

  const Box& normalized(std::size_t region_id) const { return boxes_.at(region_id); }
  // Scaled to a square image of `image_size` pixels.
  Box pixels(std::size_t region_id, double image_size) const;
  std::size_t size() const { return boxes_.size(); }

 private:
  std::vector<Box> boxes_;
};

}  // namespace cxr::data
