#include "cxr/data/layout.hpp"

#include <fstream>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr::data {

AnatomicalLayout AnatomicalLayout::load(const std::filesystem::path& path, const RegionVocabulary& regions) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout table " + path.string());
  std::vector<std::optional<Box>> rows(regions.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string name;
    std::getline(ss, name, ',');
    Box b;
    char comma = 0;
    if (!(ss >> b.x1 >> comma >> b.y1 >> comma >> b.x2 >> comma >> b.y2)) {
      throw ParseError(line_no, "expected 'name,x1,y1,x2,y2'");
    }
    const auto idx = regions.index_of(name);
    if (!idx) throw ParseError(line_no, "unknown region '" + name + "'");
    if (!b.valid() || b.x1 < 0 || b.y1 < 0 || b.x2 > 1 || b.y2 > 1) {
      throw ParseError(line_no, "box for '" + name + "' must satisfy 0<=x1<x2<=1, 0<=y1<y2<=1");
    }
    if (rows[*idx]) throw ParseError(line_no, "duplicate layout row for '" + name + "'");
    rows[*idx] = b;
  }
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i]) throw ValidationError("layout table has no box for '" + regions.name(i) + "'");
    boxes.push_back(*rows[i]);
  }
  return AnatomicalLayout(std::move(boxes));
}

const AnatomicalLayout& AnatomicalLayout::builtin() {
  static const AnatomicalLayout layout = load(default_data_dir() / "layout.csv", RegionVocabulary::builtin());
  return layout;
}

Box AnatomicalLayout::pixels(std::size_t region_id, double image_size) const {
  const Box& n = normalized(region_id);
  return {n.x1 * image_size, n.y1 * image_size, n.x2 * image_size, n.y2 * image_size};
}

}  // namespace cxr::data
