#include "cxr/llm/report.hpp"

#include <cctype>
#include <sstream>

namespace cxr::llm {

namespace {

const std::string kContextPrefix = "Clinical context:";
const std::string kAbnormalMarker = "[abnormal]";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool iequals_prefix(const std::string& s, std::size_t pos, const std::string& prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

struct Heading {
  std::size_t region;
  bool abnormal;
  std::string rest;
};

std::optional<Heading> match_heading(const std::string& line, const data::RegionVocabulary& regions) {
  std::size_t pos = 0;
  while (pos < line.size() && (line[pos] == '#' || line[pos] == '*' || line[pos] == '-' || line[pos] == ' ')) ++pos;
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (iequals_prefix(line, pos, regions.name(r)) &&
        (!best || regions.name(r).size() > regions.name(*best).size())) {
      best = r;
    }
  }
  if (!best) return std::nullopt;
  std::size_t p = pos + regions.name(*best).size();
  auto skip = [&](auto pred) {
    while (p < line.size() && pred(line[p])) ++p;
  };
  skip([](char c) { return c == ' ' || c == '*'; });
  bool abnormal = false;
  if (iequals_prefix(line, p, kAbnormalMarker) || iequals_prefix(line, p, "(abnormal)")) {
    abnormal = true;
    p += kAbnormalMarker.size();
    skip([](char c) { return c == ' ' || c == '*'; });
  }
  if (p >= line.size() || line[p] != ':') return std::nullopt;
  ++p;
  skip([](char c) { return c == ' ' || c == '*'; });
  return Heading{*best, abnormal, trim(line.substr(p))};
}

}  // namespace

const ReportSection* StructuredReport::find(const std::string& region) const {
  for (const auto& s : sections) {
    if (s.region_name == region) return &s;
  }
  return nullptr;
}

std::string render_report(const StructuredReport& report) {
  std::string out;
  if (report.context_summary) out += kContextPrefix + " " + *report.context_summary + '\n';
  for (const auto& s : report.sections) {
    out += capitalized(s.region_name);
    if (s.abnormal) out += " " + kAbnormalMarker;
    out += ": " + s.text + '\n';
  }
  return out;
}

StructuredReport parse_report(const std::string& raw, const data::RegionVocabulary& regions) {
  StructuredReport report;
  report.raw_text = raw;
  std::vector<std::string> leading;
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (auto h = match_heading(line, regions)) {
      const std::string& name = regions.name(h->region);
      auto it = std::find_if(report.sections.begin(), report.sections.end(),
                             [&](const ReportSection& s) { return s.region_name == name; });
      if (it == report.sections.end()) {
        report.sections.push_back({name, h->rest, h->abnormal});
      } else {
        if (!h->rest.empty()) it->text += (it->text.empty() ? "" : " ") + h->rest;
        it->abnormal = it->abnormal || h->abnormal;
      }
    } else if (report.sections.empty()) {
      if (iequals_prefix(line, 0, kContextPrefix)) line = trim(line.substr(kContextPrefix.size()));
      if (!line.empty()) leading.push_back(line);
    } else {
      auto& last = report.sections.back().text;
      last += (last.empty() ? "" : " ") + line;
    }
  }
  if (report.sections.empty()) {
    report.unstructured = true;
    const std::string body = trim(raw);
    if (!body.empty()) report.sections.push_back({kUnstructuredRegion, body, false});
    return report;
  }
  if (!leading.empty()) {
    std::string summary;
    for (const auto& l : leading) summary += (summary.empty() ? "" : " ") + l;
    report.context_summary = summary;
  }
  return report;
}

}  // namespace cxr::llm
