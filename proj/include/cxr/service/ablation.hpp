#pragma once

#include <array>
#include <string>

#include <json.hpp>

#include "cxr/llm/prompt_document.hpp"
#include "cxr/train/trainer.hpp"

namespace cxr::service {

// On/off switches over the training losses (L1, L2) and the prompt inputs
// (P1, P2, P3, C). Presets:
//   a  nothing            b  L1 L2 C          c  b + P1
//   d  b + P2             e  b + P3           f  everything
struct AblationSpec {
  std::string name = "f";  // preset name, or "custom"
  bool l1 = true;
  bool l2 = true;
  bool p1 = true;
  bool p2 = true;
  bool p3 = true;
  bool c = true;

  static AblationSpec preset(const std::string& name);
  llm::PromptMask prompt_mask() const { return {c, p1, p2, p3}; }
  train::LossMask loss_mask() const { return {l1, l2}; }

  nlohmann::json to_json() const;
  // Accepts a preset name string or an object with optional "preset" and flag overrides.
  static AblationSpec from_json(const nlohmann::json& j);
  bool operator==(const AblationSpec&) const = default;
};

inline constexpr std::array<const char*, 6> kPresetNames = {"a", "b", "c", "d", "e", "f"};

}  // namespace cxr::service
