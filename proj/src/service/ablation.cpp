#include "cxr/service/ablation.hpp"

#include "cxr/error.hpp"

namespace cxr::service {

AblationSpec AblationSpec::preset(const std::string& name) {
  AblationSpec s;
  s.name = name;
  s.l1 = s.l2 = s.c = name != "a";
  s.p1 = name == "c" || name == "f";
  s.p2 = name == "d" || name == "f";
  s.p3 = name == "e" || name == "f";
  if (name.size() != 1 || name[0] < 'a' || name[0] > 'f') throw ValidationError("unknown ablation preset '" + name + "'");
  return s;
}

nlohmann::json AblationSpec::to_json() const {
  return {{"preset", name}, {"L1", l1}, {"L2", l2}, {"P1", p1}, {"P2", p2}, {"P3", p3}, {"C", c}};
}

AblationSpec AblationSpec::from_json(const nlohmann::json& j) {
  if (j.is_string()) return preset(j.get<std::string>());
  if (!j.is_object()) throw ValidationError("ablation must be a preset name or an object");
  AblationSpec s = preset(j.contains("preset") ? j.at("preset").get<std::string>() : "f");
  bool custom = false;
  auto flag = [&](const char* key, bool& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) throw ValidationError(std::string("ablation flag ") + key + " must be boolean");
    const bool v = j.at(key).get<bool>();
    custom = custom || v != field;
    field = v;
  };
  flag("L1", s.l1);
  flag("L2", s.l2);
  flag("P1", s.p1);
  flag("P2", s.p2);
  flag("P3", s.p3);
  flag("C", s.c);
  if (custom) s.name = "custom";
  return s;
}

}  // namespace cxr::service
