#include "shaker/plan.hpp"

#include <cstdio>
#include <map>
#include <optional>

#include "json_util.hpp"
#include "shaker/text.hpp"

namespace shaker {

using detail::json;

std::string_view op_name(const Action& action) {
  struct Visitor {
    std::string_view operator()(const TakeGlass&) const { return "take_glass"; }
    std::string_view operator()(const TakeBottle&) const { return "take_bottle"; }
    std::string_view operator()(const LeftBottle&) const { return "left_bottle"; }
    std::string_view operator()(const PourLiquid&) const { return "pour_liquid"; }
    std::string_view operator()(const GiveUser&) const { return "give_user"; }
  };
  return std::visit(Visitor{}, action);
}

const ItemBudget* ActionProgram::budget_for(std::string_view item_id) const {
  for (const auto& b : budgets) {
    if (b.item_id == item_id) return &b;
  }
  return nullptr;
}

namespace {

json actions_json(const std::vector<Action>& actions) {
  json out = json::array();
  for (const auto& a : actions) out.push_back(to_json(a));
  return out;
}

std::string derive_program_id(const ActionProgram& p) {
  const std::string canonical = p.recipe_id + "\n" + actions_json(p.actions).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return std::string("prog-") + buf;
}

}  // namespace

ActionProgram compile(const ResolvedRecipe& resolved, const InventorySnapshot& snapshot) {
  if (resolved.bindings.empty()) {
    throw Error(ErrorCode::kUnresolvedRecipe, "recipe " + resolved.recipe_id + " has no bindings",
                resolved.recipe_id);
  }
  ActionProgram p;
  p.recipe_id = resolved.recipe_id;
  p.provenance = resolved.applied_substitutions;
  p.actions.emplace_back(TakeGlass{});
  for (const auto& b : resolved.bindings) {
    const InventoryItem* item = snapshot.find(b.item_id);
    if (item == nullptr) {
      throw Error(ErrorCode::kUnresolvedRecipe, "bound item " + b.item_id + " is not in the snapshot",
                  b.item_id);
    }
    if (item->available_ml < b.requirement.quantity_ml) {
      throw Error(ErrorCode::kUnresolvedRecipe,
                  "item " + b.item_id + " holds less than " + b.requirement.label + " requires",
                  b.item_id);
    }
    if (p.budget_for(item->item_id) == nullptr) {
      p.budgets.push_back({item->item_id, b.requirement.label, item->available_ml,
                           b.requirement.density_g_per_ml});
    }
    p.actions.emplace_back(TakeBottle{b.requirement.label, item->item_id, item->pose_world});
    p.actions.emplace_back(PourLiquid{b.requirement.mass_g(), kDefaultPourTolerance});
    p.actions.emplace_back(LeftBottle{b.requirement.label});
  }
  p.actions.emplace_back(GiveUser{});
  p.program_id = derive_program_id(p);
  return p;
}

std::vector<Violation> validate(const ActionProgram& program) {
  std::vector<Violation> out;
  const auto& actions = program.actions;
  const auto add = [&](std::string rule, std::size_t index, std::string message) {
    out.push_back({std::move(rule), index, std::move(message)});
  };

  if (actions.empty()) {
    add("V1", 0, "program is empty");
    add("V2", 0, "program is empty");
    return out;
  }

  // V1 / V2 are positional and global, checked up front.
  if (!std::holds_alternative<TakeGlass>(actions.front())) add("V1", 0, "first action is not take_glass");
  if (!std::holds_alternative<GiveUser>(actions.back())) {
    add("V2", actions.size() - 1, "last action is not give_user");
  }
  bool seen_glass = false, seen_give = false;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (std::holds_alternative<TakeGlass>(actions[i])) {
      if (seen_glass) add("V1", i, "take_glass repeated");
      seen_glass = true;
    } else if (std::holds_alternative<GiveUser>(actions[i])) {
      if (seen_give) add("V2", i, "give_user repeated");
      seen_give = true;
    }
  }
  if (!seen_glass) add("V1", 0, "no take_glass");
  if (!seen_give) add("V2", actions.size() - 1, "no give_user");

  struct Held {
    std::string label;
    std::string item_id;
    std::size_t index;
  };
  std::optional<Held> held;
  std::map<std::string, double> poured;

  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    if (const auto* take = std::get_if<TakeBottle>(&a)) {
      if (held) {
        add("V3", i, "take_bottle(" + take->label + ") while holding " + held->label);
        add("V8", held->index, "take_bottle(" + held->label + ") never set down");
      }
      held = Held{take->label, take->item_id, i};
    } else if (const auto* left = std::get_if<LeftBottle>(&a)) {
      if (!held) {
        add("V4", i, "left_bottle(" + left->label + ") with no bottle held");
      } else {
        if (held->label != left->label) {
          add("V4", i, "left_bottle(" + left->label + ") but holding " + held->label);
        }
        held.reset();
      }
    } else if (const auto* pour = std::get_if<PourLiquid>(&a)) {
      if (!held) {
        add("V5", i, "pour_liquid with no bottle held");
        continue;
      }
      const double total = (poured[held->item_id] += pour->target_mass_g);
      const ItemBudget* budget = program.budget_for(held->item_id);
      if (budget == nullptr) {
        add("V7", i, "no mass budget for " + held->item_id);
      } else if (total > budget->mass_g() * (1.0 + 1e-12)) {
        add("V7", i, "pours from " + held->item_id + " exceed its " + std::to_string(budget->mass_g()) + " g");
      }
    } else if (std::holds_alternative<GiveUser>(a)) {
      if (held) add("V6", i, "give_user while holding " + held->label);
    }
  }
  if (held) add("V8", held->index, "take_bottle(" + held->label + ") never set down");
  return out;
}

namespace {

std::string summarize(const std::vector<Violation>& violations) {
  std::string msg = "program failed validation:";
  for (const auto& v : violations) {
    msg += " " + v.rule + "@" + std::to_string(v.action_index) + " " + v.message + ";";
  }
  return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(ErrorCode::kValidationFailure, summarize(violations),
            violations.empty() ? "" : violations.front().rule),
      violations_(std::move(violations)) {}

json to_json(const Action& action) {
  json j = {{"op", op_name(action)}};
  if (const auto* take = std::get_if<TakeBottle>(&action)) {
    j["label"] = take->label;
    j["item_id"] = take->item_id;
    j["pose"] = {take->pose.x(), take->pose.y(), take->pose.z()};
  } else if (const auto* left = std::get_if<LeftBottle>(&action)) {
    j["label"] = left->label;
  } else if (const auto* pour = std::get_if<PourLiquid>(&action)) {
    j["quantity"] = pour->target_mass_g;
    j["tolerance"] = pour->tolerance_rel;
  }
  return j;
}

json to_json(const ActionProgram& p) {
  json provenance = json::array();
  for (const auto& s : p.provenance) {
    provenance.push_back({{"from", s.from_label}, {"to", s.to_label}, {"automatic", s.automatic}});
  }
  json budgets = json::array();
  for (const auto& b : p.budgets) {
    budgets.push_back({{"item_id", b.item_id},
                       {"label", b.label},
                       {"available_ml", b.available_ml},
                       {"density_g_per_ml", b.density_g_per_ml}});
  }
  return {{"program_id", p.program_id},
          {"recipe_id", p.recipe_id},
          {"actions", actions_json(p.actions)},
          {"provenance", provenance},
          {"budgets", budgets}};
}

json to_json(const Violation& v) {
  return {{"rule", v.rule}, {"action_index", v.action_index}, {"message", v.message}};
}

std::string serialize(const ActionProgram& program) { return to_json(program).dump(2) + "\n"; }

namespace {

constexpr auto kMalformed = ErrorCode::kMalformedDocument;

Action parse_action(const json& j, const std::string& path) {
  const std::string op = detail::require_string(j, "op", path, kMalformed);
  if (op == "take_glass") return TakeGlass{};
  if (op == "give_user") return GiveUser{};
  if (op == "left_bottle") return LeftBottle{detail::require_string(j, "label", path, kMalformed)};
  if (op == "take_bottle") {
    TakeBottle t;
    t.label = detail::require_string(j, "label", path, kMalformed);
    t.item_id = detail::require_string(j, "item_id", path, kMalformed);
    const auto& pose = detail::require(j, "pose", path, kMalformed);
    if (!pose.is_array() || pose.size() != 3) {
      detail::schema_violation(path + ".pose", "expected [x, y, z]", kMalformed);
    }
    for (int i = 0; i < 3; ++i) {
      t.pose[i] = detail::as_number(pose[static_cast<std::size_t>(i)], path + ".pose", kMalformed);
    }
    return t;
  }
  if (op == "pour_liquid") {
    PourLiquid p;
    p.target_mass_g = detail::require_number(j, "quantity", path, kMalformed);
    p.tolerance_rel = j.contains("tolerance") ? detail::require_number(j, "tolerance", path, kMalformed)
                                              : kDefaultPourTolerance;
    if (!(p.target_mass_g > 0.0)) detail::schema_violation(path + ".quantity", "must be > 0", kMalformed);
    if (!(p.tolerance_rel > 0.0 && p.tolerance_rel <= 0.1)) {
      detail::schema_violation(path + ".tolerance", "must be within (0, 0.1]", kMalformed);
    }
    return p;
  }
  detail::schema_violation(path + ".op", "unknown action '" + op + "'", kMalformed);
}

}  // namespace

ActionProgram deserialize(std::string_view document) {
  const json doc = detail::parse_json(document, kMalformed);
  ActionProgram p;
  p.program_id = detail::require_string(doc, "program_id", "", kMalformed);
  p.recipe_id = detail::require_string(doc, "recipe_id", "", kMalformed);
  const auto& actions = detail::require(doc, "actions", "", kMalformed);
  if (!actions.is_array()) detail::schema_violation("actions", "expected an array", kMalformed);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    p.actions.push_back(parse_action(actions[i], detail::index_path("actions", i)));
  }
  if (doc.contains("provenance")) {
    const auto& prov = doc["provenance"];
    if (!prov.is_array()) detail::schema_violation("provenance", "expected an array", kMalformed);
    for (std::size_t i = 0; i < prov.size(); ++i) {
      const auto path = detail::index_path("provenance", i);
      AppliedSubstitution s;
      s.from_label = detail::require_string(prov[i], "from", path, kMalformed);
      s.to_label = detail::require_string(prov[i], "to", path, kMalformed);
      s.automatic = prov[i].value("automatic", false);
      p.provenance.push_back(std::move(s));
    }
  }
  if (doc.contains("budgets")) {
    const auto& budgets = doc["budgets"];
    if (!budgets.is_array()) detail::schema_violation("budgets", "expected an array", kMalformed);
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      const auto path = detail::index_path("budgets", i);
      ItemBudget b;
      b.item_id = detail::require_string(budgets[i], "item_id", path, kMalformed);
      b.label = detail::require_string(budgets[i], "label", path, kMalformed);
      b.available_ml = detail::require_number(budgets[i], "available_ml", path, kMalformed);
      b.density_g_per_ml = detail::require_number(budgets[i], "density_g_per_ml", path, kMalformed);
      p.budgets.push_back(std::move(b));
    }
  }
  auto violations = validate(p);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return p;
}

}  // namespace shaker
