#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shaker/error.hpp"
#include "shaker/perception.hpp"
#include "shaker/reconciliation.hpp"

namespace shaker {

// The five robot functions. Serialized op names match them verbatim.
struct TakeGlass {
  friend bool operator==(const TakeGlass&, const TakeGlass&) = default;
};

struct TakeBottle {
  std::string label;
  std::string item_id;
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();

  friend bool operator==(const TakeBottle& a, const TakeBottle& b) {
    return a.label == b.label && a.item_id == b.item_id && a.pose == b.pose;
  }
};

// Sets the held bottle back down on the table.
struct LeftBottle {
  std::string label;
  friend bool operator==(const LeftBottle&, const LeftBottle&) = default;
};

struct PourLiquid {
  double target_mass_g = 0.0;
  double tolerance_rel = 0.01;  // fraction of target mass
  friend bool operator==(const PourLiquid&, const PourLiquid&) = default;
};

struct GiveUser {
  friend bool operator==(const GiveUser&, const GiveUser&) = default;
};

using Action = std::variant<TakeGlass, TakeBottle, LeftBottle, PourLiquid, GiveUser>;

std::string_view op_name(const Action& action);

inline constexpr double kDefaultPourTolerance = 0.01;

// Mass budget of one bound bottle, captured from the snapshot at compile time.
struct ItemBudget {
  std::string item_id;
  std::string label;
  double available_ml = 0.0;
  double density_g_per_ml = 1.0;

  double mass_g() const { return available_ml * density_g_per_ml; }
  friend bool operator==(const ItemBudget&, const ItemBudget&) = default;
};

struct ActionProgram {
  std::string program_id;
  std::string recipe_id;
  std::vector<Action> actions;
  std::vector<AppliedSubstitution> provenance;
  std::vector<ItemBudget> budgets;

  const ItemBudget* budget_for(std::string_view item_id) const;
  friend bool operator==(const ActionProgram&, const ActionProgram&) = default;
};

// take_glass, then take_bottle / pour_liquid / left_bottle per binding in
// recipe order, then give_user. Errors: kUnresolvedRecipe.
ActionProgram compile(const ResolvedRecipe& resolved, const InventorySnapshot& snapshot);

struct Violation {
  std::string rule;  // "V1".."V8"
  std::size_t action_index = 0;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

// Static checks:
//   V1 first action is take_glass, and it occurs once
//   V2 last action is give_user, and it occurs once
//   V3 take_bottle only with a free bottle arm
//   V4 left_bottle names the held bottle
//   V5 pour_liquid only while a bottle is held
//   V6 nothing held at give_user
//   V7 poured mass per item within its budget
//   V8 every take_bottle is matched by a left_bottle
std::vector<Violation> validate(const ActionProgram& program);

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

nlohmann::json to_json(const Action& action);
nlohmann::json to_json(const ActionProgram& program);
nlohmann::json to_json(const Violation& violation);

std::string serialize(const ActionProgram& program);
// Errors: kMalformedDocument; ValidationError when the program fails validate().
ActionProgram deserialize(std::string_view document);

}  // namespace shaker
