#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "shaker/perception.hpp"
#include "shaker/recipe_corpus.hpp"

namespace shaker {

enum class AnomalyKind { kMissingIngredient, kInsufficientQuantity, kUnreadableLabel, kAmbiguousMatch };

std::string_view to_string(AnomalyKind kind);

struct Anomaly {
  // "<kind>:<label>", stable across re-diffs of the same recipe slot.
  std::string anomaly_id;
  AnomalyKind kind = AnomalyKind::kMissingIngredient;
  std::string subject_label;
  double required_ml = 0.0;
  double available_ml = 0.0;  // best matching item, 0 if none
  std::vector<std::string> suggestions;
  // kUnreadableLabel only: unreadable items that might hold the ingredient.
  std::vector<std::string> candidate_items;

  friend bool operator==(const Anomaly&, const Anomaly&) = default;
};

nlohmann::json to_json(const Anomaly& anomaly);

struct SubstitutionRule {
  std::string from_label;
  std::string to_label;
  std::string note;

  friend bool operator==(const SubstitutionRule&, const SubstitutionRule&) = default;
};

using SubstitutionTable = std::vector<SubstitutionRule>;

// `[{"from": str, "to": str, "note": str}]`; labels are normalized.
SubstitutionTable parse_substitution_table(std::string_view document);
SubstitutionTable load_substitution_table(const std::string& path);
SubstitutionTable default_substitution_table();

struct DiffOptions {
  // Minimum embedding cosine for a snapshot label to be offered as a
  // near-label suggestion.
  double suggestion_threshold = 0.6;
};

// Best readable item carrying `label`: most volume, then smallest item_id.
const InventoryItem* select_item(const InventorySnapshot& snapshot, std::string_view label);

// Compares recipe requirements against the snapshot. One anomaly at most per
// ingredient, in recipe order.
std::vector<Anomaly> diff(const Recipe& recipe, const InventorySnapshot& snapshot,
                          std::span<const SubstitutionRule> rules, const DiffOptions& options = {});

inline constexpr std::string_view kAbortOption = "abort";
inline constexpr std::string_view kReduceOption = "reduce-to-available";

struct UserPrompt {
  std::string anomaly_id;
  std::string text;
  std::vector<std::string> options;

  friend bool operator==(const UserPrompt&, const UserPrompt&) = default;
};

nlohmann::json to_json(const UserPrompt& prompt);

UserPrompt propose_prompt(const Anomaly& anomaly);

struct Binding {
  IngredientReq requirement;  // effective (after substitution / reduction)
  std::string original_label;
  std::string item_id;
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();
  double available_ml = 0.0;
};

struct AppliedSubstitution {
  std::string from_label;
  std::string to_label;
  bool automatic = false;

  friend bool operator==(const AppliedSubstitution&, const AppliedSubstitution&) = default;
};

struct ResolvedRecipe {
  std::string recipe_id;
  std::string recipe_name;
  std::vector<Binding> bindings;
  std::vector<AppliedSubstitution> applied_substitutions;
  // Labels whose quantity was reduced to what is on hand.
  std::vector<std::string> reduced_labels;
};

nlohmann::json to_json(const ResolvedRecipe& resolved);

struct Aborted {
  std::string anomaly_id;
};

struct Pending {
  std::vector<Anomaly> anomalies;
};

using Resolution = std::variant<ResolvedRecipe, Pending, Aborted>;

// Working state of one recipe's reconciliation: the recipe as amended so far,
// user confirmations of unreadable bottles, and the outstanding anomalies.
// Suggestions are filtered so a substitution chain never revisits a label and
// never reuses a label another ingredient already occupies.
class Reconciler {
 public:
  Reconciler(Recipe recipe, InventorySnapshot snapshot, SubstitutionTable rules,
             DiffOptions options = {});

  const std::vector<Anomaly>& anomalies() const { return anomalies_; }
  std::vector<UserPrompt> prompts() const;
  bool resolved() const { return anomalies_.empty(); }

  // Applies one answer and re-diffs. Returns false when the answer is abort.
  // Errors: kUnknownAnomalyId, kIllegalOption.
  bool answer(std::string_view anomaly_id, std::string_view choice);

  // Applies predefined rules to every outstanding anomaly in a single pass:
  // substitution along the rule chain for missing/unreadable/ambiguous
  // ingredients, reduce-to-available for short ones. Errors: kUnresolvable.
  void resolve_unattended();

  // Errors: kUnresolvedRecipe while anomalies remain.
  ResolvedRecipe result() const;

  const Recipe& working_recipe() const { return working_; }
  const std::vector<AppliedSubstitution>& applied_substitutions() const { return applied_; }

 private:
  std::size_t slot_of(std::string_view anomaly_id) const;
  InventorySnapshot effective_snapshot() const;
  void substitute(std::size_t slot, const std::string& to_label, bool automatic);
  void refresh();

  Recipe base_;
  Recipe working_;
  InventorySnapshot snapshot_;
  SubstitutionTable rules_;
  DiffOptions options_;
  std::map<std::string, std::string> confirmed_;  // item_id -> label
  std::vector<std::set<std::string>> visited_;    // per ingredient slot
  std::vector<AppliedSubstitution> applied_;
  std::vector<std::string> reduced_;
  std::vector<Anomaly> anomalies_;
};

// Batch form: applies `answers` (anomaly_id -> choice) against `anomalies`,
// which must be the current diff of recipe/snapshot, then re-diffs.
Resolution resolve(const Recipe& recipe, const InventorySnapshot& snapshot,
                   const std::vector<Anomaly>& anomalies,
                   const std::map<std::string, std::string>& answers,
                   const SubstitutionTable& rules, const DiffOptions& options = {});

ResolvedRecipe resolve_unattended(const Recipe& recipe, const InventorySnapshot& snapshot,
                                  const SubstitutionTable& rules, const DiffOptions& options = {});

}  // namespace shaker
