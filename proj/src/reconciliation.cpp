#include "shaker/reconciliation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json_util.hpp"
#include "shaker/error.hpp"
#include "shaker/text.hpp"

namespace shaker {

using detail::json;

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kMissingIngredient: return "missing";
    case AnomalyKind::kInsufficientQuantity: return "insufficient";
    case AnomalyKind::kUnreadableLabel: return "unreadable";
    case AnomalyKind::kAmbiguousMatch: return "ambiguous";
  }
  return "unknown";
}

json to_json(const Anomaly& a) {
  return {{"anomaly_id", a.anomaly_id},
          {"kind", to_string(a.kind)},
          {"subject_label", a.subject_label},
          {"required_ml", a.required_ml},
          {"available_ml", a.available_ml},
          {"suggestions", a.suggestions},
          {"candidate_items", a.candidate_items}};
}

json to_json(const UserPrompt& p) {
  return {{"anomaly_id", p.anomaly_id}, {"text", p.text}, {"options", p.options}};
}

SubstitutionTable parse_substitution_table(std::string_view document) {
  const json doc = detail::parse_json(document);
  if (!doc.is_array()) detail::schema_violation("$", "expected an array of rules");
  SubstitutionTable table;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto path = detail::index_path("", i);
    SubstitutionRule rule;
    rule.from_label = normalize_text(detail::require_string(doc[i], "from", path));
    rule.to_label = normalize_text(detail::require_string(doc[i], "to", path));
    rule.note = doc[i].contains("note") ? detail::require_string(doc[i], "note", path) : "";
    if (rule.from_label.empty()) detail::schema_violation(path + ".from", "must be non-empty");
    if (rule.to_label.empty()) detail::schema_violation(path + ".to", "must be non-empty");
    if (rule.from_label == rule.to_label) detail::schema_violation(path + ".to", "equals 'from'");
    table.push_back(std::move(rule));
  }
  return table;
}

SubstitutionTable load_substitution_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path, path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_substitution_table(buf.str());
}

SubstitutionTable default_substitution_table() {
  return {{"sugar", "honey", "honey sweetens at a similar ratio"}};
}

const InventoryItem* select_item(const InventorySnapshot& snapshot, std::string_view label) {
  const InventoryItem* best = nullptr;
  for (const auto& item : snapshot.items) {
    if (!item.readable || item.label != label) continue;
    if (best == nullptr || item.available_ml > best->available_ml ||
        (item.available_ml == best->available_ml && item.item_id < best->item_id)) {
      best = &item;
    }
  }
  return best;
}

namespace {

std::string anomaly_id_for(AnomalyKind kind, std::string_view label) {
  return std::string(to_string(kind)) + ":" + std::string(label);
}

void push_unique(std::vector<std::string>& list, const std::string& value) {
  if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

}  // namespace

std::vector<Anomaly> diff(const Recipe& recipe, const InventorySnapshot& snapshot,
                          std::span<const SubstitutionRule> rules, const DiffOptions& options) {
  std::vector<Anomaly> anomalies;
  for (const auto& ing : recipe.ingredients) {
    Anomaly a;
    a.subject_label = ing.label;
    a.required_ml = ing.quantity_ml;

    if (const auto* best = select_item(snapshot, ing.label)) {
      if (best->available_ml < ing.quantity_ml) {
        a.kind = AnomalyKind::kInsufficientQuantity;
        a.available_ml = best->available_ml;
        a.anomaly_id = anomaly_id_for(a.kind, ing.label);
        anomalies.push_back(std::move(a));
      }
      continue;
    }

    for (const auto& rule : rules) {
      if (rule.from_label == ing.label && rule.to_label != ing.label) {
        push_unique(a.suggestions, rule.to_label);
      }
    }

    const Embedding wanted = embed(ing.label);
    std::vector<std::pair<double, std::string>> near;
    for (const auto& item : snapshot.items) {
      if (!item.readable || item.label == ing.label) continue;
      if (std::any_of(near.begin(), near.end(), [&](const auto& n) { return n.second == item.label; })) {
        continue;
      }
      const double score = cosine(wanted, embed(item.label));
      if (score >= options.suggestion_threshold) near.emplace_back(score, item.label);
    }
    std::sort(near.begin(), near.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    for (const auto& n : near) push_unique(a.suggestions, n.second);

    for (const auto& item : snapshot.items) {
      if (!item.readable) a.candidate_items.push_back(item.item_id);
    }

    if (!a.candidate_items.empty()) {
      a.kind = AnomalyKind::kUnreadableLabel;
    } else if (near.size() >= 2) {
      a.kind = AnomalyKind::kAmbiguousMatch;
    } else {
      a.kind = AnomalyKind::kMissingIngredient;
    }
    a.anomaly_id = anomaly_id_for(a.kind, ing.label);
    anomalies.push_back(std::move(a));
  }
  return anomalies;
}

namespace {

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string join_or(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " or " : ", ";
    out += items[i];
  }
  return out;
}

std::string format_ml(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

UserPrompt propose_prompt(const Anomaly& a) {
  UserPrompt p;
  p.anomaly_id = a.anomaly_id;
  const std::string subject = capitalized(a.subject_label);
  switch (a.kind) {
    case AnomalyKind::kMissingIngredient:
      if (a.suggestions.empty()) {
        p.text = subject + " is missing and no substitute is available.";
      } else {
        p.text = subject + " is missing. Would you like to use " + join_or(a.suggestions) + "?";
      }
      p.options = a.suggestions;
      break;
    case AnomalyKind::kInsufficientQuantity:
      if (a.available_ml > 0.0) {
        p.text = "Only " + format_ml(a.available_ml) + " ml of " + a.subject_label +
                 " is available, but " + format_ml(a.required_ml) +
                 " ml is required. Would you like to reduce it to " + format_ml(a.available_ml) +
                 " ml?";
        p.options.emplace_back(kReduceOption);
      } else {
        p.text = subject + " is empty and cannot be poured.";
      }
      break;
    case AnomalyKind::kUnreadableLabel: {
      const auto n = a.candidate_items.size();
      p.text = subject + " was not found, but " + std::to_string(n) + " bottle label" +
               (n == 1 ? "" : "s") + " could not be read. Is it " + join_or(a.candidate_items) + "?";
      if (!a.suggestions.empty()) {
        p.text += " Otherwise, would you like to use " + join_or(a.suggestions) + "?";
      }
      p.options = a.candidate_items;
      p.options.insert(p.options.end(), a.suggestions.begin(), a.suggestions.end());
      break;
    }
    case AnomalyKind::kAmbiguousMatch:
      p.text = subject + " was not found exactly. Would you like to use " + join_or(a.suggestions) + "?";
      p.options = a.suggestions;
      break;
  }
  p.options.emplace_back(kAbortOption);
  return p;
}

json to_json(const ResolvedRecipe& r) {
  json bindings = json::array();
  for (const auto& b : r.bindings) {
    bindings.push_back({{"label", b.requirement.label},
                        {"original_label", b.original_label},
                        {"quantity_ml", b.requirement.quantity_ml},
                        {"density_g_per_ml", b.requirement.density_g_per_ml},
                        {"item_id", b.item_id},
                        {"pose", {b.pose.x(), b.pose.y(), b.pose.z()}},
                        {"available_ml", b.available_ml}});
  }
  json subs = json::array();
  for (const auto& s : r.applied_substitutions) {
    subs.push_back({{"from", s.from_label}, {"to", s.to_label}, {"automatic", s.automatic}});
  }
  return {{"recipe_id", r.recipe_id},
          {"recipe_name", r.recipe_name},
          {"bindings", bindings},
          {"applied_substitutions", subs},
          {"reduced_labels", r.reduced_labels}};
}

Reconciler::Reconciler(Recipe recipe, InventorySnapshot snapshot, SubstitutionTable rules,
                       DiffOptions options)
    : base_(std::move(recipe)),
      working_(base_),
      snapshot_(std::move(snapshot)),
      rules_(std::move(rules)),
      options_(options) {
  validate_recipe(base_);
  working_ = base_;
  for (const auto& ing : base_.ingredients) visited_.push_back({ing.label});
  refresh();
}

InventorySnapshot Reconciler::effective_snapshot() const {
  InventorySnapshot eff = snapshot_;
  for (auto& item : eff.items) {
    if (const auto it = confirmed_.find(item.item_id); it != confirmed_.end()) {
      item.label = it->second;
      item.readable = true;
    }
  }
  return eff;
}

void Reconciler::refresh() {
  anomalies_ = diff(working_, effective_snapshot(), rules_, options_);
  for (auto& a : anomalies_) {
    const std::size_t slot = slot_of(a.anomaly_id);
    std::erase_if(a.suggestions, [&](const std::string& label) {
      if (visited_[slot].contains(label)) return true;
      return std::any_of(working_.ingredients.begin(), working_.ingredients.end(),
                         [&](const IngredientReq& ing) { return ing.label == label; });
    });
    if (a.kind == AnomalyKind::kAmbiguousMatch && a.suggestions.empty()) {
      a.kind = AnomalyKind::kMissingIngredient;
      a.anomaly_id = anomaly_id_for(a.kind, a.subject_label);
    }
  }
}

std::size_t Reconciler::slot_of(std::string_view anomaly_id) const {
  const auto colon = anomaly_id.find(':');
  const auto label = colon == std::string_view::npos ? anomaly_id : anomaly_id.substr(colon + 1);
  for (std::size_t i = 0; i < working_.ingredients.size(); ++i) {
    if (working_.ingredients[i].label == label) return i;
  }
  throw Error(ErrorCode::kUnknownAnomalyId, "no ingredient for anomaly " + std::string(anomaly_id),
              std::string(anomaly_id));
}

std::vector<UserPrompt> Reconciler::prompts() const {
  std::vector<UserPrompt> out;
  for (const auto& a : anomalies_) out.push_back(propose_prompt(a));
  return out;
}

void Reconciler::substitute(std::size_t slot, const std::string& to_label, bool automatic) {
  auto& ing = working_.ingredients[slot];
  applied_.push_back({ing.label, to_label, automatic});
  ing.label = to_label;
  visited_[slot].insert(to_label);
}

bool Reconciler::answer(std::string_view anomaly_id, std::string_view choice) {
  const auto it = std::find_if(anomalies_.begin(), anomalies_.end(),
                               [&](const Anomaly& a) { return a.anomaly_id == anomaly_id; });
  if (it == anomalies_.end()) {
    throw Error(ErrorCode::kUnknownAnomalyId, "no outstanding anomaly " + std::string(anomaly_id),
                std::string(anomaly_id));
  }
  const Anomaly anomaly = *it;
  const UserPrompt prompt = propose_prompt(anomaly);
  if (std::find(prompt.options.begin(), prompt.options.end(), choice) == prompt.options.end()) {
    throw Error(ErrorCode::kIllegalOption,
                "'" + std::string(choice) + "' is not an option for " + anomaly.anomaly_id,
                std::string(choice));
  }
  if (choice == kAbortOption) return false;

  const std::size_t slot = slot_of(anomaly.anomaly_id);
  const std::string picked(choice);
  if (choice == kReduceOption) {
    working_.ingredients[slot].quantity_ml = anomaly.available_ml;
    reduced_.push_back(working_.ingredients[slot].label);
  } else if (std::find(anomaly.candidate_items.begin(), anomaly.candidate_items.end(), picked) !=
             anomaly.candidate_items.end()) {
    confirmed_[picked] = anomaly.subject_label;
  } else {
    substitute(slot, picked, false);
  }
  refresh();
  return true;
}

void Reconciler::resolve_unattended() {
  const auto outstanding = anomalies_;
  for (const auto& a : outstanding) {
    const std::size_t slot = slot_of(a.anomaly_id);
    if (a.kind == AnomalyKind::kInsufficientQuantity) {
      if (!(a.available_ml > 0.0)) {
        throw Error(ErrorCode::kUnresolvable, a.subject_label + " is empty", a.anomaly_id);
      }
      working_.ingredients[slot].quantity_ml = a.available_ml;
      reduced_.push_back(a.subject_label);
      continue;
    }

    // Follow the rule chain until a target is on the table.
    const InventorySnapshot eff = effective_snapshot();
    std::vector<std::string> hops;
    std::set<std::string> seen = visited_[slot];
    std::string current = a.subject_label;
    const InventoryItem* found = nullptr;
    while (found == nullptr) {
      const auto rule = std::find_if(rules_.begin(), rules_.end(), [&](const SubstitutionRule& r) {
        if (r.from_label != current || seen.contains(r.to_label)) return false;
        return std::none_of(working_.ingredients.begin(), working_.ingredients.end(),
                            [&](const IngredientReq& ing) { return ing.label == r.to_label; });
      });
      if (rule == rules_.end()) {
        throw Error(ErrorCode::kUnresolvable,
                    "no predefined rule resolves " + a.anomaly_id, a.anomaly_id);
      }
      hops.push_back(rule->to_label);
      seen.insert(rule->to_label);
      current = rule->to_label;
      found = select_item(eff, current);
    }
    for (const auto& hop : hops) substitute(slot, hop, true);
    auto& ing = working_.ingredients[slot];
    if (found->available_ml < ing.quantity_ml) {
      if (!(found->available_ml > 0.0)) {
        throw Error(ErrorCode::kUnresolvable, current + " is empty", a.anomaly_id);
      }
      ing.quantity_ml = found->available_ml;
      reduced_.push_back(ing.label);
    }
  }
  refresh();
  if (!anomalies_.empty()) {
    throw Error(ErrorCode::kUnresolvable, "anomalies remain after applying rules",
                anomalies_.front().anomaly_id);
  }
}

ResolvedRecipe Reconciler::result() const {
  if (!anomalies_.empty()) {
    throw Error(ErrorCode::kUnresolvedRecipe,
                std::to_string(anomalies_.size()) + " anomalies outstanding", anomalies_.front().anomaly_id);
  }
  const InventorySnapshot eff = effective_snapshot();
  ResolvedRecipe r;
  r.recipe_id = base_.id;
  r.recipe_name = base_.name;
  for (std::size_t i = 0; i < working_.ingredients.size(); ++i) {
    const auto& ing = working_.ingredients[i];
    const InventoryItem* item = select_item(eff, ing.label);
    r.bindings.push_back({ing, base_.ingredients[i].label, item->item_id, item->pose_world,
                          item->available_ml});
  }
  r.applied_substitutions = applied_;
  r.reduced_labels = reduced_;
  return r;
}

Resolution resolve(const Recipe& recipe, const InventorySnapshot& snapshot,
                   const std::vector<Anomaly>& anomalies,
                   const std::map<std::string, std::string>& answers,
                   const SubstitutionTable& rules, const DiffOptions& options) {
  for (const auto& [id, choice] : answers) {
    const auto it = std::find_if(anomalies.begin(), anomalies.end(),
                                 [&](const Anomaly& a) { return a.anomaly_id == id; });
    if (it == anomalies.end()) {
      throw Error(ErrorCode::kUnknownAnomalyId, "no outstanding anomaly " + id, id);
    }
    if (choice == kAbortOption) return Aborted{id};
  }
  Reconciler rec(recipe, snapshot, rules, options);
  for (const auto& [id, choice] : answers) rec.answer(id, choice);
  if (!rec.resolved()) return Pending{rec.anomalies()};
  return rec.result();
}

ResolvedRecipe resolve_unattended(const Recipe& recipe, const InventorySnapshot& snapshot,
                                  const SubstitutionTable& rules, const DiffOptions& options) {
  Reconciler rec(recipe, snapshot, rules, options);
  rec.resolve_unattended();
  return rec.result();
}

}  // namespace shaker
