#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "shaker/error.hpp"
#include "shaker/reconciliation.hpp"
#include "support.hpp"

using namespace shaker;
using support::item;
using support::recipe;

namespace {

InventorySnapshot snap(std::vector<InventoryItem> items) {
  InventorySnapshot s;
  s.items = std::move(items);
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Diff, MissingSugarSuggestsHoney) {
  const auto anomalies = diff(recipe("r", {{"lime", 20}, {"sugar", 10}}), snap({item("item-0", "lime", 500)}),
                              default_substitution_table());
  ASSERT_EQ(anomalies.size(), 1u);
  EXPECT_EQ(anomalies[0].kind, AnomalyKind::kMissingIngredient);
  EXPECT_EQ(anomalies[0].subject_label, "sugar");
  EXPECT_EQ(anomalies[0].anomaly_id, "missing:sugar");
  EXPECT_EQ(anomalies[0].suggestions, std::vector<std::string>{"honey"});

  const auto prompt = propose_prompt(anomalies[0]);
  EXPECT_EQ(prompt.text, "Sugar is missing. Would you like to use honey?");
  EXPECT_EQ(prompt.options, (std::vector<std::string>{"honey", "abort"}));
}

TEST(Diff, FullyStockedHasNoAnomalies) {
  EXPECT_TRUE(diff(recipe("r", {{"gin", 50}, {"tonic water", 100}}),
                   snap({item("item-0", "gin", 700), item("item-1", "tonic water", 700)}), support::test_rules())
                  .empty());
}

TEST(Diff, InsufficientQuantity) {
  const auto anomalies =
      diff(recipe("r", {{"gin", 100}}), snap({item("item-0", "gin", 50)}), default_substitution_table());
  ASSERT_EQ(anomalies.size(), 1u);
  EXPECT_EQ(anomalies[0].kind, AnomalyKind::kInsufficientQuantity);
  EXPECT_EQ(anomalies[0].required_ml, 100);
  EXPECT_EQ(anomalies[0].available_ml, 50);
  const auto prompt = propose_prompt(anomalies[0]);
  EXPECT_EQ(prompt.text, "Only 50 ml of gin is available, but 100 ml is required. Would you like to reduce it to 50 ml?");
  EXPECT_EQ(prompt.options, (std::vector<std::string>{"reduce-to-available", "abort"}));

  Anomaly empty = anomalies[0];
  empty.available_ml = 0;
  EXPECT_EQ(propose_prompt(empty).options, std::vector<std::string>{"abort"});
}

TEST(Diff, NoSuggestionsOffersOnlyAbort) {
  const auto anomalies = diff(recipe("r", {{"mint", 5}}), snap({}), default_substitution_table());
  ASSERT_EQ(anomalies.size(), 1u);
  const auto prompt = propose_prompt(anomalies[0]);
  EXPECT_EQ(prompt.text, "Mint is missing and no substitute is available.");
  EXPECT_EQ(prompt.options, std::vector<std::string>{"abort"});
}

TEST(Diff, DuplicateBottlesPickMostVolumeThenSmallestId) {
  const auto s = snap({item("item-3", "gin", 300), item("item-1", "gin", 500), item("item-2", "gin", 500)});
  EXPECT_EQ(select_item(s, "gin")->item_id, "item-1");
  EXPECT_TRUE(diff(recipe("r", {{"gin", 450}}), s, {}).empty());
  EXPECT_EQ(select_item(s, "vodka"), nullptr);
}

TEST(Diff, UnreadableBottle) {
  const auto anomalies = diff(recipe("r", {{"lime juice", 20}, {"sugar", 15}}),
                              snap({item("item-0", "lime juice", 500), item("item-1", "bottle", 700, false)}),
                              default_substitution_table());
  ASSERT_EQ(anomalies.size(), 1u);
  EXPECT_EQ(anomalies[0].kind, AnomalyKind::kUnreadableLabel);
  EXPECT_EQ(anomalies[0].candidate_items, std::vector<std::string>{"item-1"});
  const auto prompt = propose_prompt(anomalies[0]);
  EXPECT_EQ(prompt.text,
            "Sugar was not found, but 1 bottle label could not be read. Is it item-1? "
            "Otherwise, would you like to use honey?");
  EXPECT_EQ(prompt.options, (std::vector<std::string>{"item-1", "honey", "abort"}));
}

TEST(Diff, AmbiguousNearLabels) {
  const auto anomalies = diff(recipe("r", {{"lime juice", 20}}),
                              snap({item("item-0", "fresh lime juice", 500), item("item-1", "lime juices", 500),
                                    item("item-2", "vodka", 500)}),
                              {});
  ASSERT_EQ(anomalies.size(), 1u);
  EXPECT_EQ(anomalies[0].kind, AnomalyKind::kAmbiguousMatch);
  EXPECT_EQ(anomalies[0].suggestions, (std::vector<std::string>{"lime juices", "fresh lime juice"}));
  EXPECT_EQ(propose_prompt(anomalies[0]).text,
            "Lime juice was not found exactly. Would you like to use lime juices or fresh lime juice?");
}

TEST(Diff, MatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  const auto rules = support::test_rules();
  std::map<std::string, int> kinds;
  for (int i = 0; i < 1000; ++i) {
    const auto p = support::random_pair(rng);
    const auto got = diff(p.recipe, p.snapshot, rules);
    const auto want = oracle::diff(p.recipe, p.snapshot, rules);
    ASSERT_TRUE(oracle::same(got, want)) << "pair " << i;
    for (const auto& w : want) ++kinds[w.kind];
  }
  // The generator has to exercise every kind for the comparison to mean much.
  for (const char* k : {"missing", "insufficient", "unreadable", "ambiguous"}) EXPECT_GT(kinds[k], 10) << k;
}

TEST(Diff, AddingAnItemNeverCreatesMissing) {
  std::mt19937_64 rng(5);
  const auto& vocab = support::vocabulary();
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> ml(0, 300);
  for (int i = 0; i < 300; ++i) {
    auto p = support::random_pair(rng);
    const auto before = diff(p.recipe, p.snapshot, support::test_rules());
    p.snapshot.items.push_back(item("item-new", vocab[pick(rng)], ml(rng)));
    const auto after = diff(p.recipe, p.snapshot, support::test_rules());
    for (const auto& a : after) {
      if (a.kind != AnomalyKind::kMissingIngredient) continue;
      EXPECT_TRUE(std::any_of(before.begin(), before.end(),
                              [&](const Anomaly& b) { return b.subject_label == a.subject_label; }));
    }
  }
}

TEST(Resolve, AnswerSubstitutes) {
  const auto r = recipe("daiquiri", {{"white rum", 60}, {"lime juice", 25}, {"sugar", 15}});
  const auto s = snap({item("item-0", "white rum", 700), item("item-1", "lime juice", 700),
                       item("item-2", "honey", 200)});
  const auto anomalies = diff(r, s, default_substitution_table());
  const auto res = resolve(r, s, anomalies, {{"missing:sugar", "honey"}}, default_substitution_table());
  const auto* done = std::get_if<ResolvedRecipe>(&res);
  ASSERT_NE(done, nullptr);
  ASSERT_EQ(done->applied_substitutions.size(), 1u);
  EXPECT_EQ(done->applied_substitutions[0], (AppliedSubstitution{"sugar", "honey", false}));
  EXPECT_EQ(done->bindings[2].item_id, "item-2");
  EXPECT_EQ(done->bindings[2].requirement.label, "honey");
  EXPECT_EQ(done->bindings[2].original_label, "sugar");

  const auto aborted = resolve(r, s, anomalies, {{"missing:sugar", "abort"}}, default_substitution_table());
  EXPECT_TRUE(std::holds_alternative<Aborted>(aborted));

  EXPECT_EQ(code_of([&] { resolve(r, s, anomalies, {{"missing:gin", "honey"}}, default_substitution_table()); }),
            ErrorCode::kUnknownAnomalyId);
  EXPECT_EQ(code_of([&] { resolve(r, s, anomalies, {{"missing:sugar", "vodka"}}, default_substitution_table()); }),
            ErrorCode::kIllegalOption);

  const auto pending = resolve(r, s, anomalies, {}, default_substitution_table());
  ASSERT_TRUE(std::holds_alternative<Pending>(pending));
  EXPECT_EQ(std::get<Pending>(pending).anomalies, anomalies);
}

TEST(Resolve, Unattended) {
  const auto r = recipe("daiquiri", {{"white rum", 60}, {"sugar", 15}, {"lime juice", 25}});
  const auto s = snap({item("item-0", "white rum", 700), item("item-1", "lime juice", 10),
                       item("item-2", "honey", 200)});
  const auto done = resolve_unattended(r, s, default_substitution_table());
  EXPECT_EQ(done.applied_substitutions, (std::vector<AppliedSubstitution>{{"sugar", "honey", true}}));
  EXPECT_EQ(done.reduced_labels, std::vector<std::string>{"lime juice"});
  EXPECT_EQ(done.bindings[2].requirement.quantity_ml, 10);
  EXPECT_TRUE(diff(recipe("x", {{"white rum", 60}, {"honey", 15}, {"lime juice", 10}}), s, {}).empty());

  EXPECT_EQ(code_of([&] { resolve_unattended(recipe("x", {{"mint", 5}}), s, default_substitution_table()); }),
            ErrorCode::kUnresolvable);
}

TEST(Resolve, RuleChainsNeverRevisitALabel) {
  const SubstitutionTable cyclic = {{"a b c", "d e f", ""}, {"d e f", "a b c", ""}};
  EXPECT_EQ(code_of([&] { resolve_unattended(recipe("x", {{"a b c", 5}}), snap({}), cyclic); }),
            ErrorCode::kUnresolvable);

  // Interactive: sugar -> honey (absent) -> agave syrup; sugar is never offered again.
  Reconciler rec(recipe("x", {{"sugar", 10}}), snap({item("item-0", "agave syrup", 100)}), support::test_rules());
  ASSERT_TRUE(rec.answer("missing:sugar", "honey"));
  ASSERT_EQ(rec.anomalies().size(), 1u);
  EXPECT_EQ(rec.anomalies()[0].anomaly_id, "missing:honey");
  EXPECT_EQ(rec.anomalies()[0].suggestions, std::vector<std::string>{"agave syrup"});
  ASSERT_TRUE(rec.answer("missing:honey", "agave syrup"));
  EXPECT_TRUE(rec.resolved());
  EXPECT_EQ(rec.result().bindings[0].item_id, "item-0");
}

TEST(Resolve, ConfirmingAnUnreadableBottle) {
  Reconciler rec(recipe("x", {{"sugar", 10}}), snap({item("item-4", "bottle", 700, false)}),
                 default_substitution_table());
  ASSERT_EQ(rec.anomalies().size(), 1u);
  EXPECT_EQ(rec.anomalies()[0].kind, AnomalyKind::kUnreadableLabel);
  ASSERT_TRUE(rec.answer(rec.anomalies()[0].anomaly_id, "item-4"));
  ASSERT_TRUE(rec.resolved());
  EXPECT_EQ(rec.result().bindings[0].item_id, "item-4");
}

TEST(Resolve, SuggestionsSkipLabelsOtherIngredientsUse) {
  // lime juice is missing; its rule target lemon juice is already its own ingredient.
  Reconciler rec(recipe("x", {{"lime juice", 10}, {"lemon juice", 10}}), snap({item("item-0", "lemon juice", 100)}),
                 support::test_rules());
  ASSERT_EQ(rec.anomalies().size(), 1u);
  EXPECT_TRUE(rec.anomalies()[0].suggestions.empty());
}

TEST(Resolve, UnattendedResultsDiffClean) {
  std::mt19937_64 rng(1234);
  const auto rules = support::test_rules();
  int resolved = 0;
  for (int i = 0; i < 500; ++i) {
    const auto p = support::random_pair(rng);
    try {
      const auto r = resolve_unattended(p.recipe, p.snapshot, rules);
      ++resolved;
      Recipe effective{"e", "e", {}, std::nullopt};
      for (const auto& b : r.bindings) effective.ingredients.push_back(b.requirement);
      EXPECT_TRUE(diff(effective, p.snapshot, rules).empty());
      EXPECT_LE(r.applied_substitutions.size(), rules.size());
      for (const auto& b : r.bindings) {
        const auto* it = p.snapshot.find(b.item_id);
        ASSERT_NE(it, nullptr);
        EXPECT_GE(it->available_ml, b.requirement.quantity_ml);
      }
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnresolvable);
    }
  }
  EXPECT_GT(resolved, 50);
}

TEST(SubstitutionTable, ParsesAndRejects) {
  const auto t = parse_substitution_table(R"([{"from":"Sugar","to":"Honey","note":"sweet"}])");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].from_label, "sugar");
  EXPECT_EQ(t[0].to_label, "honey");
  EXPECT_EQ(code_of([] { parse_substitution_table(R"([{"from":"a","to":"A","note":""}])"); }),
            ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([] { parse_substitution_table("{"); }), ErrorCode::kMalformedJson);
  EXPECT_GE(load_substitution_table((support::kDataDir / "substitutions.json").string()).size(), 1u);
}
