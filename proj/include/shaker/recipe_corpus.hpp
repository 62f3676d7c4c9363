#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shaker/text.hpp"

namespace shaker {

struct IngredientReq {
  std::string label;  // normalized
  double quantity_ml = 0.0;
  double density_g_per_ml = 1.0;

  double mass_g() const { return quantity_ml * density_g_per_ml; }
  friend bool operator==(const IngredientReq&, const IngredientReq&) = default;
};

struct Recipe {
  std::string id;
  std::string name;
  std::vector<IngredientReq> ingredients;
  std::optional<std::string> notes;

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

// Throws Error(kSchemaViolation) naming the offending field. Labels are
// normalized in place before the uniqueness check.
void validate_recipe(Recipe& recipe);

Recipe recipe_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Recipe& recipe);

// Text that represents a recipe in the index: name plus ingredient labels.
std::string recipe_document_text(const Recipe& recipe);

// One `<id>.json` per recipe. Returned in ascending id order.
std::vector<Recipe> load_recipe_directory(const std::filesystem::path& dir);
void save_recipe(const std::filesystem::path& dir, const Recipe& recipe);

struct RetrievalHit {
  std::string recipe_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

struct Candidate {
  std::string id;
  std::span<const double> vector;
};

// Exact top-k by cosine, descending score, ascending id on ties.
std::vector<RetrievalHit> rank_by_cosine(std::span<const double> query,
                                         std::span<const Candidate> candidates,
                                         std::size_t k);

// Flat in-memory index. Readers share a lock; add/remove/reload take it
// exclusively, so a reader never observes a half-applied mutation.
class RecipeIndex {
 public:
  void add(Recipe recipe);
  void remove(std::string_view id);
  // Replaces the whole corpus atomically.
  void reload(std::vector<Recipe> recipes);

  std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) const;

  std::optional<Recipe> find(std::string_view id) const;
  std::vector<Recipe> recipes() const;
  std::size_t size() const;

 private:
  struct Entry {
    Recipe recipe;
    Embedding embedding;
  };

  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace shaker
