#include "shaker/recipe_corpus.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "shaker/error.hpp"

namespace shaker {

using detail::json;

void validate_recipe(Recipe& recipe) {
  if (recipe.id.empty()) detail::schema_violation("id", "must be non-empty");
  if (recipe.ingredients.empty()) detail::schema_violation("ingredients", "must be non-empty");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < recipe.ingredients.size(); ++i) {
    auto& ing = recipe.ingredients[i];
    const auto path = detail::index_path("ingredients", i);
    ing.label = normalize_text(ing.label);
    if (ing.label.empty()) detail::schema_violation(path + ".label", "must be non-empty");
    if (!seen.insert(ing.label).second) {
      detail::schema_violation(path + ".label", "duplicate label '" + ing.label + "'");
    }
    if (!(ing.quantity_ml > 0.0)) detail::schema_violation(path + ".quantity_ml", "must be > 0");
    if (!(ing.density_g_per_ml >= 0.1 && ing.density_g_per_ml <= 2.0)) {
      detail::schema_violation(path + ".density_g_per_ml", "must be within [0.1, 2.0]");
    }
  }
}

Recipe recipe_from_json(const json& doc) {
  Recipe r;
  r.id = detail::require_string(doc, "id", "");
  r.name = detail::require_string(doc, "name", "");
  const auto& ings = detail::require(doc, "ingredients", "");
  if (!ings.is_array()) detail::schema_violation("ingredients", "expected an array");
  for (std::size_t i = 0; i < ings.size(); ++i) {
    const auto path = detail::index_path("ingredients", i);
    IngredientReq ing;
    ing.label = detail::require_string(ings[i], "label", path);
    ing.quantity_ml = detail::require_number(ings[i], "quantity_ml", path);
    if (ings[i].contains("density_g_per_ml")) {
      ing.density_g_per_ml = detail::require_number(ings[i], "density_g_per_ml", path);
    }
    r.ingredients.push_back(std::move(ing));
  }
  if (doc.contains("notes") && !doc["notes"].is_null()) {
    r.notes = detail::require_string(doc, "notes", "");
  }
  validate_recipe(r);
  return r;
}

json to_json(const Recipe& recipe) {
  json ings = json::array();
  for (const auto& ing : recipe.ingredients) {
    ings.push_back({{"label", ing.label},
                    {"quantity_ml", ing.quantity_ml},
                    {"density_g_per_ml", ing.density_g_per_ml}});
  }
  json doc = {{"id", recipe.id}, {"name", recipe.name}, {"ingredients", std::move(ings)}};
  if (recipe.notes) doc["notes"] = *recipe.notes;
  return doc;
}

std::string recipe_document_text(const Recipe& recipe) {
  std::string text = recipe.name;
  for (const auto& ing : recipe.ingredients) {
    text += ' ';
    text += ing.label;
  }
  return text;
}

std::vector<Recipe> load_recipe_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "not a directory: " + dir.string(), dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<Recipe> recipes;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + file.string(), file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Recipe r;
    try {
      r = recipe_from_json(detail::parse_json(buf.str()));
    } catch (const Error& e) {
      throw Error(e.code(), file.filename().string() + ": " + e.what(), e.detail());
    }
    if (r.id != file.stem().string()) {
      throw Error(ErrorCode::kSchemaViolation,
                  file.filename().string() + ": id '" + r.id + "' does not match file name", "id");
    }
    recipes.push_back(std::move(r));
  }
  std::sort(recipes.begin(), recipes.end(),
            [](const Recipe& a, const Recipe& b) { return a.id < b.id; });
  return recipes;
}

void save_recipe(const std::filesystem::path& dir, const Recipe& recipe) {
  const auto path = dir / (recipe.id + ".json");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string(), path.string());
  out << to_json(recipe).dump(2) << '\n';
}

std::vector<RetrievalHit> rank_by_cosine(std::span<const double> query,
                                         std::span<const Candidate> candidates,
                                         std::size_t k) {
  std::vector<RetrievalHit> hits;
  hits.reserve(candidates.size());
  for (const auto& c : candidates) {
    hits.push_back({c.id, cosine(query, c.vector), 0});
  }
  const auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.recipe_id < b.recipe_id;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
  hits.resize(n);
  for (std::size_t i = 0; i < n; ++i) hits[i].rank = i + 1;
  return hits;
}

void RecipeIndex::add(Recipe recipe) {
  validate_recipe(recipe);
  Entry entry{recipe, embed(recipe_document_text(recipe))};
  std::unique_lock lock(mutex_);
  if (entries_.contains(recipe.id)) {
    throw Error(ErrorCode::kDuplicateId, "recipe id already indexed: " + recipe.id, recipe.id);
  }
  entries_.emplace(recipe.id, std::move(entry));
}

void RecipeIndex::remove(std::string_view id) {
  std::unique_lock lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownId, "no such recipe: " + std::string(id), std::string(id));
  }
  entries_.erase(it);
}

void RecipeIndex::reload(std::vector<Recipe> recipes) {
  std::map<std::string, Entry, std::less<>> fresh;
  for (auto& r : recipes) {
    validate_recipe(r);
    auto emb = embed(recipe_document_text(r));
    const std::string id = r.id;
    if (!fresh.emplace(id, Entry{std::move(r), emb}).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate recipe id: " + id, id);
    }
  }
  std::unique_lock lock(mutex_);
  entries_.swap(fresh);
}

std::vector<RetrievalHit> RecipeIndex::retrieve(std::string_view query, std::size_t k) const {
  const Embedding q = embed(query);
  std::shared_lock lock(mutex_);
  std::vector<Candidate> candidates;
  candidates.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) {
    candidates.push_back({id, entry.embedding.values});
  }
  return rank_by_cosine(q.values, candidates, k);
}

std::optional<Recipe> RecipeIndex::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.recipe;
}

std::vector<Recipe> RecipeIndex::recipes() const {
  std::shared_lock lock(mutex_);
  std::vector<Recipe> out;
  out.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) out.push_back(entry.recipe);
  return out;
}

std::size_t RecipeIndex::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace shaker
