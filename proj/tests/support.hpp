#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <filesystem>
#include <set>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "shaker/perception.hpp"
#include "shaker/recipe_corpus.hpp"
#include "shaker/reconciliation.hpp"

namespace support {

inline const std::filesystem::path kDataDir = SHAKER_DATA_DIR;

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline shaker::InventoryItem item(std::string id, std::string label, double ml, bool readable = true) {
  shaker::InventoryItem it;
  it.item_id = std::move(id);
  it.label = std::move(label);
  it.available_ml = ml;
  it.readable = readable;
  return it;
}

inline shaker::Recipe recipe(std::string id, std::vector<std::pair<std::string, double>> ingredients) {
  shaker::Recipe r;
  r.id = id;
  r.name = std::move(id);
  for (auto& [label, ml] : ingredients) r.ingredients.push_back({std::move(label), ml, 1.0});
  return r;
}

// Camera at `height` looking straight down, image x along world x.
inline shaker::CameraModel downward_camera(double f = 600, double cx = 320, double cy = 240, double height = 1.0) {
  shaker::CameraModel cam;
  cam.fx = cam.fy = f;
  cam.cx = cx;
  cam.cy = cy;
  cam.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  cam.translation = {0, 0, height};
  return cam;
}

// Random camera above the table whose optical axis points at least somewhat down.
inline shaker::CameraModel random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1), h(0.3, 2.5), f(300, 1200);
  std::normal_distribution<double> n(0, 1);
  shaker::CameraModel cam;
  cam.fx = f(rng);
  cam.fy = cam.fx * (1 + 0.1 * u(rng));
  cam.cx = 320 + 20 * u(rng);
  cam.cy = 240 + 20 * u(rng);
  for (;;) {
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    cam.rotation = q.toRotationMatrix();
    if (cam.rotation.col(2).z() < -0.3) break;
  }
  cam.translation = {u(rng), u(rng), h(rng)};
  return cam;
}

// Pinhole projection written out by hand: camera coords = R^T (p - t).
inline bool pinhole(const shaker::CameraModel& cam, const Eigen::Vector3d& p, Eigen::Vector2d& pixel) {
  const Eigen::Vector3d c = cam.rotation.transpose() * (p - cam.translation);
  if (c.z() <= 1e-6) return false;
  pixel = {cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy};
  return true;
}

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> v = {
      "lime juice", "lime juices", "fresh lime juice", "lemon juice", "sugar",      "sugar syrup",
      "honey",      "gin",         "dry gin",          "white rum",   "dark rum",   "tonic water",
      "soda water", "vodka",       "triple sec",       "orange juice", "orange juices", "cranberry juice",
      "cola",       "agave syrup", "tequila",          "mint",
  };
  return v;
}

struct Pair {
  shaker::Recipe recipe;
  shaker::InventorySnapshot snapshot;
};

// Random (recipe, snapshot) with roughly half of the recipe's labels stocked,
// some decoys, occasional duplicates, short stock and unreadable bottles.
inline Pair random_pair(std::mt19937_64& rng) {
  const auto& vocab = vocabulary();
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> n_ing(1, 6), qty(5, 120), stock(0, 300), n_decoy(0, 5);
  std::bernoulli_distribution coin(0.5), rare(0.1);

  Pair p;
  p.recipe.id = "r";
  p.recipe.name = "random";
  std::set<std::string> used;
  const int n = n_ing(rng);
  while (static_cast<int>(p.recipe.ingredients.size()) < n) {
    const auto& label = vocab[pick(rng)];
    if (used.insert(label).second) p.recipe.ingredients.push_back({label, double(qty(rng)), 1.0});
  }
  int next = 0;
  auto add = [&](const std::string& label, bool readable) {
    p.snapshot.items.push_back(item("item-" + std::to_string(next++), readable ? label : "bottle",
                                    double(stock(rng)), readable));
  };
  for (const auto& ing : p.recipe.ingredients) {
    if (coin(rng)) add(ing.label, true);
    if (rare(rng)) add(ing.label, true);  // duplicate bottle
  }
  for (int i = n_decoy(rng); i > 0; --i) add(vocab[pick(rng)], !rare(rng));
  std::shuffle(p.snapshot.items.begin(), p.snapshot.items.end(), rng);
  return p;
}

// A fully stocked recipe of n ingredients with random volumes and densities,
// resolved against its snapshot.
struct Stocked {
  shaker::ResolvedRecipe resolved;
  shaker::InventorySnapshot snapshot;
};

inline Stocked random_stocked(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> qty(1, 150), density(0.1, 2.0), extra(0, 500), pos(-0.5, 0.5);
  shaker::Recipe r;
  r.id = "random-" + std::to_string(n);
  r.name = r.id;
  Stocked s;
  for (int i = 0; i < n; ++i) {
    const std::string label = "liquid " + std::string(1, static_cast<char>('a' + i));
    const double q = qty(rng);
    r.ingredients.push_back({label, q, density(rng)});
    auto it = item("item-" + std::to_string(i), label, q + extra(rng));
    it.pose_world = {pos(rng), pos(rng), 0};
    s.snapshot.items.push_back(it);
  }
  shaker::Reconciler rec(r, s.snapshot, {});
  s.resolved = rec.result();
  return s;
}

inline shaker::SubstitutionTable test_rules() {
  return {{"sugar", "honey", ""},           {"honey", "agave syrup", ""}, {"lime juice", "lemon juice", ""},
          {"lemon juice", "lime juice", ""}, {"white rum", "dark rum", ""}, {"tonic water", "soda water", ""}};
}

}  // namespace support
