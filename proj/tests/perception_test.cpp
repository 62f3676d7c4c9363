#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "shaker/error.hpp"
#include "shaker/perception.hpp"
#include "support.hpp"

using namespace shaker;
using nlohmann::json;

namespace {

json document(json detections) {
  return {{"timestamp", "2024-05-01T12:00:00Z"},
          {"camera",
           {{"fx", 600}, {"fy", 600}, {"cx", 320}, {"cy", 240},
            {"rotation", {1, 0, 0, 0, -1, 0, 0, 0, -1}}, {"translation", {0, 0, 1}}}},
          {"detections", std::move(detections)}};
}

json detection(const char* label, const char* text, std::vector<double> bbox, double confidence) {
  return {{"label", label}, {"text", text}, {"bbox", bbox}, {"confidence", confidence}};
}

std::string violation_path(const json& doc) {
  try {
    parse_detection_document(doc.dump());
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
    return e.detail();
  }
  return "<accepted>";
}

}  // namespace

TEST(ParseDetections, ValidDocument) {
  const json doc = document({detection("bottle", "Lime Juice", {10, 20, 30, 40}, 0.9),
                             detection("bottle", "", {50, 20, 70, 40}, 0.7),
                             detection("bottle", "Gin", {90, 20, 110, 40}, 0.3)});
  const auto dets = parse_detections(doc.dump());
  ASSERT_EQ(dets.size(), 3u);
  EXPECT_EQ(dets[0].text, "Lime Juice");
  EXPECT_EQ(dets[1].bbox.u_min, 50);
  EXPECT_EQ(dets[2].confidence, 0.3);

  const auto parsed = parse_detection_document(doc.dump());
  EXPECT_EQ(parsed.timestamp, "2024-05-01T12:00:00Z");
  EXPECT_EQ(parse_detection_document(to_json(parsed).dump()).detections.size(), 3u);
}

TEST(ParseDetections, NamesOffendingField) {
  EXPECT_EQ(violation_path(document({detection("b", "x", {30, 20, 10, 40}, 0.9)})), "detections[0].bbox");
  EXPECT_EQ(violation_path(document({detection("b", "x", {10, 20, 30, 40}, 0.9),
                                     detection("b", "x", {10, 20, 30, 40}, 1.3)})),
            "detections[1].confidence");
  json no_label = document({detection("b", "x", {10, 20, 30, 40}, 0.9)});
  no_label["detections"][0].erase("label");
  EXPECT_EQ(violation_path(no_label), "detections[0].label");
  json numeric_text = document({detection("b", "x", {10, 20, 30, 40}, 0.9)});
  numeric_text["detections"][0]["text"] = 7;
  EXPECT_EQ(violation_path(numeric_text), "detections[0].text");
  // A record without OCR text is an unread label, not an error.
  json no_text = document({detection("b", "x", {10, 20, 30, 40}, 0.9)});
  no_text["detections"][0].erase("text");
  EXPECT_EQ(violation_path(no_text), "<accepted>");
  json bad_time = document(json::array());
  bad_time["timestamp"] = "yesterday";
  EXPECT_EQ(violation_path(bad_time), "timestamp");
  json bad_rot = document(json::array());
  bad_rot["camera"]["rotation"] = {1, 0, 0, 0, 1, 0, 0, 0, -1};
  EXPECT_EQ(violation_path(bad_rot), "camera.rotation");
  json bad_fx = document(json::array());
  bad_fx["camera"]["fx"] = 0;
  EXPECT_EQ(violation_path(bad_fx), "camera.fx");

  try {
    parse_detections("{not json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedJson);
  }
}

TEST(Backproject, PrincipalPointHitsFootprint) {
  const auto cam = support::downward_camera(600, 320, 240, 1.0);
  const auto p = backproject({320, 240}, cam);
  EXPECT_NEAR(p.x(), 0, 1e-12);
  EXPECT_NEAR(p.y(), 0, 1e-12);
  EXPECT_EQ(p.z(), 0);
}

// With f = 500 the pixel one focal length right of centre has camera ray
// (1, 0, 1); rotated into the world it is (1, 0, -1), reaching the table at t = 1.
TEST(Backproject, OneFocalLengthOff) {
  const auto cam = support::downward_camera(500, 320, 240, 1.0);
  const auto p = backproject({320 + 500, 240}, cam);
  EXPECT_NEAR(p.x(), 1.0, 1e-12);
  EXPECT_NEAR(p.y(), 0.0, 1e-12);
  EXPECT_EQ(p.z(), 0.0);
}

TEST(Backproject, Degenerate) {
  CameraModel level;  // optical axis along world +z rotated to horizontal
  level.fx = level.fy = 500;
  level.cx = 320;
  level.cy = 240;
  level.rotation << 1, 0, 0, 0, 0, 1, 0, -1, 0;  // camera z -> world y
  level.translation = {0, 0, 1};
  try {
    backproject({320, 240}, level);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRayParallelToPlane);
  }

  auto up = support::downward_camera();
  up.rotation = Eigen::Matrix3d::Identity();  // looking up from above the table
  try {
    backproject({320, 240}, up);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntersectionBehindCamera);
  }
}

TEST(Backproject, RoundTripRandomCameras) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2, 2);
  int checked = 0;
  while (checked < 1000) {
    const auto cam = support::random_camera(rng);
    const Eigen::Vector3d p(cam.translation.x() + u(rng), cam.translation.y() + u(rng), 0);
    Eigen::Vector2d px;
    if (!support::pinhole(cam, p, px)) continue;
    const auto lib = project(p, cam);
    ASSERT_TRUE(lib.has_value());
    EXPECT_LT((*lib - px).norm(), 1e-6);
    const auto back = backproject(px, cam);
    EXPECT_LT((back - p).norm(), 1e-6);
    EXPECT_LT(std::abs(back.z()), 1e-9);
    ++checked;
  }
}

TEST(BuildSnapshot, LabelsAndReadability) {
  const auto doc = parse_detection_document(document({detection("bottle", "Lime Juice", {300, 200, 340, 280}, 0.9),
                                                      detection("bottle", "", {100, 200, 140, 280}, 0.8)})
                                                .dump());
  SnapshotConfig cfg;
  cfg.volume_by_label["lime juice"] = 250;
  const auto snap = build_snapshot(doc, cfg);
  ASSERT_EQ(snap.items.size(), 2u);
  EXPECT_EQ(snap.items[0].label, "lime juice");
  EXPECT_TRUE(snap.items[0].readable);
  EXPECT_EQ(snap.items[0].available_ml, 250);
  EXPECT_EQ(snap.items[1].label, "bottle");
  EXPECT_FALSE(snap.items[1].readable);
  EXPECT_EQ(snap.items[1].available_ml, 700);
  EXPECT_NE(snap.items[0].item_id, snap.items[1].item_id);
  EXPECT_EQ(snap.timestamp, "2024-05-01T12:00:00Z");
  // Box centre (320, 240) is the principal point.
  EXPECT_LT(snap.items[0].pose_world.norm(), 1e-12);
  EXPECT_TRUE(build_snapshot(std::vector<Detection>{}, doc.camera, cfg).items.empty());
}

TEST(BuildSnapshot, IdempotentAndMonotoneInThreshold) {
  const auto doc = parse_detection_document(support::read_file(support::kDataDir / "scenes/bar-full.json"));
  SnapshotConfig cfg;
  const auto a = build_snapshot(doc, cfg), b = build_snapshot(doc, cfg);
  EXPECT_EQ(to_json(a), to_json(b));

  std::size_t previous = a.items.size() + 1;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    cfg.confidence_threshold = t;
    const auto snap = build_snapshot(doc, cfg);
    EXPECT_LE(snap.items.size(), previous);
    previous = snap.items.size();
    // Ids stay tied to the detection index.
    for (const auto& it : snap.items) EXPECT_TRUE(a.find(it.item_id) != nullptr);
  }
}

TEST(InventoryStore, ReadersSeeWholeSnapshots) {
  InventoryStore store;
  auto make = [](int n) {
    InventorySnapshot s;
    for (int i = 0; i < n; ++i) s.items.push_back(support::item("item-" + std::to_string(i), "x", n));
    return s;
  };
  std::atomic<bool> stop = false;
  std::atomic<int> torn = 0;
  std::thread reader([&] {
    while (!stop) {
      const auto s = store.current();
      for (const auto& it : s->items) {
        if (it.available_ml != static_cast<double>(s->items.size())) ++torn;
      }
    }
  });
  for (int i = 0; i < 2000; ++i) store.publish(make(i % 7 + 1));
  stop = true;
  reader.join();
  EXPECT_EQ(torn, 0);
}
