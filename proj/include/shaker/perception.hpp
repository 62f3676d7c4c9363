#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace shaker {

struct BoundingBox {
  double u_min = 0, v_min = 0, u_max = 0, v_max = 0;

  Eigen::Vector2d center() const { return {(u_min + u_max) / 2.0, (v_min + v_max) / 2.0}; }
};

// One record of the vision module's output.
struct Detection {
  std::string label;  // detector class
  std::string text;   // OCR result, may be empty
  BoundingBox bbox;
  double confidence = 0.0;
};

// Pinhole intrinsics plus the camera-to-world rigid transform:
// x_world = rotation * x_camera + translation.
struct CameraModel {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// fx, fy > 0 and rotation orthonormal with det +1 (to 1e-6).
void validate_camera(const CameraModel& cam);

struct DetectionDocument {
  std::string timestamp;
  CameraModel camera;
  std::vector<Detection> detections;
};

// Errors: kMalformedJson, kSchemaViolation with detail = field path such as
// "detections[2].bbox".
DetectionDocument parse_detection_document(std::string_view document);
std::vector<Detection> parse_detections(std::string_view document);
nlohmann::json to_json(const DetectionDocument& doc);

// Intersects the viewing ray through pixel (u, v) with the table plane z = 0.
Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, const CameraModel& cam);

// Pinhole projection of a world point; nullopt if it is not in front of the camera.
std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& world, const CameraModel& cam);

struct InventoryItem {
  std::string item_id;
  std::string label;
  Eigen::Vector3d pose_world = Eigen::Vector3d::Zero();
  double available_ml = 0.0;
  bool readable = false;
};

struct InventorySnapshot {
  std::string timestamp;
  std::vector<InventoryItem> items;

  const InventoryItem* find(std::string_view item_id) const;
};

nlohmann::json to_json(const InventorySnapshot& snapshot);

struct SnapshotConfig {
  double confidence_threshold = 0.5;
  double default_volume_ml = 700.0;
  // Keys are normalized labels.
  std::map<std::string, double, std::less<>> volume_by_label;

  double volume_for(std::string_view label) const;
};

// Item ids are "item-<index of the detection in the document>", so they stay
// stable when the threshold filters detections out.
InventorySnapshot build_snapshot(const std::vector<Detection>& detections, const CameraModel& cam,
                                 const SnapshotConfig& config, std::string timestamp = {});
InventorySnapshot build_snapshot(const DetectionDocument& doc, const SnapshotConfig& config);

// Holds the current snapshot. Publishing swaps a whole immutable snapshot in,
// so readers always see a complete one.
class InventoryStore {
 public:
  void publish(InventorySnapshot snapshot);
  std::shared_ptr<const InventorySnapshot> current() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const InventorySnapshot> current_ = std::make_shared<InventorySnapshot>();
};

}  // namespace shaker
