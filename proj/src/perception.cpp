#include "shaker/perception.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <regex>

#include "json_util.hpp"
#include "shaker/error.hpp"
#include "shaker/text.hpp"

namespace shaker {

using detail::json;

void validate_camera(const CameraModel& cam) {
  if (!(cam.fx > 0.0)) detail::schema_violation("camera.fx", "must be > 0");
  if (!(cam.fy > 0.0)) detail::schema_violation("camera.fy", "must be > 0");
  const Eigen::Matrix3d gram = cam.rotation.transpose() * cam.rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    detail::schema_violation("camera.rotation", "not orthonormal");
  }
  if (std::abs(cam.rotation.determinant() - 1.0) > 1e-6) {
    detail::schema_violation("camera.rotation", "determinant is not +1");
  }
}

namespace {

std::vector<double> number_array(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_array() || v.size() != n) {
    detail::schema_violation(path, "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(detail::as_number(v[i], detail::index_path(path, i)));
  return out;
}

CameraModel parse_camera(const json& c) {
  CameraModel cam;
  cam.fx = detail::require_number(c, "fx", "camera");
  cam.fy = detail::require_number(c, "fy", "camera");
  cam.cx = detail::require_number(c, "cx", "camera");
  cam.cy = detail::require_number(c, "cy", "camera");
  const auto r = number_array(detail::require(c, "rotation", "camera"), "camera.rotation", 9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) cam.rotation(i, j) = r[static_cast<std::size_t>(i * 3 + j)];
  }
  const auto t = number_array(detail::require(c, "translation", "camera"), "camera.translation", 3);
  cam.translation = {t[0], t[1], t[2]};
  validate_camera(cam);
  return cam;
}

Detection parse_detection(const json& d, const std::string& path) {
  Detection det;
  det.label = detail::require_string(d, "label", path);
  det.text = d.contains("text") ? detail::require_string(d, "text", path) : std::string{};
  const auto b = number_array(detail::require(d, "bbox", path), path + ".bbox", 4);
  det.bbox = {b[0], b[1], b[2], b[3]};
  if (!(det.bbox.u_min < det.bbox.u_max) || !(det.bbox.v_min < det.bbox.v_max)) {
    detail::schema_violation(path + ".bbox", "requires u_min < u_max and v_min < v_max");
  }
  det.confidence = detail::require_number(d, "confidence", path);
  if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
    detail::schema_violation(path + ".confidence", "must be within [0, 1]");
  }
  return det;
}

const std::regex& iso8601() {
  static const std::regex re(
      R"(^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})$)");
  return re;
}

}  // namespace

DetectionDocument parse_detection_document(std::string_view document) {
  const json doc = detail::parse_json(document);
  DetectionDocument out;
  out.timestamp = detail::require_string(doc, "timestamp", "");
  if (!std::regex_match(out.timestamp, iso8601())) {
    detail::schema_violation("timestamp", "expected ISO-8601 date-time");
  }
  out.camera = parse_camera(detail::require(doc, "camera", ""));
  const auto& dets = detail::require(doc, "detections", "");
  if (!dets.is_array()) detail::schema_violation("detections", "expected an array");
  for (std::size_t i = 0; i < dets.size(); ++i) {
    out.detections.push_back(parse_detection(dets[i], detail::index_path("detections", i)));
  }
  return out;
}

std::vector<Detection> parse_detections(std::string_view document) {
  return parse_detection_document(document).detections;
}

json to_json(const DetectionDocument& doc) {
  json rot = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) rot.push_back(doc.camera.rotation(i, j));
  }
  json dets = json::array();
  for (const auto& d : doc.detections) {
    dets.push_back({{"label", d.label},
                    {"text", d.text},
                    {"bbox", {d.bbox.u_min, d.bbox.v_min, d.bbox.u_max, d.bbox.v_max}},
                    {"confidence", d.confidence}});
  }
  const auto& t = doc.camera.translation;
  return {{"timestamp", doc.timestamp},
          {"camera",
           {{"fx", doc.camera.fx},
            {"fy", doc.camera.fy},
            {"cx", doc.camera.cx},
            {"cy", doc.camera.cy},
            {"rotation", rot},
            {"translation", {t.x(), t.y(), t.z()}}}},
          {"detections", dets}};
}

Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, const CameraModel& cam) {
  const Eigen::Vector3d ray_cam((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0);
  const Eigen::Vector3d dir = cam.rotation * ray_cam;
  const Eigen::Vector3d& origin = cam.translation;
  if (std::abs(dir.z()) < 1e-12) {
    throw Error(ErrorCode::kRayParallelToPlane, "viewing ray is parallel to the table plane");
  }
  const double t = -origin.z() / dir.z();
  if (t <= 0.0) {
    throw Error(ErrorCode::kIntersectionBehindCamera, "table plane intersection is behind the camera");
  }
  Eigen::Vector3d p = origin + t * dir;
  p.z() = 0.0;
  return p;
}

std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& world, const CameraModel& cam) {
  const Eigen::Vector3d c = cam.rotation.transpose() * (world - cam.translation);
  if (c.z() <= 0.0) return std::nullopt;
  return Eigen::Vector2d(cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy);
}

const InventoryItem* InventorySnapshot::find(std::string_view item_id) const {
  for (const auto& item : items) {
    if (item.item_id == item_id) return &item;
  }
  return nullptr;
}

json to_json(const InventorySnapshot& snapshot) {
  json items = json::array();
  for (const auto& it : snapshot.items) {
    items.push_back({{"item_id", it.item_id},
                     {"label", it.label},
                     {"pose_world", {it.pose_world.x(), it.pose_world.y(), it.pose_world.z()}},
                     {"available_ml", it.available_ml},
                     {"readable", it.readable}});
  }
  return {{"timestamp", snapshot.timestamp}, {"items", items}};
}

double SnapshotConfig::volume_for(std::string_view label) const {
  const auto it = volume_by_label.find(label);
  return it == volume_by_label.end() ? default_volume_ml : it->second;
}

InventorySnapshot build_snapshot(const std::vector<Detection>& detections, const CameraModel& cam,
                                 const SnapshotConfig& config, std::string timestamp) {
  InventorySnapshot snap;
  snap.timestamp = std::move(timestamp);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& det = detections[i];
    if (det.confidence < config.confidence_threshold) continue;
    InventoryItem item;
    item.item_id = "item-" + std::to_string(i);
    const std::string text = normalize_text(det.text);
    item.readable = !text.empty();
    item.label = item.readable ? text : normalize_text(det.label);
    item.pose_world = backproject(det.bbox.center(), cam);
    item.available_ml = config.volume_for(item.label);
    snap.items.push_back(std::move(item));
  }
  return snap;
}

InventorySnapshot build_snapshot(const DetectionDocument& doc, const SnapshotConfig& config) {
  return build_snapshot(doc.detections, doc.camera, config, doc.timestamp);
}

void InventoryStore::publish(InventorySnapshot snapshot) {
  auto next = std::make_shared<const InventorySnapshot>(std::move(snapshot));
  std::lock_guard lock(mutex_);
  current_ = std::move(next);
}

std::shared_ptr<const InventorySnapshot> InventoryStore::current() const {
  std::lock_guard lock(mutex_);
  return current_;
}

}  // namespace shaker
