// Copyright 2026 The Funnel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "funnel/color.hpp"
#include "funnel/error.hpp"
#include "funnel/geom/bvh.hpp"
#include "funnel/geom/vec.hpp"

namespace funnel::scene {

using geom::Pose;
using geom::Triangle;
using geom::UnitQuat;
using geom::Vec3;

struct SceneObject {
  std::string id;
  std::string display_name;
  std::vector<Triangle> triangles;
  Rgb8 base_color;
  bool selectable = true;
};

// Triangle-mesh world. Object order is the file order; ids are unique.
class Scene {
 public:
  Scene() = default;

  Scene(std::vector<SceneObject> objects, Pose spawn)
      : objects_(std::move(objects)), spawn_(spawn) {
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      const SceneObject& o = objects_[i];
      if (o.triangles.empty()) {
        fail(ErrorKind::kValidation, "object '" + o.id + "' has no triangles", o.id);
      }
      if (!by_id_.emplace(o.id, i).second) {
        fail(ErrorKind::kValidation, "duplicate object id '" + o.id + "'", o.id);
      }
    }
  }

  const std::vector<SceneObject>& objects() const { return objects_; }
  const Pose& spawn() const { return spawn_; }

  const SceneObject* find(const std::string& id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &objects_[it->second];
  }

  std::optional<std::size_t> index_of(const std::string& id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t triangle_count() const {
    std::size_t n = 0;
    for (const auto& o : objects_) n += o.triangles.size();
    return n;
  }

 private:
  std::vector<SceneObject> objects_;
  Pose spawn_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Mesh objects keep their scene order, so Hit::object indexes objects().
inline geom::SceneIndex build_index(const Scene& scene) {
  std::vector<geom::MeshView> meshes;
  meshes.reserve(scene.objects().size());
  for (const auto& o : scene.objects()) meshes.push_back({o.id, o.triangles});
  return geom::SceneIndex(meshes);
}

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline UnitQuat quat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("expected [w, x, y, z]");
  }
  return UnitQuat::normalized(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                              j[3].get<double>());
}

}  // namespace detail

inline Pose pose_from_json(const nlohmann::json& j) {
  Pose p;
  p.position = detail::vec3_from_json(j.at("pos"));
  p.orientation = j.contains("quat") ? detail::quat_from_json(j.at("quat")) : UnitQuat::identity();
  return p;
}

inline nlohmann::json pose_to_json(const Pose& p) {
  return {{"pos", {p.position.x, p.position.y, p.position.z}},
          {"quat", {p.orientation.w(), p.orientation.x(), p.orientation.y(), p.orientation.z()}}};
}

inline Scene parse_scene(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::kFormat, "scene must be a JSON object");
  Pose spawn;
  if (doc.contains("spawn")) {
    try {
      spawn = pose_from_json(doc.at("spawn"));
    } catch (const std::exception& e) {
      fail(ErrorKind::kFormat, std::string("bad spawn pose: ") + e.what(), "spawn");
    }
  }
  if (!doc.contains("objects") || !doc.at("objects").is_array()) {
    fail(ErrorKind::kFormat, "scene needs an \"objects\" array", "objects");
  }
  const auto& arr = doc.at("objects");
  if (arr.empty()) fail(ErrorKind::kValidation, "scene has no objects", "objects");

  std::vector<SceneObject> objects;
  objects.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& jo = arr[i];
    std::string label = "objects[" + std::to_string(i) + "]";
    try {
      SceneObject o;
      o.id = jo.at("id").get<std::string>();
      label = o.id;
      o.display_name = jo.value("name", o.id);
      if (jo.contains("color")) {
        const auto& c = jo.at("color");
        if (!c.is_array() || c.size() != 3) throw std::invalid_argument("color must be [r,g,b]");
        int rgb[3];
        for (int k = 0; k < 3; ++k) {
          rgb[k] = c[k].get<int>();
          if (rgb[k] < 0 || rgb[k] > 255) throw std::invalid_argument("color channel out of range");
        }
        o.base_color = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                        static_cast<std::uint8_t>(rgb[2])};
      } else {
        o.base_color = {200, 200, 200};
      }
      o.selectable = jo.value("selectable", true);
      for (const auto& jt : jo.at("triangles")) {
        if (!jt.is_array() || jt.size() != 3)
          throw std::invalid_argument("triangle needs 3 vertices");
        Triangle t{{detail::vec3_from_json(jt[0]), detail::vec3_from_json(jt[1]),
                    detail::vec3_from_json(jt[2])}};
        o.triangles.push_back(t);
      }
      objects.push_back(std::move(o));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::kFormat, "object '" + label + "': " + e.what(), label);
    }
  }
  return Scene(std::move(objects), spawn);
}

inline Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kNotFound, "cannot open scene file " + path.string(), path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, "scene " + path.string() + ": " + e.what(), path.string());
  }
  return parse_scene(doc);
}

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : scene.objects()) {
    nlohmann::json tris = nlohmann::json::array();
    for (const auto& t : o.triangles) {
      nlohmann::json jt = nlohmann::json::array();
      for (const auto& v : t.v) jt.push_back({v.x, v.y, v.z});
      tris.push_back(std::move(jt));
    }
    objs.push_back({{"id", o.id},
                    {"name", o.display_name},
                    {"color", {o.base_color.r, o.base_color.g, o.base_color.b}},
                    {"selectable", o.selectable},
                    {"triangles", std::move(tris)}});
  }
  return {{"spawn", pose_to_json(scene.spawn())}, {"objects", std::move(objs)}};
}

// Axis-aligned box as 12 outward-wound triangles.
inline std::vector<Triangle> box_triangles(const Vec3& center, const Vec3& half) {
  const Vec3 c[8] = {
      center + Vec3{-half.x, -half.y, -half.z}, center + Vec3{half.x, -half.y, -half.z},
      center + Vec3{half.x, half.y, -half.z},   center + Vec3{-half.x, half.y, -half.z},
      center + Vec3{-half.x, -half.y, half.z},  center + Vec3{half.x, -half.y, half.z},
      center + Vec3{half.x, half.y, half.z},    center + Vec3{-half.x, half.y, half.z},
  };
  static constexpr int kFaces[6][4] = {
      {4, 5, 6, 7},  // +Z
      {1, 0, 3, 2},  // -Z
      {5, 1, 2, 6},  // +X
      {0, 4, 7, 3},  // -X
      {7, 6, 2, 3},  // +Y
      {0, 1, 5, 4},  // -Y
  };
  std::vector<Triangle> out;
  out.reserve(12);
  for (const auto& f : kFaces) {
    out.push_back({{c[f[0]], c[f[1]], c[f[2]]}});
    out.push_back({{c[f[0]], c[f[2]], c[f[3]]}});
  }
  return out;
}

}  // namespace funnel::scene
