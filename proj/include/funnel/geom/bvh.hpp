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

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "funnel/geom/camera.hpp"
#include "funnel/geom/intersect.hpp"

namespace funnel::geom {

// One named mesh handed to the index builder.
struct MeshView {
  std::string_view object_id;
  std::span<const Triangle> triangles;
};

struct PrimRef {
  std::uint32_t object = 0;    // position of the mesh in the build input
  std::uint32_t triangle = 0;  // triangle index within that mesh
};

struct Hit {
  std::string object_id;
  std::uint32_t object = 0;
  std::uint32_t triangle_index = 0;
  double t = 0.0;
  Vec3 point;
  Vec3 normal;  // unit, faces the ray origin
};

// Binary bounding-volume hierarchy over every triangle of a scene. Immutable
// after construction.
class SceneIndex {
 public:
  struct Node {
    Aabb bounds;
    // Inner node: index of the left child; the right child follows the whole
    // left subtree at `right`. Leaf: first PrimRef in `prims_`.
    std::uint32_t first = 0;
    std::uint32_t right = 0;
    std::uint32_t count = 0;  // > 0 marks a leaf
    bool is_leaf() const { return count > 0; }
  };

  static constexpr std::uint32_t kMaxLeafSize = 4;

  SceneIndex() = default;

  explicit SceneIndex(std::span<const MeshView> meshes) {
    object_ids_.reserve(meshes.size());
    for (const MeshView& m : meshes) {
      object_ids_.emplace_back(m.object_id);
      for (std::uint32_t i = 0; i < m.triangles.size(); ++i) {
        triangles_.push_back(m.triangles[i]);
        prims_.push_back({static_cast<std::uint32_t>(object_ids_.size() - 1), i});
      }
    }
    // Tie-break rank: lexicographic order of object ids.
    std::vector<std::uint32_t> order(object_ids_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return object_ids_[a] < object_ids_[b]; });
    id_rank_.resize(order.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) id_rank_[order[r]] = r;

    // prims_ and triangles_ are parallel until the build permutes prims_; keep
    // a lookup from prim to triangle storage.
    tri_of_prim_.resize(prims_.size());
    std::iota(tri_of_prim_.begin(), tri_of_prim_.end(), 0u);
    if (!prims_.empty()) {
      nodes_.reserve(2 * prims_.size());
      build(0, static_cast<std::uint32_t>(prims_.size()));
    }
  }

  std::size_t triangle_count() const { return prims_.size(); }
  std::size_t object_count() const { return object_ids_.size(); }
  const std::string& object_id(std::uint32_t object) const { return object_ids_[object]; }
  std::span<const Node> nodes() const { return nodes_; }

  // Leaves in depth-first order.
  template <typename Fn>
  void for_each_leaf(Fn&& fn) const {
    for (const Node& n : nodes_) {
      if (n.is_leaf()) {
        fn(std::span<const PrimRef>(prims_.data() + n.first, n.count));
      }
    }
  }

  // Nearest hit with t >= kMinHitDistance; equal distances resolve to the
  // lower (object_id, triangle_index). `visited`, when given, receives the
  // node visit order.
  std::optional<Hit> raycast(const Ray& ray, std::vector<std::uint32_t>* visited = nullptr) const {
    if (nodes_.empty()) return std::nullopt;
    double best_t = std::numeric_limits<double>::infinity();
    std::uint32_t best = kNone;
    std::vector<std::uint32_t> stack;
    stack.reserve(64);
    stack.push_back(0);
    while (!stack.empty()) {
      const std::uint32_t ni = stack.back();
      stack.pop_back();
      const Node& node = nodes_[ni];
      const auto entry = intersect(ray, node.bounds, best_t);
      if (!entry) continue;
      if (visited) visited->push_back(ni);
      if (node.is_leaf()) {
        for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
          const auto t = intersect(ray, triangles_[tri_of_prim_[k]]);
          if (!t) continue;
          if (*t < best_t || (*t == best_t && precedes(k, best))) {
            best_t = *t;
            best = k;
          }
        }
        continue;
      }
      const std::uint32_t left = ni + 1;
      const std::uint32_t right = node.right;
      const auto el = intersect(ray, nodes_[left].bounds, best_t);
      const auto er = intersect(ray, nodes_[right].bounds, best_t);
      // Push the farther child first so the nearer one is visited first.
      if (el && er) {
        if (*el <= *er) {
          stack.push_back(right);
          stack.push_back(left);
        } else {
          stack.push_back(left);
          stack.push_back(right);
        }
      } else if (el) {
        stack.push_back(left);
      } else if (er) {
        stack.push_back(right);
      }
    }
    if (best == kNone) return std::nullopt;
    return make_hit(ray, best, best_t);
  }

  std::uint32_t id_rank(std::uint32_t object) const { return id_rank_[object]; }

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  bool precedes(std::uint32_t a, std::uint32_t b) const {
    if (b == kNone) return true;
    const PrimRef& pa = prims_[a];
    const PrimRef& pb = prims_[b];
    if (id_rank_[pa.object] != id_rank_[pb.object]) {
      return id_rank_[pa.object] < id_rank_[pb.object];
    }
    return pa.triangle < pb.triangle;
  }

  Hit make_hit(const Ray& ray, std::uint32_t k, double t) const {
    const PrimRef& p = prims_[k];
    Hit hit;
    hit.object = p.object;
    hit.object_id = object_ids_[p.object];
    hit.triangle_index = p.triangle;
    hit.t = t;
    hit.point = ray.at(t);
    Vec3 n = normalize(triangles_[tri_of_prim_[k]].face_normal());
    if (dot(n, ray.direction()) > 0.0) n = -n;
    hit.normal = n;
    return hit;
  }

  // Builds the subtree over prims_[begin, end) and returns its node index.
  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t ni = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb bounds;
    Aabb centroid_bounds;
    for (std::uint32_t k = begin; k < end; ++k) {
      const Triangle& tri = triangles_[tri_of_prim_[k]];
      bounds.grow(tri);
      centroid_bounds.grow(tri.centroid());
    }
    nodes_[ni].bounds = bounds;
    const std::uint32_t n = end - begin;
    if (n <= kMaxLeafSize) {
      make_leaf(ni, begin, n);
      return ni;
    }
    const Vec3 ext = centroid_bounds.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (!(ext[axis] > 0.0)) {
      // All centroids coincide; split by count.
      const std::uint32_t mid = begin + n / 2;
      finish_inner(ni, begin, mid, end);
      return ni;
    }
    const std::uint32_t mid = sah_split(begin, end, axis);
    finish_inner(ni, begin, mid, end);
    return ni;
  }

  void make_leaf(std::uint32_t ni, std::uint32_t begin, std::uint32_t n) {
    nodes_[ni].first = begin;
    nodes_[ni].count = n;
  }

  void finish_inner(std::uint32_t ni, std::uint32_t begin, std::uint32_t mid, std::uint32_t end) {
    build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[ni].right = right;
    nodes_[ni].count = 0;
  }

  // Sorts prims_[begin, end) by centroid on `axis` (ties by original order)
  // and returns the split position minimizing the surface-area heuristic.
  std::uint32_t sah_split(std::uint32_t begin, std::uint32_t end, int axis) {
    std::vector<std::uint32_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double ca = triangles_[tri_of_prim_[a]].centroid()[axis];
      const double cb = triangles_[tri_of_prim_[b]].centroid()[axis];
      if (ca != cb) return ca < cb;
      return tri_of_prim_[a] < tri_of_prim_[b];
    });
    std::vector<PrimRef> sorted_prims;
    std::vector<std::uint32_t> sorted_tris;
    sorted_prims.reserve(idx.size());
    sorted_tris.reserve(idx.size());
    for (std::uint32_t k : idx) {
      sorted_prims.push_back(prims_[k]);
      sorted_tris.push_back(tri_of_prim_[k]);
    }
    std::copy(sorted_prims.begin(), sorted_prims.end(), prims_.begin() + begin);
    std::copy(sorted_tris.begin(), sorted_tris.end(), tri_of_prim_.begin() + begin);

    const std::uint32_t n = end - begin;
    std::vector<double> right_area(n);
    Aabb acc;
    for (std::uint32_t i = n; i-- > 0;) {
      acc.grow(triangles_[tri_of_prim_[begin + i]]);
      right_area[i] = acc.surface_area();
    }
    acc = Aabb{};
    double best_cost = std::numeric_limits<double>::infinity();
    std::uint32_t best_split = n / 2;
    for (std::uint32_t i = 1; i < n; ++i) {
      acc.grow(triangles_[tri_of_prim_[begin + i - 1]]);
      const double cost = acc.surface_area() * i + right_area[i] * (n - i);
      if (cost < best_cost) {
        best_cost = cost;
        best_split = i;
      }
    }
    return begin + best_split;
  }

  std::vector<std::string> object_ids_;
  std::vector<std::uint32_t> id_rank_;
  std::vector<Triangle> triangles_;
  std::vector<PrimRef> prims_;
  std::vector<std::uint32_t> tri_of_prim_;
  std::vector<Node> nodes_;
};

inline SceneIndex build_index(std::span<const MeshView> meshes) { return SceneIndex(meshes); }

inline std::optional<Hit> raycast(const SceneIndex& index, const Ray& ray) {
  return index.raycast(ray);
}

}  // namespace funnel::geom
