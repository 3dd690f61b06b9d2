#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mirrorfield/camera.hpp"
#include "mirrorfield/geom.hpp"
#include "mirrorfield/image.hpp"

namespace mirrorfield {

// A mirror given either by explicit corners or by the ids of annotated
// corners (counter-clockwise from the reflective side in both cases).
struct SceneMirror {
  std::vector<Vec3> vertices;
  std::vector<int> vertex_ids;
  MirrorMaterial material;
};

// On-disk scene description (JSON):
//
//   {"cameras": [{"width", "height", "fx", "fy", "cx", "cy",
//                 "camera_to_world": [16 numbers, row-major]}],
//    "images": ["images/train_000.png", ...],     one per camera
//    "split": {"train": [indices], "test": [indices]},
//    "mirrors": [{"vertices": [[x,y,z], ...]} or {"vertex_ids": [...]},
//                 "roughness_alpha", "fresnel_f0"}],
//    "annotations": "annotations.json",            optional
//    "bounds": {"t_near", "t_far"},
//    "background": [r, g, b]}
//
// Relative paths are resolved against the directory of the scene file.
struct SceneFile {
  std::vector<Camera> cameras;
  std::vector<std::string> images;
  std::vector<int> train;
  std::vector<int> test;
  std::vector<SceneMirror> mirrors;
  std::string annotations;
  double t_near = 0.0;
  double t_far = 10.0;
  Vec3 background;

  void validate() const;
};

SceneFile load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const SceneFile& scene);

// Annotation file: {"annotations": [{"vertex_id", "image_id", "pixel": [u, v]}]}
// where image_id indexes the scene cameras.
std::vector<VertexAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path,
                      const std::vector<VertexAnnotation>& annotations);

// Mirror geometry of the scene: explicit corners are used directly, annotated
// ones are triangulated from the annotation file.
std::vector<MirrorSurface> resolve_mirrors(const SceneFile& scene,
                                           const std::filesystem::path& scene_dir);

// Images of the listed cameras, read from disk.
std::vector<Image> load_images(const SceneFile& scene, const std::filesystem::path& scene_dir,
                               const std::vector<int>& indices);

}  // namespace mirrorfield
