#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pyrflow/geometry.hpp"

namespace pyrflow {

// Synthetic detection scenes: colored squares, disks and triangles on a gray
// background, annotated with exact bounding boxes. A scene is a pure function
// of (spec.seed, index).
inline constexpr int kNumClasses = 3;
const char* class_name(int cls);  // "square" | "disk" | "triangle"

struct SceneSpec {
    int image_size = 64;
    int min_objects = 1;
    int max_objects = 3;
    uint64_t seed = 0;
};

struct Scene {
    std::vector<double> image;  // 3 x S x S, values in [0, 1]
    std::vector<GtObject> objects;
};

Scene generate_scene(const SceneSpec& spec, long long index);

// mirror in the horizontal axis, boxes included
Scene hflip(const Scene& s, int image_size);

// plain PPM dump, for scene-gen and eyeballing
void write_ppm(const Scene& s, int image_size, const std::string& path);

}  // namespace pyrflow
