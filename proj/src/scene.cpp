#include "pyrflow/scene.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pyrflow/rng.hpp"

namespace pyrflow {

const char* class_name(int cls) {
    switch (cls) {
        case 0: return "square";
        case 1: return "disk";
        case 2: return "triangle";
        default: throw std::invalid_argument("bad class id " + std::to_string(cls));
    }
}

namespace {

constexpr double kBaseColor[kNumClasses][3] = {
    {0.90, 0.25, 0.20},  // square
    {0.20, 0.85, 0.30},  // disk
    {0.25, 0.35, 0.95},  // triangle
};

bool inside_shape(int cls, double px, double py, double x0, double y0, double side) {
    switch (cls) {
        case 0:
            return true;  // the bounding square itself
        case 1: {
            const double r = side / 2.0;
            const double dx = px - (x0 + r);
            const double dy = py - (y0 + r);
            return dx * dx + dy * dy <= r * r;
        }
        case 2: {
            // apex up: vertices (x0, y0+side), (x0+side, y0+side), (x0+side/2, y0)
            const double fy = (py - y0) / side;       // 0 at top, 1 at base
            const double fx = std::abs(px - (x0 + side / 2.0)) / (side / 2.0);
            return fy >= 0 && fy <= 1 && fx <= fy;
        }
        default:
            return false;
    }
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, long long index) {
    const int s = spec.image_size;
    if (spec.min_objects < 0 || spec.max_objects < spec.min_objects)
        throw std::invalid_argument("scene object count range is invalid");
    if (s < 16) throw std::invalid_argument("scene image size too small");
    // the largest bin needs room: side up to s - 8 with a margin on each side
    Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(index)));

    Scene out;
    out.image.assign((size_t)3 * s * s, 0.0);
    const double bg = rng.uniform(0.25, 0.45);
    for (auto& v : out.image) v = bg;

    const int count = (int)rng.uniform_int(spec.min_objects, spec.max_objects);
    for (int o = 0; o < count; ++o) {
        const int cls = (int)rng.uniform_int(0, kNumClasses - 1);
        const int bin = (int)rng.uniform_int(0, 2);
        int side;
        if (bin == 0)
            side = (int)rng.uniform_int(5, 8);  // small: max side in (0, 8]
        else if (bin == 1)
            side = (int)rng.uniform_int(9, 32);  // medium: (8, 32]
        else
            side = (int)rng.uniform_int(33, std::min(s - 8, 56));  // large: (32, image]

        // keep boxes fully inside; prefer placements that do not bury an
        // existing object
        int x0 = 0, y0 = 0;
        Box box;
        for (int attempt = 0; attempt < 8; ++attempt) {
            x0 = (int)rng.uniform_int(1, s - side - 1);
            y0 = (int)rng.uniform_int(1, s - side - 1);
            box = Box{(double)x0, (double)y0, (double)(x0 + side), (double)(y0 + side)};
            bool clear = true;
            for (const GtObject& prev : out.objects)
                if (iou(prev.box, box) > 0.25) clear = false;
            if (clear) break;
        }

        const double bright = rng.uniform(0.7, 1.3);
        double color[3];
        for (int c = 0; c < 3; ++c)
            color[c] = std::min(1.0, std::max(0.0, kBaseColor[cls][c] * bright));

        for (int py = y0; py < y0 + side; ++py)
            for (int px = x0; px < x0 + side; ++px)
                if (inside_shape(cls, px + 0.5, py + 0.5, x0, y0, side))
                    for (int c = 0; c < 3; ++c)
                        out.image[((size_t)c * s + py) * s + px] = color[c];

        out.objects.push_back({box, cls});
    }

    // light deterministic sensor noise
    for (auto& v : out.image) v = std::min(1.0, std::max(0.0, v + rng.uniform(-0.02, 0.02)));
    return out;
}

Scene hflip(const Scene& in, int image_size) {
    const int s = image_size;
    Scene out;
    out.image.assign(in.image.size(), 0.0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x)
                out.image[((size_t)c * s + y) * s + x] =
                    in.image[((size_t)c * s + y) * s + (s - 1 - x)];
    for (const GtObject& obj : in.objects) {
        GtObject flipped = obj;
        flipped.box.x1 = s - obj.box.x2;
        flipped.box.x2 = s - obj.box.x1;
        out.objects.push_back(flipped);
    }
    return out;
}

void write_ppm(const Scene& scene, int image_size, const std::string& path) {
    const int s = image_size;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "P6\n" << s << " " << s << "\n255\n";
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = scene.image[((size_t)c * s + y) * s + x];
                f.put(static_cast<char>(std::lround(v * 255.0)));
            }
}

}  // namespace pyrflow
