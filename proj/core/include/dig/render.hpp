#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dig/geometry.hpp"
#include "dig/scene.hpp"

namespace dig {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB

    Image() = default;
    Image(int w, int h, Rgb fill = {64, 64, 64});

    std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (y * width + x); }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + 3 * (y * width + x);
    }
    void set(int x, int y, Rgb c) {
        auto* p = at(x, y);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    bool operator==(const Image&) const = default;
};

inline constexpr Rgb kBackground{64, 64, 64};

struct Camera {
    double px_per_unit = 36.0;    // affine world->screen scale
    double footprint_scale = 28.0;  // pixel half-extent per world-unit radius
    double depth_factor = 0.25;   // shrink toward the far edge
};

// Screen-space footprint of one object: center, half extents, depth key.
struct Footprint {
    double cx = 0.0;
    double cy = 0.0;
    double half_extent = 0.0;
    double depth = 0.0;  // world y; larger is farther
};

struct AnnotatedBox {
    BBox box;
    ModKind kind = ModKind::ColorChange;
};

struct Annotation {
    std::string pair_id;
    std::vector<AnnotatedBox> boxes;
};

struct DegenerateBox : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvisibleDifference : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Footprint project(const ObjectSpec& obj, const Camera& camera, int width,
                  int height, double world_half_extent);

// Flat-silhouette rasterization with painter's ordering (far to near).
Image render_scene(const SceneConfig& scene, const Camera& camera = {},
                   int width = 256, int height = 256);

// Tight pixel bounds of the object's silhouette rendered alone, clamped to the
// image. Throws DegenerateBox when nothing lands on screen.
BBox silhouette_box(const ObjectSpec& obj, const Camera& camera, int width,
                    int height, double world_half_extent);

Annotation gt_boxes(const PairSpec& pair, const Camera& camera = {},
                    int width = 256, int height = 256);

struct RenderedPair {
    Image image_a;
    Image image_b;
    Annotation annotation;
};

// Renders both scenes, extracts ground-truth boxes and checks that every
// differing pixel is covered and every box is visible.
RenderedPair render_pair(const PairSpec& pair, const Camera& camera = {},
                         int width = 256, int height = 256);

}  // namespace dig
