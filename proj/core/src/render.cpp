#include "dig/render.hpp"

#include <algorithm>
#include <cmath>

namespace dig {

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (int i = 0; i < w * h; ++i) {
        pixels[3 * i + 0] = fill.r;
        pixels[3 * i + 1] = fill.g;
        pixels[3 * i + 2] = fill.b;
    }
}

Footprint project(const ObjectSpec& obj, const Camera& camera, int width,
                  int height, double world_half_extent) {
    Footprint fp;
    fp.cx = width / 2.0 + obj.x * camera.px_per_unit;
    fp.cy = height / 2.0 - obj.y * camera.px_per_unit;
    const double y_norm = obj.y / world_half_extent;
    fp.half_extent =
        obj.radius() * camera.footprint_scale * (1.0 - camera.depth_factor * y_norm);
    fp.depth = obj.y;
    return fp;
}

namespace {

// Pixel-center test against the silhouette at half-extent h around (cx, cy).
bool inside_shape(Shape shape, double px, double py, double cx, double cy,
                  double h) {
    if (h <= 0.0) return false;
    const double dx = px - cx;
    const double dy = py - cy;
    switch (shape) {
        case Shape::Sphere:
            return dx * dx + dy * dy <= h * h;
        case Shape::Cube:
            return std::abs(dx) <= h && std::abs(dy) <= h;
        case Shape::Cylinder: {
            // Upward triangle: apex at (cx, cy - h), base at cy + h.
            if (dy < -h || dy > h) return false;
            const double span = h * (dy + h) / (2.0 * h);
            return std::abs(dx) <= span;
        }
    }
    return false;
}

Rgb darken(Rgb c) {
    return Rgb{static_cast<std::uint8_t>(c.r * 6 / 10),
               static_cast<std::uint8_t>(c.g * 6 / 10),
               static_cast<std::uint8_t>(c.b * 6 / 10)};
}

template <typename Plot>
void rasterize(const ObjectSpec& obj, const Footprint& fp, int width, int height,
               Plot&& plot) {
    const double h = fp.half_extent;
    const int x0 = std::max(0, static_cast<int>(std::floor(fp.cx - h)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(fp.cx + h)));
    const int y0 = std::max(0, static_cast<int>(std::floor(fp.cy - h)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(fp.cy + h)));
    const Rgb fill = color_rgb(obj.color);
    const Rgb dark = darken(fill);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            if (!inside_shape(obj.shape, px, py, fp.cx, fp.cy, h)) continue;
            Rgb c = fill;
            if (obj.material == Material::Metal) {
                // 2 px darker rim plus a darker stripe every 4th row.
                const bool rim =
                    !inside_shape(obj.shape, px, py, fp.cx, fp.cy, h - 2.0);
                if (rim || y % 4 == 0) c = dark;
            }
            plot(x, y, c);
        }
    }
}

std::vector<std::size_t> paint_order(const SceneConfig& scene) {
    std::vector<std::size_t> order(scene.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& oa = scene.objects[a];
        const auto& ob = scene.objects[b];
        if (oa.y != ob.y) return oa.y > ob.y;  // farther first
        return oa.id < ob.id;
    });
    return order;
}

}  // namespace

Image render_scene(const SceneConfig& scene, const Camera& camera, int width,
                   int height) {
    Image img(width, height, kBackground);
    for (std::size_t idx : paint_order(scene)) {
        const ObjectSpec& obj = scene.objects[idx];
        const Footprint fp =
            project(obj, camera, width, height, scene.world_half_extent);
        rasterize(obj, fp, width, height,
                  [&](int x, int y, Rgb c) { img.set(x, y, c); });
    }
    return img;
}

BBox silhouette_box(const ObjectSpec& obj, const Camera& camera, int width,
                    int height, double world_half_extent) {
    const Footprint fp = project(obj, camera, width, height, world_half_extent);
    int x_min = width, y_min = height, x_max = -1, y_max = -1;
    rasterize(obj, fp, width, height, [&](int x, int y, Rgb) {
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x);
        y_max = std::max(y_max, y);
    });
    if (x_max < 0) {
        throw DegenerateBox("object " + std::to_string(obj.id) +
                            " has no on-screen silhouette");
    }
    return BBox{x_min, y_min, x_max + 1, y_max + 1};
}

Annotation gt_boxes(const PairSpec& pair, const Camera& camera, int width,
                    int height) {
    Annotation ann;
    ann.pair_id = pair.pair_id;
    const double extent = pair.base.world_half_extent;
    for (const auto& mod : pair.mods) {
        BBox box;
        switch (mod.kind) {
            case ModKind::Remove:
                box = silhouette_box(mod.before.value(), camera, width, height,
                                     extent);
                break;
            case ModKind::Add:
                box = silhouette_box(mod.after.value(), camera, width, height,
                                     extent);
                break;
            default:
                box = union_box(silhouette_box(mod.before.value(), camera, width,
                                               height, extent),
                                silhouette_box(mod.after.value(), camera, width,
                                               height, extent));
                break;
        }
        if (!box.valid()) {
            throw DegenerateBox("zero-area ground-truth box in pair " +
                                pair.pair_id);
        }
        ann.boxes.push_back(AnnotatedBox{box, mod.kind});
    }
    return ann;
}

RenderedPair render_pair(const PairSpec& pair, const Camera& camera, int width,
                         int height) {
    RenderedPair out;
    out.image_a = render_scene(pair.base, camera, width, height);
    out.image_b = render_scene(pair.edited, camera, width, height);
    out.annotation = gt_boxes(pair, camera, width, height);

    std::vector<bool> box_hit(out.annotation.boxes.size(), false);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto* pa = out.image_a.at(x, y);
            const auto* pb = out.image_b.at(x, y);
            if (pa[0] == pb[0] && pa[1] == pb[1] && pa[2] == pb[2]) continue;
            bool covered = false;
            for (std::size_t i = 0; i < out.annotation.boxes.size(); ++i) {
                if (out.annotation.boxes[i].box.contains(x, y)) {
                    covered = true;
                    box_hit[i] = true;
                }
            }
            if (!covered) {
                throw std::logic_error("differing pixel outside ground-truth boxes in " +
                                       pair.pair_id);
            }
        }
    }
    for (std::size_t i = 0; i < box_hit.size(); ++i) {
        if (!box_hit[i]) {
            throw InvisibleDifference("ground-truth box " + std::to_string(i) +
                                      " of " + pair.pair_id +
                                      " contains no differing pixel");
        }
    }
    return out;
}

}  // namespace dig
