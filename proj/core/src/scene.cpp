#include "dig/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dig/rng.hpp"

namespace dig {

namespace {

// CLEVR-like palette; background is (64,64,64) so every color stays visible.
constexpr Rgb kPalette[kNumColors] = {
    {87, 87, 87},    // gray
    {173, 35, 35},   // red
    {42, 75, 215},   // blue
    {29, 105, 20},   // green
    {129, 74, 25},   // brown
    {129, 38, 192},  // purple
    {41, 208, 208},  // cyan
    {255, 238, 51},  // yellow
};

constexpr double kRadii[kNumSizes] = {0.35, 0.55, 0.75};

}  // namespace

Rgb color_rgb(ColorName color) { return kPalette[static_cast<int>(color)]; }

double size_radius(SizeClass size) { return kRadii[static_cast<int>(size)]; }

const char* to_string(Shape s) {
    switch (s) {
        case Shape::Cube: return "cube";
        case Shape::Sphere: return "sphere";
        case Shape::Cylinder: return "cylinder";
    }
    return "?";
}

const char* to_string(ColorName c) {
    switch (c) {
        case ColorName::Gray: return "gray";
        case ColorName::Red: return "red";
        case ColorName::Blue: return "blue";
        case ColorName::Green: return "green";
        case ColorName::Brown: return "brown";
        case ColorName::Purple: return "purple";
        case ColorName::Cyan: return "cyan";
        case ColorName::Yellow: return "yellow";
    }
    return "?";
}

const char* to_string(SizeClass s) {
    switch (s) {
        case SizeClass::Small: return "small";
        case SizeClass::Medium: return "medium";
        case SizeClass::Large: return "large";
    }
    return "?";
}

const char* to_string(Material m) {
    return m == Material::Matte ? "matte" : "metal";
}

const char* to_string(ModKind k) {
    switch (k) {
        case ModKind::ShapeChange: return "shape_change";
        case ModKind::ColorChange: return "color_change";
        case ModKind::SizeChange: return "size_change";
        case ModKind::MaterialChange: return "material_change";
        case ModKind::Add: return "add";
        case ModKind::Remove: return "remove";
    }
    return "?";
}

namespace {

[[noreturn]] void bad_enum(const char* what, const std::string& s) {
    throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

}  // namespace

Shape shape_from_string(const std::string& s) {
    if (s == "cube") return Shape::Cube;
    if (s == "sphere") return Shape::Sphere;
    if (s == "cylinder") return Shape::Cylinder;
    bad_enum("shape", s);
}

ColorName color_from_string(const std::string& s) {
    for (int i = 0; i < kNumColors; ++i) {
        if (s == to_string(static_cast<ColorName>(i)))
            return static_cast<ColorName>(i);
    }
    bad_enum("color", s);
}

SizeClass size_from_string(const std::string& s) {
    if (s == "small") return SizeClass::Small;
    if (s == "medium") return SizeClass::Medium;
    if (s == "large") return SizeClass::Large;
    bad_enum("size", s);
}

Material material_from_string(const std::string& s) {
    if (s == "matte") return Material::Matte;
    if (s == "metal") return Material::Metal;
    bad_enum("material", s);
}

ModKind mod_kind_from_string(const std::string& s) {
    for (int i = 0; i < 6; ++i) {
        if (s == to_string(static_cast<ModKind>(i)))
            return static_cast<ModKind>(i);
    }
    bad_enum("modification kind", s);
}

const ObjectSpec* SceneConfig::find(int id) const {
    for (const auto& obj : objects) {
        if (obj.id == id) return &obj;
    }
    return nullptr;
}

bool separation_ok(const SceneConfig& scene, double x, double y, double radius,
                   int ignore_id) {
    for (const auto& other : scene.objects) {
        if (other.id == ignore_id) continue;
        const double dx = x - other.x;
        const double dy = y - other.y;
        const double min_dist = kMinSeparationFactor * (radius + other.radius());
        if (dx * dx + dy * dy < min_dist * min_dist) return false;
    }
    return true;
}

namespace {

ObjectSpec sample_object(Rng& rng, int id) {
    ObjectSpec obj;
    obj.id = id;
    obj.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    obj.color = static_cast<ColorName>(rng.uniform_int(0, kNumColors - 1));
    obj.size = static_cast<SizeClass>(rng.uniform_int(0, kNumSizes - 1));
    obj.material = static_cast<Material>(rng.uniform_int(0, kNumMaterials - 1));
    return obj;
}

// Samples a position for obj until separation holds or the budget is spent.
void place_object(Rng& rng, const SceneConfig& scene, ObjectSpec& obj) {
    const double extent = scene.world_half_extent;
    for (int attempt = 0; attempt < kPlacementBudget; ++attempt) {
        const double x = rng.uniform_real(-extent, extent);
        const double y = rng.uniform_real(-extent, extent);
        if (separation_ok(scene, x, y, obj.radius(), obj.id)) {
            obj.x = x;
            obj.y = y;
            return;
        }
    }
    throw PlacementExhausted("object placement failed after " +
                             std::to_string(kPlacementBudget) + " attempts");
}

}  // namespace

SceneConfig generate_scene(std::uint64_t seed, int min_objects, int max_objects) {
    if (min_objects < 1 || max_objects > 12 || min_objects > max_objects) {
        throw std::invalid_argument("object count range must lie within [1, 12]");
    }
    Rng rng(seed);
    SceneConfig scene;
    scene.seed = seed;
    const int count =
        static_cast<int>(rng.uniform_int(min_objects, max_objects));
    scene.objects.reserve(count);
    for (int i = 0; i < count; ++i) {
        ObjectSpec obj = sample_object(rng, i);
        place_object(rng, scene, obj);
        scene.objects.push_back(obj);
    }
    return scene;
}

std::vector<Modification> sample_modifications(const SceneConfig& scene, int k,
                                               std::uint64_t rng_seed,
                                               const ModOptions& options) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    const int add_budget = options.allow_add ? options.max_adds : 0;
    const int capacity = static_cast<int>(scene.objects.size()) + add_budget;
    if (k > capacity) {
        throw InfeasibleEditBudget("k=" + std::to_string(k) +
                                   " exceeds edit capacity " +
                                   std::to_string(capacity));
    }

    Rng rng(rng_seed);
    SceneConfig working = scene;  // tracks edits so Add placements stay valid
    std::vector<int> unused;
    for (const auto& obj : scene.objects) unused.push_back(obj.id);
    int next_id = 0;
    for (const auto& obj : scene.objects) next_id = std::max(next_id, obj.id + 1);

    std::vector<Modification> mods;
    int adds_used = 0;
    for (int edit = 0; edit < k; ++edit) {
        // Feasible kinds this step: the five target-consuming kinds need an
        // untouched object; Add needs remaining budget.
        std::vector<ModKind> kinds;
        if (!unused.empty()) {
            kinds = {ModKind::ShapeChange, ModKind::ColorChange,
                     ModKind::SizeChange, ModKind::MaterialChange,
                     ModKind::Remove};
        }
        if (adds_used < add_budget) kinds.push_back(ModKind::Add);
        const ModKind kind =
            kinds[static_cast<std::size_t>(rng.uniform_int(0, kinds.size() - 1))];

        Modification mod;
        mod.kind = kind;
        if (kind == ModKind::Add) {
            ++adds_used;
            ObjectSpec obj = sample_object(rng, next_id++);
            place_object(rng, working, obj);
            mod.after = obj;
            working.objects.push_back(obj);
        } else {
            const std::size_t pick =
                static_cast<std::size_t>(rng.uniform_int(0, unused.size() - 1));
            const int target = unused[pick];
            unused.erase(unused.begin() + pick);
            const ObjectSpec before = *working.find(target);
            mod.target_id = target;
            mod.before = before;
            if (kind == ModKind::Remove) {
                std::erase_if(working.objects,
                              [target](const ObjectSpec& o) { return o.id == target; });
            } else {
                ObjectSpec after = before;
                switch (kind) {
                    case ModKind::ShapeChange: {
                        int v = static_cast<int>(rng.uniform_int(0, kNumShapes - 2));
                        if (v >= static_cast<int>(before.shape)) ++v;
                        after.shape = static_cast<Shape>(v);
                        break;
                    }
                    case ModKind::ColorChange: {
                        int v = static_cast<int>(rng.uniform_int(0, kNumColors - 2));
                        if (v >= static_cast<int>(before.color)) ++v;
                        after.color = static_cast<ColorName>(v);
                        break;
                    }
                    case ModKind::SizeChange: {
                        int v = static_cast<int>(rng.uniform_int(0, kNumSizes - 2));
                        if (v >= static_cast<int>(before.size)) ++v;
                        after.size = static_cast<SizeClass>(v);
                        break;
                    }
                    case ModKind::MaterialChange:
                        after.material = before.material == Material::Matte
                                             ? Material::Metal
                                             : Material::Matte;
                        break;
                    default:
                        break;
                }
                mod.after = after;
                for (auto& obj : working.objects) {
                    if (obj.id == target) obj = after;
                }
            }
        }
        mods.push_back(std::move(mod));
    }
    return mods;
}

SceneConfig apply_modifications(const SceneConfig& scene,
                                const std::vector<Modification>& mods) {
    SceneConfig out = scene;
    for (const auto& mod : mods) {
        if (mod.kind == ModKind::Add) {
            const ObjectSpec& obj = mod.after.value();
            if (!separation_ok(out, obj.x, obj.y, obj.radius())) {
                throw SeparationViolated("added object " + std::to_string(obj.id) +
                                         " violates minimum separation");
            }
            out.objects.push_back(obj);
            continue;
        }
        const int target = mod.target_id.value();
        auto it = std::find_if(out.objects.begin(), out.objects.end(),
                               [target](const ObjectSpec& o) { return o.id == target; });
        if (it == out.objects.end()) {
            throw UnknownTarget("no object with id " + std::to_string(target));
        }
        if (mod.kind == ModKind::Remove) {
            out.objects.erase(it);
        } else {
            *it = mod.after.value();
        }
    }
    return out;
}

bool same_objects(const SceneConfig& a, const SceneConfig& b) {
    return a.objects == b.objects;
}

PairSpec make_pair(std::uint64_t seed, int n_max,
                   std::optional<int> count_override, int min_objects,
                   int max_objects) {
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    if (count_override && (*count_override < 1 || *count_override > n_max)) {
        throw std::invalid_argument("count_override outside [1, n_max]");
    }

    PairSpec pair;
    pair.n_max = n_max;
    pair.base = generate_scene(mix_seed(seed, 1), min_objects, max_objects);
    if (count_override) {
        pair.k = *count_override;
    } else {
        Rng rng(mix_seed(seed, 2));
        pair.k = static_cast<int>(rng.uniform_int(1, n_max));
    }
    pair.mods = sample_modifications(pair.base, pair.k, mix_seed(seed, 3));
    pair.edited = apply_modifications(pair.base, pair.mods);
    pair.edited.seed = pair.base.seed;

    // Replay check: the recorded mods must reproduce the edited scene.
    if (!same_objects(apply_modifications(pair.base, pair.mods), pair.edited)) {
        throw std::logic_error("modification replay mismatch");
    }

    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair_%016llx",
                  static_cast<unsigned long long>(seed));
    pair.pair_id = buf;
    return pair;
}

}  // namespace dig
