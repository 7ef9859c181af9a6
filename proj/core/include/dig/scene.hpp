#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dig {

enum class Shape { Cube, Sphere, Cylinder };
enum class ColorName { Gray, Red, Blue, Green, Brown, Purple, Cyan, Yellow };
enum class SizeClass { Small, Medium, Large };
enum class Material { Matte, Metal };
enum class ModKind { ShapeChange, ColorChange, SizeChange, MaterialChange, Add, Remove };

inline constexpr int kNumShapes = 3;
inline constexpr int kNumColors = 8;
inline constexpr int kNumSizes = 3;
inline constexpr int kNumMaterials = 2;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

Rgb color_rgb(ColorName color);
double size_radius(SizeClass size);

const char* to_string(Shape s);
const char* to_string(ColorName c);
const char* to_string(SizeClass s);
const char* to_string(Material m);
const char* to_string(ModKind k);

Shape shape_from_string(const std::string& s);
ColorName color_from_string(const std::string& s);
SizeClass size_from_string(const std::string& s);
Material material_from_string(const std::string& s);
ModKind mod_kind_from_string(const std::string& s);

struct ObjectSpec {
    int id = 0;
    Shape shape = Shape::Cube;
    ColorName color = ColorName::Gray;
    SizeClass size = SizeClass::Medium;
    Material material = Material::Matte;
    double x = 0.0;
    double y = 0.0;

    double radius() const { return size_radius(size); }

    bool operator==(const ObjectSpec&) const = default;
};

struct SceneConfig {
    std::uint64_t seed = 0;
    double world_half_extent = 3.0;
    std::vector<ObjectSpec> objects;

    const ObjectSpec* find(int id) const;
};

struct Modification {
    ModKind kind = ModKind::ColorChange;
    std::optional<int> target_id;       // absent for Add
    std::optional<ObjectSpec> before;   // absent for Add
    std::optional<ObjectSpec> after;    // absent for Remove
};

struct PairSpec {
    std::string pair_id;
    SceneConfig base;
    SceneConfig edited;
    std::vector<Modification> mods;
    int k = 0;
    int n_max = 0;
};

struct PlacementExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleEditBudget : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownTarget : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SeparationViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejection-sampling limits for object placement.
inline constexpr double kMinSeparationFactor = 0.9;
inline constexpr int kPlacementBudget = 10000;

struct ModOptions {
    bool allow_add = true;
    int max_adds = 2;
};

// True when a new object at (x, y) with the given radius keeps the minimum
// center separation to every object already in the scene.
bool separation_ok(const SceneConfig& scene, double x, double y, double radius,
                   int ignore_id = -1);

SceneConfig generate_scene(std::uint64_t seed, int min_objects, int max_objects);

std::vector<Modification> sample_modifications(const SceneConfig& scene, int k,
                                               std::uint64_t rng_seed,
                                               const ModOptions& options = {});

SceneConfig apply_modifications(const SceneConfig& scene,
                                const std::vector<Modification>& mods);

// Structural equality of object lists (seed fields ignored).
bool same_objects(const SceneConfig& a, const SceneConfig& b);

PairSpec make_pair(std::uint64_t seed, int n_max,
                   std::optional<int> count_override = std::nullopt,
                   int min_objects = 3, int max_objects = 8);

}  // namespace dig
