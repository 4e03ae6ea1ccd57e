#pragma once

// Scene sampling for the 32 counting cases. A case code is a placement
// prefix (1-15) plus a size/jitter suffix (A-D); every scene is a pure
// function of (case, count, grid, seed).

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctricks/rng.hpp"

namespace ctricks {

struct PatchGrid {
    int image_size = 448;
    int patch_size = 28;

    int grid_dim() const { return image_size / patch_size; }
    double p() const { return static_cast<double>(patch_size); }

    // Throws Error(InvalidGrid) unless patch_size divides image_size and grid_dim >= 8.
    void validate() const;

    bool operator==(const PatchGrid&) const = default;
};

struct CaseCode {
    int prefix = 1;
    char suffix = 'A';

    std::string str() const;
    bool jittered() const { return suffix == 'C' || suffix == 'D'; }
    bool varied_size() const { return suffix == 'B' || suffix == 'D'; }

    bool operator==(const CaseCode&) const = default;
    auto operator<=>(const CaseCode&) const = default;
};

bool is_valid_case(int prefix, char suffix);

// Throws Error(InvalidCode) for anything outside the 32 valid codes.
CaseCode parse_case_code(std::string_view text);

// All 32 codes in canonical order (1A, 1B, 2A..2D, ..., 15B).
const std::vector<CaseCode>& all_case_codes();

enum class Shape { Circle, Square, Triangle };

std::string_view to_string(Shape shape);
Shape parse_shape(std::string_view name);
std::string_view plural_name(Shape shape);

struct Rgb {
    std::uint8_t r, g, b;
    bool operator==(const Rgb&) const = default;
};

inline constexpr std::array<std::string_view, 8> kPaletteNames = {
    "red", "green", "blue", "yellow", "purple", "orange", "cyan", "magenta"};
inline constexpr std::array<Rgb, 8> kPalette = {{
    {230, 25, 25},
    {20, 160, 40},
    {25, 60, 220},
    {235, 200, 0},
    {130, 40, 170},
    {245, 130, 20},
    {0, 190, 210},
    {220, 0, 160},
}};

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct ObjectSpec {
    Shape shape = Shape::Circle;
    int color = 0;
    Point center;
    double diameter = 0.0;

    bool operator==(const ObjectSpec&) const = default;
};

// Axis-aligned silhouette extent. Circles and squares span d x d; the
// apex-up equilateral triangle spans d x (d*sqrt(3)/2), centered on `center`.
struct Extent {
    double half_w = 0.0;
    double half_h = 0.0;
};

Extent silhouette_extent(Shape shape, double diameter);

// Signed separation between two silhouettes: exact Euclidean gap for two
// circles, bounding-box separating-axis gap otherwise. Negative means overlap.
double silhouette_gap(const ObjectSpec& a, const ObjectSpec& b);

struct Scene {
    CaseCode code;
    PatchGrid grid;
    std::vector<ObjectSpec> objects;
    int count = 0;
    std::uint64_t seed = 0;

    bool operator==(const Scene&) const = default;
};

inline constexpr int kMinCount = 3;
inline constexpr int kMaxCount = 12;
inline constexpr int kMaxPlacementRetries = 1000;
inline constexpr double kMinSeparationPx = 1.0;

double base_diameter(const PatchGrid& grid);
// Fixed diameter for a case with suffix A: 0.6p for 1-4 and 9-15, 2.5p..4.0p for 5-8.
double case_diameter(const CaseCode& code, const PatchGrid& grid);
double jitter_amplitude(const PatchGrid& grid);
// Minimum-gap target for the adjacency cases 9-15 (2px for 9-12, 1px for 13-15).
double cluster_gap(int prefix);

// Anchor (i, j) -> pixel center for placement prefixes 1-8.
//   1, 5-8: ((i+0.5)p, (j+0.5)p)   2: (ip, (j+0.5)p)
//   3: ((i+0.5)p, jp)              4: (ip, jp)
Point anchor_center(int prefix, const PatchGrid& grid, int i, int j);

struct Footprint {
    Shape shape = Shape::Circle;
    double diameter = 0.0;
};

// Places one center per footprint according to the case's placement rule.
// Throws Error(Infeasible) when no non-overlapping placement is found within
// kMaxPlacementRetries attempts.
std::vector<Point> placement_centers(const CaseCode& code, const PatchGrid& grid,
                                     std::span<const Footprint> footprints, Rng& rng);

Scene sample_scene(const CaseCode& code, int count, const PatchGrid& grid, std::uint64_t seed);

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_scene(const Scene& scene);

// Object noun for prompts: plural shape name when the scene is uniform, "shapes" otherwise.
std::string object_name(const Scene& scene);

}  // namespace ctricks
