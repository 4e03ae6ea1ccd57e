#include "ctricks/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctricks/error.hpp"

namespace ctricks {

namespace {

constexpr double kTol = 1e-6;
const double kSqrt3 = std::sqrt(3.0);

// Placement rule per axis: anchors sit on cell centers or on grid lines.
enum class AxisRule { CellCenter, GridLine };

AxisRule x_rule(int prefix) {
    return (prefix == 2 || prefix == 4) ? AxisRule::GridLine : AxisRule::CellCenter;
}

AxisRule y_rule(int prefix) {
    return (prefix == 3 || prefix == 4) ? AxisRule::GridLine : AxisRule::CellCenter;
}

bool is_anchored(int prefix) { return prefix >= 1 && prefix <= 8; }

double dilation_multiplier(int prefix) {
    switch (prefix) {
        case 5: return 2.5;
        case 6: return 3.0;
        case 7: return 3.5;
        case 8: return 4.0;
        default: return 0.0;
    }
}

bool fits_in_image(const ObjectSpec& o, double image_size, double margin = 0.0) {
    const Extent e = silhouette_extent(o.shape, o.diameter);
    return o.center.x - e.half_w - margin >= -kTol && o.center.x + e.half_w + margin <= image_size + kTol &&
           o.center.y - e.half_h - margin >= -kTol && o.center.y + e.half_h + margin <= image_size + kTol;
}

struct Anchor {
    int i = 0;
    int j = 0;
};

std::vector<Anchor> anchor_candidates(int prefix, const PatchGrid& grid, double max_half_w, double max_half_h,
                                      double margin) {
    const int g = grid.grid_dim();
    const auto range = [g](AxisRule rule) {
        return rule == AxisRule::GridLine ? std::pair{1, g - 1} : std::pair{0, g - 1};
    };
    const auto [i_lo, i_hi] = range(x_rule(prefix));
    const auto [j_lo, j_hi] = range(y_rule(prefix));
    const double size = grid.image_size;
    std::vector<Anchor> out;
    for (int j = j_lo; j <= j_hi; ++j) {
        for (int i = i_lo; i <= i_hi; ++i) {
            const Point c = anchor_center(prefix, grid, i, j);
            if (c.x - max_half_w - margin < 0.0 || c.x + max_half_w + margin > size) continue;
            if (c.y - max_half_h - margin < 0.0 || c.y + max_half_h + margin > size) continue;
            out.push_back({i, j});
        }
    }
    return out;
}

bool conflicts(const ObjectSpec& a, const ObjectSpec& b) {
    return silhouette_gap(a, b) < kMinSeparationPx - kTol;
}

// Min-conflicts search over grid anchors: start from a random assignment of
// distinct anchors, then repeatedly move a conflicting object to the anchor
// with the fewest conflicts. Dense dilated cases (7A/8A with 12 circles)
// need this; plain rejection sampling almost never finds a packing there.
std::vector<Point> place_anchored(const CaseCode& code, const PatchGrid& grid, std::span<const Footprint> fps,
                                  Rng& rng) {
    const std::size_t n = fps.size();
    double max_hw = 0.0;
    double max_hh = 0.0;
    for (const auto& f : fps) {
        const Extent e = silhouette_extent(f.shape, f.diameter);
        max_hw = std::max(max_hw, e.half_w);
        max_hh = std::max(max_hh, e.half_h);
    }
    const double jitter = code.jittered() ? jitter_amplitude(grid) : 0.0;
    std::vector<Anchor> cands = anchor_candidates(code.prefix, grid, max_hw, max_hh, jitter);
    if (cands.size() < n) {
        throw Error(ErrorKind::Infeasible, "case " + code.str() + ": only " + std::to_string(cands.size()) +
                                               " anchor sites for " + std::to_string(n) + " objects");
    }

    std::vector<ObjectSpec> objs(n);
    for (std::size_t k = 0; k < n; ++k) {
        objs[k].shape = fps[k].shape;
        objs[k].diameter = fps[k].diameter;
    }
    std::vector<std::size_t> slot(n);
    std::vector<std::size_t> order(cands.size());
    const std::size_t max_moves = 2000;

    for (int attempt = 0; attempt < kMaxPlacementRetries; ++attempt) {
        for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
        shuffle(std::span(order), rng);
        for (std::size_t k = 0; k < n; ++k) {
            slot[k] = order[k];
            const Anchor& a = cands[slot[k]];
            objs[k].center = anchor_center(code.prefix, grid, a.i, a.j);
        }

        bool solved = false;
        for (std::size_t move = 0; move <= max_moves; ++move) {
            std::vector<std::size_t> conflicted;
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t m = 0; m < n; ++m) {
                    if (m != k && conflicts(objs[k], objs[m])) {
                        conflicted.push_back(k);
                        break;
                    }
                }
            }
            if (conflicted.empty()) {
                solved = true;
                break;
            }
            if (move == max_moves) break;

            const std::size_t k = conflicted[uniform_index(rng, conflicted.size())];
            std::size_t best_slot = slot[k];
            int best_score = std::numeric_limits<int>::max();
            std::uint64_t ties = 0;
            ObjectSpec probe = objs[k];
            for (std::size_t c = 0; c < cands.size(); ++c) {
                bool taken = false;
                for (std::size_t m = 0; m < n; ++m) {
                    if (m != k && slot[m] == c) {
                        taken = true;
                        break;
                    }
                }
                if (taken) continue;
                probe.center = anchor_center(code.prefix, grid, cands[c].i, cands[c].j);
                int score = 0;
                for (std::size_t m = 0; m < n; ++m) {
                    if (m != k && conflicts(probe, objs[m])) ++score;
                }
                if (score < best_score) {
                    best_score = score;
                    best_slot = c;
                    ties = 1;
                } else if (score == best_score && uniform_index(rng, ++ties) == 0) {
                    best_slot = c;
                }
            }
            slot[k] = best_slot;
            objs[k].center = anchor_center(code.prefix, grid, cands[best_slot].i, cands[best_slot].j);
        }
        if (!solved) continue;

        if (jitter > 0.0) {
            for (auto& o : objs) {
                o.center.x += uniform(rng, -jitter, jitter);
                o.center.y += uniform(rng, -jitter, jitter);
            }
        }
        bool ok = true;
        for (std::size_t k = 0; k < n && ok; ++k) {
            ok = fits_in_image(objs[k], grid.image_size);
            for (std::size_t m = k + 1; m < n && ok; ++m) ok = !conflicts(objs[k], objs[m]);
        }
        if (!ok) continue;

        std::vector<Point> centers(n);
        for (std::size_t k = 0; k < n; ++k) centers[k] = objs[k].center;
        return centers;
    }
    throw Error(ErrorKind::Infeasible, "case " + code.str() + ": no placement for " + std::to_string(n) +
                                           " objects after " + std::to_string(kMaxPlacementRetries) + " attempts");
}

// Cluster layouts for the adjacency cases, in coordinates relative to an
// arbitrary origin. Neighbouring silhouettes are exactly `gap` apart.
std::vector<Point> cluster_layout(int prefix, std::span<const Extent> ext, double gap) {
    const std::size_t n = ext.size();
    std::vector<Point> pos(n);
    double max_hw = 0.0;
    double max_hh = 0.0;
    for (const auto& e : ext) {
        max_hw = std::max(max_hw, e.half_w);
        max_hh = std::max(max_hh, e.half_h);
    }
    const double pitch_x = 2.0 * max_hw + gap;
    const double pitch_y = 2.0 * max_hh + gap;

    const auto hex = [&](std::size_t count, std::size_t cols) {
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t r = k / cols;
            const std::size_t c = k % cols;
            pos[k] = {static_cast<double>(c) * pitch_x + (r % 2 == 1 ? pitch_x / 2.0 : 0.0),
                      static_cast<double>(r) * pitch_y};
        }
    };

    switch (prefix) {
        case 9:   // horizontal chain
        case 10:  // vertical chain
        case 13:  // diagonal chain
            for (std::size_t k = 1; k < n; ++k) {
                const bool step_x = prefix != 10;
                const bool step_y = prefix != 9;
                pos[k].x = pos[k - 1].x + (step_x ? ext[k - 1].half_w + gap + ext[k].half_w : 0.0);
                pos[k].y = pos[k - 1].y + (step_y ? ext[k - 1].half_h + gap + ext[k].half_h : 0.0);
            }
            break;
        case 11: {  // two-row block
            const std::size_t cols = (n + 1) / 2;
            for (std::size_t k = 0; k < n; ++k) {
                pos[k] = {static_cast<double>(k % cols) * pitch_x, static_cast<double>(k / cols) * pitch_y};
            }
            break;
        }
        case 12: {  // ring around the perimeter of a w x h block
            int h = 2;
            int w = 2;
            for (;; ++h) {
                if (4 * h - 4 >= static_cast<int>(n)) {
                    w = h;
                    break;
                }
                if (4 * h - 2 >= static_cast<int>(n)) {
                    w = h + 1;
                    break;
                }
            }
            std::vector<std::pair<int, int>> ring;
            for (int c = 0; c < w; ++c) ring.emplace_back(c, 0);
            for (int r = 1; r < h; ++r) ring.emplace_back(w - 1, r);
            for (int c = w - 2; c >= 0; --c) ring.emplace_back(c, h - 1);
            for (int r = h - 2; r >= 1; --r) ring.emplace_back(0, r);
            for (std::size_t k = 0; k < n; ++k) {
                pos[k] = {ring[k].first * pitch_x, ring[k].second * pitch_y};
            }
            break;
        }
        case 14: {  // dense blob, odd rows offset by half a pitch
            const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
            hex(n, cols);
            break;
        }
        case 15: {  // blob with a chain running off its first row
            const std::size_t blob = (n + 1) / 2;
            const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(blob))));
            hex(blob, cols);
            for (std::size_t k = blob; k < n; ++k) {
                pos[k] = {static_cast<double>(cols + (k - blob)) * pitch_x, 0.0};
            }
            break;
        }
        default:
            throw Error(ErrorKind::InvalidCode, "no cluster layout for prefix " + std::to_string(prefix));
    }
    return pos;
}

std::vector<Point> place_cluster(const CaseCode& code, const PatchGrid& grid, std::span<const Footprint> fps,
                                 Rng& rng) {
    std::vector<Extent> ext;
    ext.reserve(fps.size());
    for (const auto& f : fps) ext.push_back(silhouette_extent(f.shape, f.diameter));
    std::vector<Point> pos = cluster_layout(code.prefix, ext, cluster_gap(code.prefix));

    double x0 = std::numeric_limits<double>::infinity();
    double y0 = x0;
    double x1 = -x0;
    double y1 = -x0;
    for (std::size_t k = 0; k < pos.size(); ++k) {
        x0 = std::min(x0, pos[k].x - ext[k].half_w);
        x1 = std::max(x1, pos[k].x + ext[k].half_w);
        y0 = std::min(y0, pos[k].y - ext[k].half_h);
        y1 = std::max(y1, pos[k].y + ext[k].half_h);
    }
    const double size = grid.image_size;
    if (x1 - x0 > size || y1 - y0 > size) {
        throw Error(ErrorKind::Infeasible, "case " + code.str() + ": cluster of " + std::to_string(fps.size()) +
                                               " objects does not fit the image");
    }
    const double ox = uniform(rng, 0.0, size - (x1 - x0)) - x0;
    const double oy = uniform(rng, 0.0, size - (y1 - y0)) - y0;
    for (auto& p : pos) {
        p.x += ox;
        p.y += oy;
    }
    return pos;
}

// Nearest anchor coordinate along one axis and the matching index.
std::pair<double, int> nearest_anchor(double v, double p, AxisRule rule) {
    if (rule == AxisRule::GridLine) {
        const int i = static_cast<int>(std::lround(v / p));
        return {i * p, i};
    }
    const int i = static_cast<int>(std::lround(v / p - 0.5));
    return {(i + 0.5) * p, i};
}

}  // namespace

void PatchGrid::validate() const {
    if (patch_size <= 0 || image_size <= 0 || image_size % patch_size != 0) {
        throw Error(ErrorKind::InvalidGrid, "patch size " + std::to_string(patch_size) +
                                                " does not divide image size " + std::to_string(image_size));
    }
    if (grid_dim() < 8) {
        throw Error(ErrorKind::InvalidGrid, "grid dimension " + std::to_string(grid_dim()) + " is below 8");
    }
}

std::string CaseCode::str() const { return std::to_string(prefix) + suffix; }

bool is_valid_case(int prefix, char suffix) {
    if (suffix < 'A' || suffix > 'D') return false;
    if (prefix == 1) return suffix <= 'B';
    if (prefix >= 2 && prefix <= 4) return true;
    if (prefix >= 5 && prefix <= 8) return suffix == 'A';
    if (prefix >= 9 && prefix <= 15) return suffix <= 'B';
    return false;
}

CaseCode parse_case_code(std::string_view text) {
    const auto fail = [&] { return Error(ErrorKind::InvalidCode, "'" + std::string(text) + "' is not a case code"); };
    if (text.size() < 2 || text.size() > 3) throw fail();
    int prefix = 0;
    for (char c : text.substr(0, text.size() - 1)) {
        if (c < '0' || c > '9') throw fail();
        prefix = prefix * 10 + (c - '0');
    }
    if (text.size() == 3 && text[0] == '0') throw fail();
    const char suffix = text.back();
    if (!is_valid_case(prefix, suffix)) throw fail();
    return {prefix, suffix};
}

const std::vector<CaseCode>& all_case_codes() {
    static const std::vector<CaseCode> codes = [] {
        std::vector<CaseCode> out;
        for (int prefix = 1; prefix <= 15; ++prefix) {
            for (char suffix = 'A'; suffix <= 'D'; ++suffix) {
                if (is_valid_case(prefix, suffix)) out.push_back({prefix, suffix});
            }
        }
        return out;
    }();
    return codes;
}

std::string_view to_string(Shape shape) {
    switch (shape) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
    }
    return "circle";
}

Shape parse_shape(std::string_view name) {
    if (name == "circle") return Shape::Circle;
    if (name == "square") return Shape::Square;
    if (name == "triangle") return Shape::Triangle;
    throw Error(ErrorKind::CorruptManifest, "unknown shape '" + std::string(name) + "'");
}

std::string_view plural_name(Shape shape) {
    switch (shape) {
        case Shape::Circle: return "circles";
        case Shape::Square: return "squares";
        case Shape::Triangle: return "triangles";
    }
    return "shapes";
}

Extent silhouette_extent(Shape shape, double diameter) {
    const double r = diameter / 2.0;
    if (shape == Shape::Triangle) return {r, diameter * kSqrt3 / 4.0};
    return {r, r};
}

double silhouette_gap(const ObjectSpec& a, const ObjectSpec& b) {
    if (a.shape == Shape::Circle && b.shape == Shape::Circle) {
        return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y) - (a.diameter + b.diameter) / 2.0;
    }
    const Extent ea = silhouette_extent(a.shape, a.diameter);
    const Extent eb = silhouette_extent(b.shape, b.diameter);
    const double gx = std::abs(a.center.x - b.center.x) - ea.half_w - eb.half_w;
    const double gy = std::abs(a.center.y - b.center.y) - ea.half_h - eb.half_h;
    return std::max(gx, gy);
}

double base_diameter(const PatchGrid& grid) { return grid.p() * 3.0 / 5.0; }

double case_diameter(const CaseCode& code, const PatchGrid& grid) {
    const double m = dilation_multiplier(code.prefix);
    return m > 0.0 ? m * grid.p() : base_diameter(grid);
}

double jitter_amplitude(const PatchGrid& grid) { return grid.p() / 8.0; }

double cluster_gap(int prefix) { return prefix <= 12 ? 2.0 : 1.0; }

Point anchor_center(int prefix, const PatchGrid& grid, int i, int j) {
    const double p = grid.p();
    const double x = x_rule(prefix) == AxisRule::GridLine ? i * p : (i + 0.5) * p;
    const double y = y_rule(prefix) == AxisRule::GridLine ? j * p : (j + 0.5) * p;
    return {x, y};
}

std::vector<Point> placement_centers(const CaseCode& code, const PatchGrid& grid,
                                     std::span<const Footprint> footprints, Rng& rng) {
    grid.validate();
    if (footprints.empty()) return {};
    return is_anchored(code.prefix) ? place_anchored(code, grid, footprints, rng)
                                    : place_cluster(code, grid, footprints, rng);
}

Scene sample_scene(const CaseCode& code, int count, const PatchGrid& grid, std::uint64_t seed) {
    if (!is_valid_case(code.prefix, code.suffix)) {
        throw Error(ErrorKind::InvalidCode, code.str());
    }
    if (count < kMinCount || count > kMaxCount) {
        throw Error(ErrorKind::InvalidArgument, "count " + std::to_string(count) + " outside [3,12]");
    }
    grid.validate();

    Rng rng(seed);
    const bool dilated = dilation_multiplier(code.prefix) > 0.0;
    const double d = case_diameter(code, grid);

    // Round-robin over (shape, color) pairs, shape varying fastest, so all 24
    // pairs appear before any repeats and neighbours never share a shape.
    constexpr std::uint64_t n_colors = kPalette.size();
    const std::uint64_t pairs = dilated ? n_colors : 3 * n_colors;
    const std::uint64_t start = uniform_index(rng, pairs);

    Scene scene;
    scene.code = code;
    scene.grid = grid;
    scene.count = count;
    scene.seed = seed;
    scene.objects.resize(static_cast<std::size_t>(count));
    std::vector<Footprint> fps(scene.objects.size());
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const std::uint64_t q = (start + k) % pairs;
        auto& o = scene.objects[k];
        o.shape = dilated ? Shape::Circle : static_cast<Shape>(q % 3);
        o.color = static_cast<int>(dilated ? q : q / 3);
        o.diameter = code.varied_size() ? uniform(rng, 0.2 * d, d) : d;
        fps[k] = {o.shape, o.diameter};
    }

    const std::vector<Point> centers = placement_centers(code, grid, fps, rng);
    for (std::size_t k = 0; k < centers.size(); ++k) scene.objects[k].center = centers[k];
    return scene;
}

ValidationReport validate_scene(const Scene& scene) {
    ValidationReport report;
    auto& v = report.violations;
    const auto& code = scene.code;
    const auto& grid = scene.grid;

    if (!is_valid_case(code.prefix, code.suffix)) {
        v.push_back("invalid case code " + code.str());
        return report;
    }
    try {
        grid.validate();
    } catch (const Error& e) {
        v.push_back(std::string("invalid grid: ") + e.what());
        return report;
    }
    if (scene.count < kMinCount || scene.count > kMaxCount) v.push_back("count out of [3,12]");
    if (scene.count != static_cast<int>(scene.objects.size())) v.push_back("count mismatch");

    const double p = grid.p();
    const double d = case_diameter(code, grid);
    const bool dilated = dilation_multiplier(code.prefix) > 0.0;
    const double allowed_offset = (code.jittered() ? jitter_amplitude(grid) : 0.0) + kTol;
    const int g = grid.grid_dim();
    const std::string pfx = "prefix-" + std::to_string(code.prefix);

    std::vector<std::pair<int, int>> anchors;
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const auto& o = scene.objects[k];
        const std::string tag = " (object " + std::to_string(k) + ")";
        if (!(o.diameter > 0.0)) v.push_back("non-positive diameter" + tag);
        if (o.color < 0 || o.color >= static_cast<int>(kPalette.size())) v.push_back("color out of palette" + tag);
        if (!fits_in_image(o, grid.image_size)) v.push_back("out of bounds" + tag);

        if (code.varied_size()) {
            if (o.diameter < 0.2 * d - kTol || o.diameter > d + kTol) v.push_back("diameter rule" + tag);
        } else if (std::abs(o.diameter - d) > kTol) {
            v.push_back("diameter rule" + tag);
        }
        if (dilated && o.shape != Shape::Circle) v.push_back("shape rule" + tag);

        if (is_anchored(code.prefix)) {
            const auto [ax, i] = nearest_anchor(o.center.x, p, x_rule(code.prefix));
            const auto [ay, j] = nearest_anchor(o.center.y, p, y_rule(code.prefix));
            const bool in_range_x = x_rule(code.prefix) == AxisRule::GridLine ? (i >= 1 && i <= g - 1) : true;
            const bool in_range_y = y_rule(code.prefix) == AxisRule::GridLine ? (j >= 1 && j <= g - 1) : true;
            if (std::abs(o.center.x - ax) > allowed_offset || std::abs(o.center.y - ay) > allowed_offset ||
                !in_range_x || !in_range_y) {
                v.push_back(pfx + " alignment" + tag);
            }
            anchors.emplace_back(i, j);
        }
    }

    if (is_anchored(code.prefix)) {
        auto sorted = anchors;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) v.push_back("duplicate anchor");
    }

    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < scene.objects.size(); ++a) {
        for (std::size_t b = a + 1; b < scene.objects.size(); ++b) {
            const double gap = silhouette_gap(scene.objects[a], scene.objects[b]);
            min_gap = std::min(min_gap, gap);
            if (gap < kMinSeparationPx - kTol) {
                v.push_back("overlap between objects " + std::to_string(a) + " and " + std::to_string(b));
            }
        }
    }
    if (!is_anchored(code.prefix) && code.suffix == 'A' && scene.objects.size() >= 2 &&
        min_gap > cluster_gap(code.prefix) + kTol) {
        v.push_back(pfx + " adjacency");
    }
    return report;
}

std::string object_name(const Scene& scene) {
    if (scene.objects.empty()) return "shapes";
    const Shape first = scene.objects.front().shape;
    for (const auto& o : scene.objects) {
        if (o.shape != first) return "shapes";
    }
    return std::string(plural_name(first));
}

}  // namespace ctricks
