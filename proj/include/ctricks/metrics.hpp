#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctricks/prompt_kit.hpp"
#include "ctricks/raster.hpp"
#include "ctricks/scene_gen.hpp"

namespace ctricks {

struct ModelResponse {
    std::string sample_id;
    PromptVariant variant = PromptVariant::Standard;
    std::string raw_text;
};

using GroundTruth = std::unordered_map<std::string, int>;

// A number mention found in free text, in scan order.
struct NumberMention {
    std::size_t offset = 0;
    int value = 0;
    bool numeral = false;  // digits, as opposed to a lexicon word
};

// Digit runs (maximal, so "120" never yields 12) and lexicon words, including
// "twenty-one" / "twenty one" compounds. Never throws.
std::vector<NumberMention> scan_numbers(std::string_view text);

// Priority: the formatted "<object>: <number>" answer, else the first number
// mention (numeral or word) in scan order. Never throws.
std::optional<int> parse_count(std::string_view raw_text, std::string_view object_name);

// 1 iff the ground-truth count appears in the text as a whole numeral token or
// as its lexicon word.
bool response_correct(std::string_view raw_text, int ground_truth);

// Mean correctness; throws Error(UnmatchedSample) for responses without ground truth.
// An empty response set scores 0.
double accuracy(std::span<const ModelResponse> responses, const GroundTruth& truth);

// count -> accuracy over responses whose ground truth has that count.
std::map<int, double> per_count_breakdown(std::span<const ModelResponse> responses, const GroundTruth& truth);

// Throws Error(DegenerateInput) on size mismatch, fewer than 2 points, or zero variance.
double pearson_corr(std::span<const double> xs, std::span<const double> ys);

struct AttnGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct CellMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;

    std::size_t set_count() const;
};

// Number of cells kept by top-k% binarization: ceil(k/100 * cells), at least 1.
std::size_t topk_cell_count(std::size_t cells, double k_percent);

// Keeps the highest-valued cells; ties go to the lower row-major index.
CellMask binarize_topk(const AttnGrid& grid, double k_percent);

// Top-k binarize, nearest-neighbour upsample each cell to its p x p block,
// then IoU against the union of the ground-truth masks.
double attn_iou(const AttnGrid& grid, std::span<const Mask> gt_masks, const PatchGrid& patch_grid,
                double k_percent);

struct BoxF {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;
};

BoxF to_boxf(const Box& box);
double box_iou(const BoxF& a, const BoxF& b);

struct Detection {
    BoxF box;
    double confidence = 0.0;
    int label = 0;
};

struct PRPoint {
    double precision = 0.0;
    double recall = 0.0;
    std::size_t rank = 0;  // detections considered, 1-based
};

// Confidence-ordered greedy matching, one ground truth per detection.
std::vector<PRPoint> pr_curve(std::span<const Detection> detections, std::span<const BoxF> gt_boxes,
                              double iou_threshold = 0.5);

// AP = sum_n (R_n - R_{n-1}) * P_n with R_0 = 0; no interpolation.
double ap(std::span<const PRPoint> points);

}  // namespace ctricks
