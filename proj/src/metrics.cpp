#include "ctricks/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <numeric>

#include "ctricks/error.hpp"

namespace ctricks {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = lower(c);
    return out;
}

std::size_t alpha_run_end(std::string_view text, std::size_t i) {
    while (i < text.size() && is_alpha(text[i])) ++i;
    return i;
}

}  // namespace

std::vector<NumberMention> scan_numbers(std::string_view text) {
    const auto& lex = NumberLexicon::instance();
    std::vector<NumberMention> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (is_digit(c)) {
            std::size_t j = i;
            while (j < text.size() && is_digit(text[j])) ++j;
            long long v = 0;
            const auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + j, v);
            if (ec == std::errc{} && ptr == text.data() + j && v <= INT_MAX) {
                out.push_back({i, static_cast<int>(v), true});
            }
            i = j;
            continue;
        }
        if (is_alpha(c)) {
            const std::size_t j = alpha_run_end(text, i);
            const std::string word = lowercase(text.substr(i, j - i));
            std::size_t next = j;
            std::optional<int> value = lex.try_word_to_number(word);
            if (word == "twenty" && j + 1 < text.size() && (text[j] == '-' || text[j] == ' ') &&
                is_alpha(text[j + 1])) {
                const std::size_t k = alpha_run_end(text, j + 1);
                const auto unit = lex.try_word_to_number(lowercase(text.substr(j + 1, k - j - 1)));
                if (unit && *unit <= 9) {
                    value = 20 + *unit;
                    next = k;
                }
            }
            if (value) out.push_back({i, *value, false});
            i = next;
            continue;
        }
        ++i;
    }
    return out;
}

std::optional<int> parse_count(std::string_view raw_text, std::string_view object_name) {
    if (!object_name.empty()) {
        const std::string text = lowercase(raw_text);
        const std::string obj = lowercase(object_name);
        for (std::size_t pos = text.find(obj); pos != std::string::npos; pos = text.find(obj, pos + 1)) {
            std::size_t k = pos + obj.size();
            while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
            if (k >= text.size() || text[k] != ':') continue;
            ++k;
            while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
            const auto mentions = scan_numbers(std::string_view(text).substr(k));
            if (!mentions.empty() && mentions.front().offset == 0) return mentions.front().value;
        }
    }
    const auto mentions = scan_numbers(raw_text);
    if (mentions.empty()) return std::nullopt;
    return mentions.front().value;
}

bool response_correct(std::string_view raw_text, int ground_truth) {
    const auto mentions = scan_numbers(raw_text);
    return std::any_of(mentions.begin(), mentions.end(),
                       [ground_truth](const NumberMention& m) { return m.value == ground_truth; });
}

namespace {

int truth_for(const ModelResponse& r, const GroundTruth& truth) {
    const auto it = truth.find(r.sample_id);
    if (it == truth.end()) throw Error(ErrorKind::UnmatchedSample, r.sample_id);
    return it->second;
}

}  // namespace

double accuracy(std::span<const ModelResponse> responses, const GroundTruth& truth) {
    if (responses.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& r : responses) {
        if (response_correct(r.raw_text, truth_for(r, truth))) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(responses.size());
}

std::map<int, double> per_count_breakdown(std::span<const ModelResponse> responses, const GroundTruth& truth) {
    std::map<int, std::pair<std::size_t, std::size_t>> tally;  // count -> (correct, total)
    for (const auto& r : responses) {
        const int gt = truth_for(r, truth);
        auto& t = tally[gt];
        t.first += response_correct(r.raw_text, gt) ? 1 : 0;
        ++t.second;
    }
    std::map<int, double> out;
    for (const auto& [count, t] : tally) {
        out[count] = static_cast<double>(t.first) / static_cast<double>(t.second);
    }
    return out;
}

double pearson_corr(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw Error(ErrorKind::DegenerateInput, "length mismatch");
    if (xs.size() < 2) throw Error(ErrorKind::DegenerateInput, "need at least two points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::DegenerateInput, "zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::size_t CellMask::set_count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::size_t topk_cell_count(std::size_t cells, double k_percent) {
    if (cells == 0) return 0;
    // The epsilon keeps exact products such as 25% of 4 from rounding up.
    const double raw = k_percent / 100.0 * static_cast<double>(cells);
    const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::clamp<std::size_t>(k, 1, cells);
}

CellMask binarize_topk(const AttnGrid& grid, double k_percent) {
    const std::size_t cells = static_cast<std::size_t>(grid.rows) * grid.cols;
    if (cells == 0 || grid.values.size() != cells) {
        throw Error(ErrorKind::DimensionMismatch, "attention grid is empty or inconsistent");
    }
    if (!(k_percent > 0.0 && k_percent <= 100.0)) {
        throw Error(ErrorKind::InvalidArgument, "k_percent must lie in (0, 100]");
    }
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grid.values[a] > grid.values[b]; });
    CellMask mask{grid.rows, grid.cols, std::vector<std::uint8_t>(cells, 0)};
    const std::size_t keep = topk_cell_count(cells, k_percent);
    for (std::size_t i = 0; i < keep; ++i) mask.bits[order[i]] = 1;
    return mask;
}

double attn_iou(const AttnGrid& grid, std::span<const Mask> gt_masks, const PatchGrid& patch_grid,
                double k_percent) {
    const int g = patch_grid.grid_dim();
    if (grid.rows != g || grid.cols != g) {
        throw Error(ErrorKind::DimensionMismatch, "attention grid " + std::to_string(grid.rows) + "x" +
                                                      std::to_string(grid.cols) + " vs patch grid " +
                                                      std::to_string(g) + "x" + std::to_string(g));
    }
    const int size = patch_grid.image_size;
    const int p = patch_grid.patch_size;
    for (const auto& m : gt_masks) {
        if (m.width != size || m.height != size) {
            throw Error(ErrorKind::DimensionMismatch, "ground-truth mask size differs from image size");
        }
    }

    const CellMask sel = binarize_topk(grid, k_percent);
    std::vector<std::size_t> gt_per_cell(static_cast<std::size_t>(g) * g, 0);
    std::size_t gt_total = 0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const bool on = std::any_of(gt_masks.begin(), gt_masks.end(), [&](const Mask& m) { return m.get(x, y); });
            if (!on) continue;
            ++gt_total;
            ++gt_per_cell[static_cast<std::size_t>(y / p) * g + x / p];
        }
    }
    std::size_t inter = 0;
    std::size_t selected_px = 0;
    for (std::size_t c = 0; c < sel.bits.size(); ++c) {
        if (!sel.bits[c]) continue;
        inter += gt_per_cell[c];
        selected_px += static_cast<std::size_t>(p) * p;
    }
    const std::size_t uni = selected_px + gt_total - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoxF to_boxf(const Box& box) {
    return {static_cast<double>(box.x0), static_cast<double>(box.y0), static_cast<double>(box.x1),
            static_cast<double>(box.y1)};
}

double box_iou(const BoxF& a, const BoxF& b) {
    const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = iw * ih;
    const double uni = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<PRPoint> pr_curve(std::span<const Detection> detections, std::span<const BoxF> gt_boxes,
                              double iou_threshold) {
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].confidence > detections[b].confidence;
    });

    std::vector<bool> matched(gt_boxes.size(), false);
    std::vector<PRPoint> curve;
    curve.reserve(detections.size());
    std::size_t tp = 0;
    for (std::size_t n = 0; n < order.size(); ++n) {
        const auto& det = detections[order[n]];
        double best = -1.0;
        std::size_t best_gt = gt_boxes.size();
        for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
            if (matched[g]) continue;
            const double iou = box_iou(det.box, gt_boxes[g]);
            if (iou >= iou_threshold && iou > best) {
                best = iou;
                best_gt = g;
            }
        }
        if (best_gt < gt_boxes.size()) {
            matched[best_gt] = true;
            ++tp;
        }
        const double recall =
            gt_boxes.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(gt_boxes.size());
        curve.push_back({static_cast<double>(tp) / static_cast<double>(n + 1), recall, n + 1});
    }
    return curve;
}

double ap(std::span<const PRPoint> points) {
    double total = 0.0;
    double prev_recall = 0.0;
    for (const auto& pt : points) {
        if (pt.recall < prev_recall) {
            throw Error(ErrorKind::InvalidArgument, "recall must be non-decreasing along the curve");
        }
        total += (pt.recall - prev_recall) * pt.precision;
        prev_recall = pt.recall;
    }
    return total;
}

}  // namespace ctricks
