#pragma once

// Modality Attention Share: the fraction of attention mass that answer-step
// queries place on visual keys, relative to visual + text keys, plus the
// hinge penalty that keeps it above a threshold.

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "ctricks/metrics.hpp"

namespace ctricks {

enum class TokenRole { Visual, Text, Generated };

std::string_view to_string(TokenRole role);
TokenRole parse_role(std::string_view text);

// Attention rows for every (layer, head, step). Step t is the query at
// sequence position t, so steps <= keys.
struct AttentionRecord {
    int layers = 0;
    int heads = 0;
    int steps = 0;
    int keys = 0;
    std::vector<TokenRole> roles;  // one per key
    std::vector<double> weights;   // layer-major, then head, step, key

    AttentionRecord() = default;
    AttentionRecord(int layers, int heads, int steps, std::vector<TokenRole> roles);

    std::size_t offset(int layer, int head, int step) const {
        return ((static_cast<std::size_t>(layer) * heads + head) * steps + step) * keys;
    }
    std::span<double> row(int layer, int head, int step) {
        return {weights.data() + offset(layer, head, step), static_cast<std::size_t>(keys)};
    }
    std::span<const double> row(int layer, int head, int step) const {
        return {weights.data() + offset(layer, head, step), static_cast<std::size_t>(keys)};
    }

    // Throws Error(DimensionMismatch) on inconsistent shape and
    // Error(InvalidArgument) on negative entries or rows not summing to 1 within tol.
    void validate(double tol = 1e-6) const;
};

enum class KeyDomain {
    VisualAndText,  // generated keys excluded from numerator and denominator
    AllKeys,        // sensitivity mode: denominator is the whole row
};

struct MasConfig {
    double tau = 0.4;
    double lambda = 0.1;
    std::vector<int> layers;  // empty = every layer
    KeyDomain domain = KeyDomain::VisualAndText;
};

// Positions whose token belongs to an assistant response span.
// Throws Error(EmptyTarget) when there are none.
std::vector<int> select_target_steps(std::span<const TokenRole> roles);

double mas_layer(const AttentionRecord& record, int layer, std::span<const int> targets,
                 KeyDomain domain = KeyDomain::VisualAndText);

// Mean of mas_layer over `layers`. Throws Error(EmptyLayerSet) when empty;
// use resolve_layers to expand "all layers".
double mas_mean(const AttentionRecord& record, std::span<const int> layers, std::span<const int> targets,
                KeyDomain domain = KeyDomain::VisualAndText);

std::vector<int> resolve_layers(int n_layers, std::span<const int> requested);

double hinge_loss(double mas_value, double tau);
// d hinge / d mas: -1 strictly below tau, 0 otherwise (kink included).
double hinge_slope(double mas_value, double tau);
double total_loss(double ce, double mas_loss, double lambda);

// Mean visual-key attention over layers, heads and target steps, laid out as a
// grid_dim x grid_dim map in visual-key order (row-major).
AttnGrid visual_attention_grid(const AttentionRecord& record, std::span<const int> layers,
                               std::span<const int> targets, int grid_dim);

// Header JSON plus a sibling little-endian f32 payload; the header carries the
// payload's SHA-256.
void write_attention_record(const AttentionRecord& record, const std::filesystem::path& header_path);
AttentionRecord read_attention_record(const std::filesystem::path& header_path);

std::string sha256_hex(std::span<const unsigned char> bytes);

}  // namespace ctricks
