#pragma once

// A small prefix-LM attention stack over [visual | text | answer] tokens that
// predicts an object count, with hand-written gradients for cross-entropy plus
// the MAS hinge penalty. Small enough to check against finite differences.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctricks/mas_core.hpp"
#include "ctricks/scene_gen.hpp"

namespace ctricks::toy {

struct ToyDims {
    int d = 32;
    int heads = 4;
    int layers = 2;
    int vocab = 64;
    int n_classes = 10;  // counts 3..12
    int visual_grid = 8;

    void validate() const;
};

inline constexpr int kFirstCountClass = 3;

struct LayerParams {
    Eigen::MatrixXd wq, wk, wv, wo;  // d x d, applied as x * W
};

struct ToyModel {
    ToyDims dims;
    Eigen::MatrixXd embedding;  // vocab x d
    std::vector<LayerParams> layers;
    Eigen::MatrixXd head;  // d x n_classes

    static ToyModel zeros(const ToyDims& dims);
    static ToyModel random(const ToyDims& dims, std::uint64_t seed);

    struct NamedTensor {
        std::string name;
        Eigen::MatrixXd* value;
    };
    struct ConstNamedTensor {
        std::string name;
        const Eigen::MatrixXd* value;
    };
    std::vector<NamedTensor> tensors();
    std::vector<ConstNamedTensor> tensors() const;

    std::size_t parameter_count() const;
    // Flat view in tensor order, row-major within each tensor.
    double& flat(std::size_t index);
    double flat(std::size_t index) const;

    // this += scale * other
    void add_scaled(const ToyModel& other, double scale);
    bool all_finite() const;
};

// Vocabulary: visual cell tokens carry the number of object centers in the
// cell (0..4, capped); the rest are prompt words, numerals 1..20 and the two
// answer-position markers.
namespace vocab {
inline constexpr int kVisualBase = 0;
inline constexpr int kVisualLevels = 5;
inline constexpr int kUnknown = 5;
inline constexpr int kAnswerStart = 6;
inline constexpr int kAnswerCount = 7;
inline constexpr int kNumeralBase = 8;  // "1" -> 8 ... "20" -> 27
inline constexpr int kMaxNumeral = 20;
inline constexpr int kWordBase = 28;
}  // namespace vocab

std::vector<int> tokenize_prompt(std::string_view text);

struct ToySample {
    std::vector<int> tokens;
    std::vector<TokenRole> roles;
    int label = kFirstCountClass;  // true count
};

// Visual tokens from a scene downscaled to a grid x grid occupancy map,
// followed by the prompt tokens and the two answer positions.
ToySample make_sample(const Scene& scene, std::string_view prompt_text, const ToyDims& dims);

struct Forward {
    Eigen::VectorXd logits;
    AttentionRecord record;
};

Forward forward(const ToyModel& model, const ToySample& sample);

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double mas = 0.0;    // batch mean of per-sample layer-averaged MAS
    double l_mas = 0.0;  // hinge(tau - mas)
};

// Forward-only objective. MAS goes through mas_core on the emitted records.
LossBreakdown evaluate_loss(const ToyModel& model, std::span<const ToySample> batch, const MasConfig& config);

struct LossAndGrads {
    LossBreakdown loss;
    ToyModel grads;
};

// Analytic gradients of mean CE + lambda * hinge(tau - mas). Subgradient 0 at the kink.
LossAndGrads loss_and_grads(const ToyModel& model, std::span<const ToySample> batch, const MasConfig& config);

struct FdEntry {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct FdReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_tiny = 0;
    std::size_t skipped_kink = 0;
    std::vector<FdEntry> entries;
    std::vector<std::size_t> kink_coordinates;
};

// Central differences on n_coords random coordinates. Coordinates whose
// perturbation moves MAS across tau are skipped and listed.
FdReport finite_diff_check(const ToyModel& model, std::span<const ToySample> batch, const MasConfig& config,
                           std::size_t n_coords, double eps, std::uint64_t seed);

struct TrainOptions {
    int epochs = 10;
    double step = 0.05;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double ce = 0.0;
    double mas_mean = 0.0;
    double l_mas = 0.0;
    double l_total = 0.0;
};

struct TrainResult {
    ToyModel model;
    std::vector<EpochStats> trajectory;  // epoch 0 is the initial model
};

// Plain minibatch gradient descent. Throws Error(Divergence) on a non-finite loss.
TrainResult train(std::span<const ToySample> dataset, const MasConfig& config, const TrainOptions& options,
                  const ToyDims& dims = {});

std::string trajectory_jsonl(std::span<const EpochStats> trajectory);

// <stem>.json shape header + <stem>.bin flat little-endian f64 parameters.
void save_checkpoint(const ToyModel& model, const std::filesystem::path& stem);
ToyModel load_checkpoint(const std::filesystem::path& stem);

}  // namespace ctricks::toy
