#include "ctricks/toy_attn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <limits>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ctricks/error.hpp"
#include "ctricks/rng.hpp"
#include "json.hpp"

namespace ctricks::toy {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 27> kWords = {
    "how",  "many",    "are",     "there",   "in",        "the",       "image",     "respond", "concisely",
    "with", "shape",   "counts",  "using",   "following", "format",    "for",       "example", "only",
    "i",    "can",     "see",     "this",    "number",    "circles",   "squares",   "triangles", "shapes"};

}  // namespace

void ToyDims::validate() const {
    if (d <= 0 || heads <= 0 || layers <= 0 || n_classes <= 0 || visual_grid <= 0) {
        throw Error(ErrorKind::InvalidArgument, "toy dimensions must be positive");
    }
    if (d % heads != 0) throw Error(ErrorKind::InvalidArgument, "d must be divisible by the head count");
    if (vocab < vocab::kWordBase + static_cast<int>(kWords.size())) {
        throw Error(ErrorKind::InvalidArgument, "vocab too small for the prompt lexicon");
    }
}

ToyModel ToyModel::zeros(const ToyDims& dims) {
    dims.validate();
    ToyModel m;
    m.dims = dims;
    m.embedding = MatrixXd::Zero(dims.vocab, dims.d);
    m.layers.resize(static_cast<std::size_t>(dims.layers));
    for (auto& l : m.layers) {
        l.wq = MatrixXd::Zero(dims.d, dims.d);
        l.wk = MatrixXd::Zero(dims.d, dims.d);
        l.wv = MatrixXd::Zero(dims.d, dims.d);
        l.wo = MatrixXd::Zero(dims.d, dims.d);
    }
    m.head = MatrixXd::Zero(dims.d, dims.n_classes);
    return m;
}

ToyModel ToyModel::random(const ToyDims& dims, std::uint64_t seed) {
    ToyModel m = zeros(dims);
    Rng rng(seed);
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(dims.d));
    for (auto& t : m.tensors()) {
        const double std_dev = t.name == "embedding" ? 1.0 : proj_std;
        for (Eigen::Index r = 0; r < t.value->rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value->cols(); ++c) (*t.value)(r, c) = std_dev * normal01(rng);
        }
    }
    return m;
}

std::vector<ToyModel::NamedTensor> ToyModel::tensors() {
    std::vector<NamedTensor> out{{"embedding", &embedding}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        out.push_back({p + "wq", &layers[l].wq});
        out.push_back({p + "wk", &layers[l].wk});
        out.push_back({p + "wv", &layers[l].wv});
        out.push_back({p + "wo", &layers[l].wo});
    }
    out.push_back({"head", &head});
    return out;
}

std::vector<ToyModel::ConstNamedTensor> ToyModel::tensors() const {
    std::vector<ConstNamedTensor> out;
    for (auto& t : const_cast<ToyModel*>(this)->tensors()) out.push_back({t.name, t.value});
    return out;
}

std::size_t ToyModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += static_cast<std::size_t>(t.value->size());
    return n;
}

double& ToyModel::flat(std::size_t index) {
    for (auto& t : tensors()) {
        const auto size = static_cast<std::size_t>(t.value->size());
        if (index < size) {
            const auto cols = static_cast<std::size_t>(t.value->cols());
            return (*t.value)(static_cast<Eigen::Index>(index / cols), static_cast<Eigen::Index>(index % cols));
        }
        index -= size;
    }
    throw Error(ErrorKind::InvalidArgument, "parameter index out of range");
}

double ToyModel::flat(std::size_t index) const { return const_cast<ToyModel*>(this)->flat(index); }

void ToyModel::add_scaled(const ToyModel& other, double scale) {
    auto mine = tensors();
    const auto theirs = other.tensors();
    for (std::size_t i = 0; i < mine.size(); ++i) *mine[i].value += scale * *theirs[i].value;
}

bool ToyModel::all_finite() const {
    for (const auto& t : tensors()) {
        if (!t.value->allFinite()) return false;
    }
    return true;
}

std::vector<int> tokenize_prompt(std::string_view text) {
    std::vector<int> out;
    std::size_t i = 0;
    const auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    while (i < text.size()) {
        if (!alnum(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && alnum(text[j])) ++j;
        std::string tok(text.substr(i, j - i));
        for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        int id = vocab::kUnknown;
        if (std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            if (tok.size() <= 2) {
                const int v = std::stoi(tok);
                if (v >= 1 && v <= vocab::kMaxNumeral) id = vocab::kNumeralBase + v - 1;
            }
        } else if (const auto it = std::find(kWords.begin(), kWords.end(), tok); it != kWords.end()) {
            id = vocab::kWordBase + static_cast<int>(it - kWords.begin());
        }
        out.push_back(id);
        i = j;
    }
    return out;
}

ToySample make_sample(const Scene& scene, std::string_view prompt_text, const ToyDims& dims) {
    const int g = dims.visual_grid;
    std::vector<int> counts(static_cast<std::size_t>(g) * g, 0);
    const double cell = static_cast<double>(scene.grid.image_size) / g;
    for (const auto& o : scene.objects) {
        const int cx = std::clamp(static_cast<int>(std::floor(o.center.x / cell)), 0, g - 1);
        const int cy = std::clamp(static_cast<int>(std::floor(o.center.y / cell)), 0, g - 1);
        ++counts[static_cast<std::size_t>(cy) * g + cx];
    }
    ToySample s;
    for (int c : counts) {
        s.tokens.push_back(vocab::kVisualBase + std::min(c, vocab::kVisualLevels - 1));
        s.roles.push_back(TokenRole::Visual);
    }
    for (int t : tokenize_prompt(prompt_text)) {
        s.tokens.push_back(t);
        s.roles.push_back(TokenRole::Text);
    }
    s.tokens.push_back(vocab::kAnswerStart);
    s.roles.push_back(TokenRole::Generated);
    s.tokens.push_back(vocab::kAnswerCount);
    s.roles.push_back(TokenRole::Generated);
    s.label = scene.count;
    return s;
}

namespace {

struct LayerCache {
    MatrixXd x;  // layer input
    MatrixXd q, k, v, o;
    std::vector<MatrixXd> attn;  // per head, S x S
};

struct Trace {
    std::vector<LayerCache> layers;
    MatrixXd x_out;
    VectorXd logits;
};

int prefix_length(const ToySample& s) {
    const auto it = std::find(s.roles.begin(), s.roles.end(), TokenRole::Generated);
    return static_cast<int>(it - s.roles.begin());
}

// Prefix positions see the whole prefix; answer positions see the prefix and
// earlier answer positions.
bool visible(int query, int key, int prefix_len) {
    return key < prefix_len || (query >= prefix_len && key <= query);
}

void check_sample(const ToyModel& m, const ToySample& s) {
    if (s.tokens.empty() || s.tokens.size() != s.roles.size()) {
        throw Error(ErrorKind::DimensionMismatch, "sample tokens and roles disagree");
    }
    for (int t : s.tokens) {
        if (t < 0 || t >= m.dims.vocab) throw Error(ErrorKind::DimensionMismatch, "token id outside vocab");
    }
    const int cls = s.label - kFirstCountClass;
    if (cls < 0 || cls >= m.dims.n_classes) {
        throw Error(ErrorKind::DimensionMismatch, "label " + std::to_string(s.label) + " outside count classes");
    }
}

Trace run(const ToyModel& m, const ToySample& s) {
    check_sample(m, s);
    const int n = static_cast<int>(s.tokens.size());
    const int d = m.dims.d;
    const int dh = d / m.dims.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int prefix = prefix_length(s);

    Trace tr;
    MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) x.row(i) = m.embedding.row(s.tokens[static_cast<std::size_t>(i)]);

    for (const auto& lp : m.layers) {
        LayerCache c;
        c.x = x;
        c.q = x * lp.wq;
        c.k = x * lp.wk;
        c.v = x * lp.wv;
        c.o = MatrixXd::Zero(n, d);
        for (int h = 0; h < m.dims.heads; ++h) {
            MatrixXd scores = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
            MatrixXd a = MatrixXd::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < n; ++j) {
                    if (visible(i, j, prefix)) mx = std::max(mx, scores(i, j));
                }
                double z = 0.0;
                for (int j = 0; j < n; ++j) {
                    if (!visible(i, j, prefix)) continue;
                    a(i, j) = std::exp(scores(i, j) - mx);
                    z += a(i, j);
                }
                a.row(i) /= z;
            }
            c.o.middleCols(h * dh, dh) = a * c.v.middleCols(h * dh, dh);
            c.attn.push_back(std::move(a));
        }
        x = x + c.o * lp.wo;
        tr.layers.push_back(std::move(c));
    }
    tr.logits = (x.row(n - 1) * m.head).transpose();
    tr.x_out = std::move(x);
    return tr;
}

AttentionRecord record_from(const Trace& tr, const ToySample& s, int heads) {
    const int n = static_cast<int>(s.tokens.size());
    AttentionRecord rec(static_cast<int>(tr.layers.size()), heads, n, s.roles);
    for (std::size_t l = 0; l < tr.layers.size(); ++l) {
        for (int h = 0; h < heads; ++h) {
            const MatrixXd& a = tr.layers[l].attn[static_cast<std::size_t>(h)];
            for (int t = 0; t < n; ++t) {
                auto row = rec.row(static_cast<int>(l), h, t);
                for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = a(t, j);
            }
        }
    }
    return rec;
}

VectorXd softmax(const VectorXd& logits) {
    const double mx = logits.maxCoeff();
    VectorXd p = (logits.array() - mx).exp();
    return p / p.sum();
}

double cross_entropy(const VectorXd& logits, int cls) {
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return lse - logits(cls);
}

struct SampleEval {
    double ce = 0.0;
    double mas = 0.0;
};

SampleEval eval_sample(const Trace& tr, const ToySample& s, const ToyModel& m, std::span<const int> layers,
                       const MasConfig& config) {
    const AttentionRecord rec = record_from(tr, s, m.dims.heads);
    const std::vector<int> targets = select_target_steps(rec.roles);
    return {cross_entropy(tr.logits, s.label - kFirstCountClass), mas_mean(rec, layers, targets, config.domain)};
}

void check_batch(std::span<const ToySample> batch) {
    if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
}

}  // namespace

Forward forward(const ToyModel& model, const ToySample& sample) {
    Trace tr = run(model, sample);
    return {tr.logits, record_from(tr, sample, model.dims.heads)};
}

LossBreakdown evaluate_loss(const ToyModel& model, std::span<const ToySample> batch, const MasConfig& config) {
    check_batch(batch);
    const std::vector<int> layers = resolve_layers(model.dims.layers, config.layers);
    LossBreakdown out;
    for (const auto& s : batch) {
        const SampleEval e = eval_sample(run(model, s), s, model, layers, config);
        out.ce += e.ce;
        out.mas += e.mas;
    }
    const double b = static_cast<double>(batch.size());
    out.ce /= b;
    out.mas /= b;
    out.l_mas = hinge_loss(out.mas, config.tau);
    out.total = total_loss(out.ce, out.l_mas, config.lambda);
    return out;
}

LossAndGrads loss_and_grads(const ToyModel& model, std::span<const ToySample> batch, const MasConfig& config) {
    check_batch(batch);
    const std::vector<int> layers = resolve_layers(model.dims.layers, config.layers);
    const double b = static_cast<double>(batch.size());

    std::vector<Trace> traces;
    traces.reserve(batch.size());
    LossAndGrads out{{}, ToyModel::zeros(model.dims)};
    for (const auto& s : batch) {
        traces.push_back(run(model, s));
        const SampleEval e = eval_sample(traces.back(), s, model, layers, config);
        out.loss.ce += e.ce;
        out.loss.mas += e.mas;
    }
    out.loss.ce /= b;
    out.loss.mas /= b;
    out.loss.l_mas = hinge_loss(out.loss.mas, config.tau);
    out.loss.total = total_loss(out.loss.ce, out.loss.l_mas, config.lambda);

    const double mas_slope = config.lambda * hinge_slope(out.loss.mas, config.tau);
    const int d = model.dims.d;
    const int dh = d / model.dims.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    ToyModel& g = out.grads;

    for (std::size_t si = 0; si < batch.size(); ++si) {
        const ToySample& s = batch[si];
        const Trace& tr = traces[si];
        const int n = static_cast<int>(s.tokens.size());
        const std::vector<int> targets = select_target_steps(s.roles);

        VectorXd dlogits = softmax(tr.logits);
        dlogits(s.label - kFirstCountClass) -= 1.0;
        dlogits /= b;
        g.head += tr.x_out.row(n - 1).transpose() * dlogits.transpose();
        MatrixXd dx = MatrixXd::Zero(n, d);
        dx.row(n - 1) = (model.head * dlogits).transpose();

        // d(batch MAS)/d(ratio_t) for every (layer in set, target step).
        const double ratio_coeff =
            mas_slope / (b * static_cast<double>(layers.size()) * static_cast<double>(targets.size()));

        for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
            const LayerParams& lp = model.layers[static_cast<std::size_t>(l)];
            LayerParams& lg = g.layers[static_cast<std::size_t>(l)];
            const LayerCache& c = tr.layers[static_cast<std::size_t>(l)];

            lg.wo += c.o.transpose() * dx;
            const MatrixXd d_o = dx * lp.wo.transpose();
            MatrixXd dq = MatrixXd::Zero(n, d);
            MatrixXd dk = MatrixXd::Zero(n, d);
            MatrixXd dv = MatrixXd::Zero(n, d);

            const bool penalized =
                ratio_coeff != 0.0 && std::find(layers.begin(), layers.end(), l) != layers.end();
            // Per target step: visual mass and scored mass summed over heads.
            std::vector<double> num(targets.size(), 0.0);
            std::vector<double> den(targets.size(), 0.0);
            if (penalized) {
                for (std::size_t ti = 0; ti < targets.size(); ++ti) {
                    for (const auto& a : c.attn) {
                        for (int j = 0; j < n; ++j) {
                            const TokenRole role = s.roles[static_cast<std::size_t>(j)];
                            if (role == TokenRole::Visual) num[ti] += a(targets[ti], j);
                            if (role != TokenRole::Generated || config.domain == KeyDomain::AllKeys) {
                                den[ti] += a(targets[ti], j);
                            }
                        }
                    }
                }
            }

            for (int h = 0; h < model.dims.heads; ++h) {
                const MatrixXd& a = c.attn[static_cast<std::size_t>(h)];
                const auto d_oh = d_o.middleCols(h * dh, dh);
                MatrixXd da = d_oh * c.v.middleCols(h * dh, dh).transpose();
                if (penalized) {
                    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
                        const int t = targets[ti];
                        const double r = num[ti] / den[ti];
                        for (int j = 0; j < n; ++j) {
                            const TokenRole role = s.roles[static_cast<std::size_t>(j)];
                            const double in_num = role == TokenRole::Visual ? 1.0 : 0.0;
                            const double in_den =
                                (role != TokenRole::Generated || config.domain == KeyDomain::AllKeys) ? 1.0 : 0.0;
                            da(t, j) += ratio_coeff * (in_num - r * in_den) / den[ti];
                        }
                    }
                }
                dv.middleCols(h * dh, dh) = a.transpose() * d_oh;
                const VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
                const MatrixXd ds = (a.array() * (da.colwise() - row_dot).array()).matrix();
                dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh) * scale;
                dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh) * scale;
            }

            lg.wq += c.x.transpose() * dq;
            lg.wk += c.x.transpose() * dk;
            lg.wv += c.x.transpose() * dv;
            dx += dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
        }
        for (int i = 0; i < n; ++i) g.embedding.row(s.tokens[static_cast<std::size_t>(i)]) += dx.row(i);
    }
    return out;
}

FdReport finite_diff_check(const ToyModel& model, std::span<const ToySample> batch, const MasConfig& config,
                           std::size_t n_coords, double eps, std::uint64_t seed) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw Error(ErrorKind::InvalidArgument, "eps must lie in [1e-7, 1e-3]");
    const LossAndGrads analytic = loss_and_grads(model, batch, config);
    ToyModel probe = model;
    const std::size_t n_params = model.parameter_count();
    Rng rng(seed);

    FdReport rep;
    for (std::size_t k = 0; k < n_coords; ++k) {
        const std::size_t idx = uniform_index(rng, n_params);
        const double orig = probe.flat(idx);
        probe.flat(idx) = orig + eps;
        const LossBreakdown plus = evaluate_loss(probe, batch, config);
        probe.flat(idx) = orig - eps;
        const LossBreakdown minus = evaluate_loss(probe, batch, config);
        probe.flat(idx) = orig;

        if (config.lambda != 0.0 && plus.mas != minus.mas &&
            (plus.mas - config.tau) * (minus.mas - config.tau) <= 0.0) {
            ++rep.skipped_kink;
            rep.kink_coordinates.push_back(idx);
            continue;
        }
        const double a = analytic.grads.flat(idx);
        const double num = (plus.total - minus.total) / (2.0 * eps);
        if (std::abs(a) < 1e-12 && std::abs(num) < 1e-12) {
            ++rep.skipped_tiny;
            continue;
        }
        const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-12});
        rep.entries.push_back({idx, a, num, rel});
        rep.max_rel_error = std::max(rep.max_rel_error, rel);
        ++rep.checked;
    }
    return rep;
}

TrainResult train(std::span<const ToySample> dataset, const MasConfig& config, const TrainOptions& options,
                  const ToyDims& dims) {
    if (dataset.empty()) throw Error(ErrorKind::InvalidArgument, "empty training set");
    if (options.batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch size must be positive");

    TrainResult res{ToyModel::random(dims, derive_seed(options.seed, 0x1417)), {}};
    const auto record = [&](int epoch) {
        const LossBreakdown lb = evaluate_loss(res.model, dataset, config);
        if (!std::isfinite(lb.total)) {
            throw Error(ErrorKind::Divergence, "non-finite loss after epoch " + std::to_string(epoch));
        }
        res.trajectory.push_back({epoch, lb.ce, lb.mas, lb.l_mas, lb.total});
    };
    record(0);

    std::vector<std::size_t> order(dataset.size());
    std::vector<ToySample> batch;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(options.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
        shuffle(std::span(order), rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            batch.clear();
            for (std::size_t i = start; i < std::min(order.size(), start + options.batch_size); ++i) {
                batch.push_back(dataset[order[i]]);
            }
            const LossAndGrads lg = loss_and_grads(res.model, batch, config);
            if (!std::isfinite(lg.loss.total) || !lg.grads.all_finite()) {
                throw Error(ErrorKind::Divergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                                       ", batch starting at " + std::to_string(start));
            }
            res.model.add_scaled(lg.grads, -options.step);
        }
        record(epoch);
    }
    return res;
}

std::string trajectory_jsonl(std::span<const EpochStats> trajectory) {
    std::string out;
    for (const auto& e : trajectory) {
        ojson j;
        j["epoch"] = e.epoch;
        j["ce"] = e.ce;
        j["mas_mean"] = e.mas_mean;
        j["l_mas"] = e.l_mas;
        j["l_total"] = e.l_total;
        out += j.dump() + "\n";
    }
    return out;
}

void save_checkpoint(const ToyModel& model, const fs::path& stem) {
    ojson h;
    h["d"] = model.dims.d;
    h["heads"] = model.dims.heads;
    h["layers"] = model.dims.layers;
    h["vocab"] = model.dims.vocab;
    h["n_classes"] = model.dims.n_classes;
    h["visual_grid"] = model.dims.visual_grid;
    h["dtype"] = "f64";
    h["byte_order"] = "little-endian";
    ojson tensors = ojson::array();
    std::string payload;
    for (const auto& t : model.tensors()) {
        tensors.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
        for (Eigen::Index r = 0; r < t.value->rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value->cols(); ++c) {
                const auto bits = std::bit_cast<std::uint64_t>((*t.value)(r, c));
                for (int b = 0; b < 8; ++b) payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
            }
        }
    }
    h["tensors"] = std::move(tensors);

    fs::path header = stem;
    header += ".json";
    fs::path bin = stem;
    bin += ".bin";
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
    std::ofstream hj(header, std::ios::binary | std::ios::trunc);
    std::ofstream bb(bin, std::ios::binary | std::ios::trunc);
    if (!hj || !bb) throw Error(ErrorKind::Io, "cannot write checkpoint " + stem.string());
    hj << h.dump() << "\n";
    bb.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

ToyModel load_checkpoint(const fs::path& stem) {
    fs::path header = stem;
    header += ".json";
    fs::path bin = stem;
    bin += ".bin";
    for (const auto& p : {header, bin}) {
        if (!fs::exists(p)) throw Error(ErrorKind::MissingArtifact, p.string() + " not found");
    }
    std::ifstream hj(header, std::ios::binary);
    std::stringstream ss;
    ss << hj.rdbuf();
    ToyDims dims;
    try {
        const ojson h = ojson::parse(ss.str());
        dims.d = h.at("d").get<int>();
        dims.heads = h.at("heads").get<int>();
        dims.layers = h.at("layers").get<int>();
        dims.vocab = h.at("vocab").get<int>();
        dims.n_classes = h.at("n_classes").get<int>();
        dims.visual_grid = h.at("visual_grid").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::CorruptPayload, header.string() + ": " + e.what());
    }
    ToyModel m = ToyModel::zeros(dims);
    std::ifstream bb(bin, std::ios::binary);
    const std::string payload((std::istreambuf_iterator<char>(bb)), std::istreambuf_iterator<char>());
    if (payload.size() != 8 * m.parameter_count()) {
        throw Error(ErrorKind::CorruptPayload, bin.string() + ": size does not match the shape header");
    }
    std::size_t pos = 0;
    for (auto& t : m.tensors()) {
        for (Eigen::Index r = 0; r < t.value->rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value->cols(); ++c) {
                std::uint64_t bits = 0;
                for (int b = 0; b < 8; ++b) {
                    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[pos++])) << (8 * b);
                }
                (*t.value)(r, c) = std::bit_cast<double>(bits);
            }
        }
    }
    return m;
}

}  // namespace ctricks::toy
