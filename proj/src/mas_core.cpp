#include "ctricks/mas_core.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ctricks/error.hpp"
#include "json.hpp"

namespace ctricks {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kLayout = "layer-major then head then step then key";

}  // namespace

std::string_view to_string(TokenRole role) {
    switch (role) {
        case TokenRole::Visual: return "visual";
        case TokenRole::Text: return "text";
        case TokenRole::Generated: return "generated";
    }
    return "text";
}

TokenRole parse_role(std::string_view text) {
    if (text == "visual") return TokenRole::Visual;
    if (text == "text") return TokenRole::Text;
    if (text == "generated") return TokenRole::Generated;
    throw Error(ErrorKind::InvalidArgument, "unknown token role '" + std::string(text) + "'");
}

AttentionRecord::AttentionRecord(int n_layers, int n_heads, int n_steps, std::vector<TokenRole> key_roles)
    : layers(n_layers),
      heads(n_heads),
      steps(n_steps),
      keys(static_cast<int>(key_roles.size())),
      roles(std::move(key_roles)),
      weights(static_cast<std::size_t>(n_layers) * n_heads * n_steps * keys, 0.0) {}

void AttentionRecord::validate(double tol) const {
    if (layers <= 0 || heads <= 0 || steps <= 0 || keys <= 0) {
        throw Error(ErrorKind::DimensionMismatch, "attention record has an empty dimension");
    }
    if (steps > keys) throw Error(ErrorKind::DimensionMismatch, "more steps than keys");
    if (roles.size() != static_cast<std::size_t>(keys)) {
        throw Error(ErrorKind::DimensionMismatch, "one role per key required");
    }
    if (weights.size() != static_cast<std::size_t>(layers) * heads * steps * keys) {
        throw Error(ErrorKind::DimensionMismatch, "payload size does not match L*H*T*K");
    }
    for (int l = 0; l < layers; ++l) {
        for (int h = 0; h < heads; ++h) {
            for (int t = 0; t < steps; ++t) {
                double sum = 0.0;
                for (double a : row(l, h, t)) {
                    if (!(a >= 0.0)) {
                        throw Error(ErrorKind::InvalidArgument, "negative or NaN attention weight");
                    }
                    sum += a;
                }
                if (std::abs(sum - 1.0) > tol) {
                    throw Error(ErrorKind::InvalidArgument,
                                "attention row (" + std::to_string(l) + "," + std::to_string(h) + "," +
                                    std::to_string(t) + ") sums to " + std::to_string(sum));
                }
            }
        }
    }
}

std::vector<int> select_target_steps(std::span<const TokenRole> roles) {
    std::vector<int> out;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        if (roles[i] == TokenRole::Generated) out.push_back(static_cast<int>(i));
    }
    if (out.empty()) throw Error(ErrorKind::EmptyTarget, "sequence has no assistant response span");
    return out;
}

double mas_layer(const AttentionRecord& record, int layer, std::span<const int> targets, KeyDomain domain) {
    if (layer < 0 || layer >= record.layers) {
        throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(layer) + " out of range");
    }
    if (targets.empty()) throw Error(ErrorKind::EmptyTarget, "no target steps");
    const bool any_scored = std::any_of(record.roles.begin(), record.roles.end(),
                                        [](TokenRole r) { return r != TokenRole::Generated; });
    if (!any_scored) throw Error(ErrorKind::ZeroDenominator, "no visual or text keys");

    double total = 0.0;
    for (int t : targets) {
        if (t < 0 || t >= record.steps) {
            throw Error(ErrorKind::DimensionMismatch, "target step " + std::to_string(t) + " out of range");
        }
        double visual = 0.0;
        double denom = 0.0;
        for (int h = 0; h < record.heads; ++h) {
            const auto row = record.row(layer, h, t);
            for (int j = 0; j < record.keys; ++j) {
                const TokenRole role = record.roles[static_cast<std::size_t>(j)];
                if (role == TokenRole::Visual) visual += row[static_cast<std::size_t>(j)];
                if (role != TokenRole::Generated || domain == KeyDomain::AllKeys) {
                    denom += row[static_cast<std::size_t>(j)];
                }
            }
        }
        if (denom <= 0.0) {
            throw Error(ErrorKind::ZeroDenominator, "step " + std::to_string(t) + " puts no mass on scored keys");
        }
        total += visual / denom;
    }
    return total / static_cast<double>(targets.size());
}

double mas_mean(const AttentionRecord& record, std::span<const int> layers, std::span<const int> targets,
                KeyDomain domain) {
    if (layers.empty()) throw Error(ErrorKind::EmptyLayerSet, "mas_mean needs at least one layer");
    double sum = 0.0;
    for (int l : layers) sum += mas_layer(record, l, targets, domain);
    return sum / static_cast<double>(layers.size());
}

std::vector<int> resolve_layers(int n_layers, std::span<const int> requested) {
    if (requested.empty()) {
        std::vector<int> all(static_cast<std::size_t>(n_layers));
        for (int l = 0; l < n_layers; ++l) all[static_cast<std::size_t>(l)] = l;
        return all;
    }
    for (int l : requested) {
        if (l < 0 || l >= n_layers) {
            throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(l) + " out of range");
        }
    }
    return {requested.begin(), requested.end()};
}

double hinge_loss(double mas_value, double tau) { return std::max(0.0, tau - mas_value); }

double hinge_slope(double mas_value, double tau) { return mas_value < tau ? -1.0 : 0.0; }

double total_loss(double ce, double mas_loss, double lambda) { return ce + lambda * mas_loss; }

AttnGrid visual_attention_grid(const AttentionRecord& record, std::span<const int> layers,
                               std::span<const int> targets, int grid_dim) {
    std::vector<int> visual_keys;
    for (int j = 0; j < record.keys; ++j) {
        if (record.roles[static_cast<std::size_t>(j)] == TokenRole::Visual) visual_keys.push_back(j);
    }
    const auto cells = static_cast<std::size_t>(grid_dim) * grid_dim;
    if (visual_keys.size() != cells) {
        throw Error(ErrorKind::DimensionMismatch, std::to_string(visual_keys.size()) + " visual keys for a " +
                                                      std::to_string(grid_dim) + "x" + std::to_string(grid_dim) +
                                                      " grid");
    }
    if (layers.empty()) throw Error(ErrorKind::EmptyLayerSet, "no layers selected");
    if (targets.empty()) throw Error(ErrorKind::EmptyTarget, "no target steps");

    AttnGrid grid{grid_dim, grid_dim, std::vector<double>(cells, 0.0)};
    const double norm = 1.0 / static_cast<double>(layers.size() * targets.size() * record.heads);
    for (int l : layers) {
        for (int h = 0; h < record.heads; ++h) {
            for (int t : targets) {
                const auto row = record.row(l, h, t);
                for (std::size_t c = 0; c < cells; ++c) {
                    grid.values[c] += norm * row[static_cast<std::size_t>(visual_keys[c])];
                }
            }
        }
    }
    return grid;
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Io, "SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {

fs::path payload_path_for(const fs::path& header_path) {
    fs::path p = header_path;
    p.replace_extension(".f32");
    return p;
}

}  // namespace

void write_attention_record(const AttentionRecord& record, const fs::path& header_path) {
    std::vector<unsigned char> payload(record.weights.size() * 4);
    for (std::size_t i = 0; i < record.weights.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(record.weights[i]));
        for (int b = 0; b < 4; ++b) payload[4 * i + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    }
    const fs::path payload_path = payload_path_for(header_path);

    ojson h;
    h["L"] = record.layers;
    h["H"] = record.heads;
    h["T_steps"] = record.steps;
    h["T_keys"] = record.keys;
    ojson roles = ojson::array();
    for (TokenRole r : record.roles) roles.push_back(to_string(r));
    h["roles"] = std::move(roles);
    h["dtype"] = "f32";
    h["byte_order"] = "little-endian";
    h["layout"] = kLayout;
    h["payload"] = payload_path.filename().string();
    h["payload_sha256"] = sha256_hex(payload);

    if (header_path.has_parent_path()) fs::create_directories(header_path.parent_path());
    std::ofstream bin(payload_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw Error(ErrorKind::Io, "cannot open " + payload_path.string());
    bin.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    std::ofstream js(header_path, std::ios::binary | std::ios::trunc);
    if (!js) throw Error(ErrorKind::Io, "cannot open " + header_path.string());
    js << h.dump() << "\n";
    if (!bin || !js) throw Error(ErrorKind::Io, "write failed for " + header_path.string());
}

AttentionRecord read_attention_record(const fs::path& header_path) {
    if (!fs::exists(header_path)) throw Error(ErrorKind::MissingArtifact, header_path.string() + " not found");
    std::ifstream js(header_path, std::ios::binary);
    std::stringstream ss;
    ss << js.rdbuf();

    AttentionRecord rec;
    fs::path payload_path;
    std::string expected_hash;
    try {
        const ojson h = ojson::parse(ss.str());
        if (h.at("dtype") != "f32" || h.at("byte_order") != "little-endian" || h.at("layout") != kLayout) {
            throw Error(ErrorKind::CorruptPayload, header_path.string() + ": unsupported dtype/byte order/layout");
        }
        rec.layers = h.at("L").get<int>();
        rec.heads = h.at("H").get<int>();
        rec.steps = h.at("T_steps").get<int>();
        rec.keys = h.at("T_keys").get<int>();
        for (const auto& r : h.at("roles")) rec.roles.push_back(parse_role(r.get<std::string>()));
        payload_path = header_path.parent_path() / h.at("payload").get<std::string>();
        expected_hash = h.at("payload_sha256").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::CorruptPayload, header_path.string() + ": " + e.what());
    }
    if (rec.layers <= 0 || rec.heads <= 0 || rec.steps <= 0 || rec.keys <= 0) {
        throw Error(ErrorKind::DimensionMismatch, header_path.string() + ": empty dimension");
    }

    if (!fs::exists(payload_path)) throw Error(ErrorKind::MissingArtifact, payload_path.string() + " not found");
    std::ifstream bin(payload_path, std::ios::binary);
    std::vector<unsigned char> payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    const std::size_t n = static_cast<std::size_t>(rec.layers) * rec.heads * rec.steps * rec.keys;
    if (payload.size() != 4 * n) {
        throw Error(ErrorKind::CorruptPayload, payload_path.string() + ": expected " + std::to_string(4 * n) +
                                                   " bytes, found " + std::to_string(payload.size()));
    }
    if (sha256_hex(payload) != expected_hash) {
        throw Error(ErrorKind::CorruptPayload, payload_path.string() + ": content hash mismatch");
    }
    rec.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
        rec.weights[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    rec.validate();
    return rec;
}

}  // namespace ctricks
