#include "tabgraph/model.hpp"

#include "tabgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace tabgraph {

using nn::Tensor;
using nn::Var;

const char* to_string(InteractionKind kind) {
    switch (kind) {
    case InteractionKind::fcnn: return "fcnn";
    case InteractionKind::dgcnn_star: return "dgcnn_star";
    case InteractionKind::gravnet_star: return "gravnet_star";
    }
    return "?";
}

InteractionKind interaction_kind_from_string(const std::string& name) {
    if (name == "fcnn") return InteractionKind::fcnn;
    if (name == "dgcnn" || name == "dgcnn_star") return InteractionKind::dgcnn_star;
    if (name == "gravnet" || name == "gravnet_star") return InteractionKind::gravnet_star;
    throw ConfigError("unknown interaction kind '" + name + "' (expected fcnn, dgcnn or gravnet)");
}

const char* to_string(Head head) {
    switch (head) {
    case Head::cells: return "cells";
    case Head::rows: return "rows";
    case Head::cols: return "cols";
    }
    return "?";
}

void check_config(const ModelConfig& cfg) {
    auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
    if (cfg.cnn_strides.size() != cfg.cnn_widths.size() + 1)
        fail("cnn_strides needs " + std::to_string(cfg.cnn_widths.size() + 1) + " entries");
    for (auto w : cfg.cnn_widths)
        if (w == 0) fail("cnn_widths entries must be positive");
    for (auto s : cfg.cnn_strides)
        if (s == 0) fail("cnn_strides entries must be positive");
    if (cfg.q == 0) fail("q must be positive");
    const auto& ic = cfg.interaction;
    if (ic.layers == 0) fail("interaction.layers must be positive");
    if (ic.width == 0 || ic.output_width == 0) fail("interaction widths must be positive");
    if (ic.kind != InteractionKind::fcnn && ic.k == 0) fail("interaction.k must be positive");
    if (ic.kind == InteractionKind::gravnet_star && (ic.spatial_dims == 0 || ic.propagate_width == 0))
        fail("gravnet spatial_dims and propagate_width must be positive");
    for (auto w : cfg.head_hidden)
        if (w == 0) fail("head_hidden entries must be positive");
    if (!(cfg.max_word_len > 0)) fail("max_word_len must be positive");
}

nlohmann::json to_json(const ModelConfig& cfg) {
    const auto& ic = cfg.interaction;
    return {
        {"cnn_widths", cfg.cnn_widths},
        {"cnn_strides", cfg.cnn_strides},
        {"q", cfg.q},
        {"interaction",
         {{"kind", to_string(ic.kind)},
          {"layers", ic.layers},
          {"width", ic.width},
          {"output_width", ic.output_width},
          {"k", ic.k},
          {"spatial_dims", ic.spatial_dims},
          {"propagate_width", ic.propagate_width}}},
        {"head_hidden", cfg.head_hidden},
        {"max_word_len", cfg.max_word_len},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "cnn_widths") cfg.cnn_widths = value.get<std::vector<std::size_t>>();
            else if (key == "cnn_strides") cfg.cnn_strides = value.get<std::vector<std::size_t>>();
            else if (key == "q") cfg.q = value.get<std::size_t>();
            else if (key == "head_hidden") cfg.head_hidden = value.get<std::vector<std::size_t>>();
            else if (key == "max_word_len") cfg.max_word_len = value.get<double>();
            else if (key == "interaction") {
                if (!value.is_object()) throw ConfigError("interaction must be an object");
                auto& ic = cfg.interaction;
                for (const auto& [k, v] : value.items()) {
                    if (k == "kind") ic.kind = interaction_kind_from_string(v.get<std::string>());
                    else if (k == "layers") ic.layers = v.get<std::size_t>();
                    else if (k == "width") ic.width = v.get<std::size_t>();
                    else if (k == "output_width") ic.output_width = v.get<std::size_t>();
                    else if (k == "k") ic.k = v.get<std::size_t>();
                    else if (k == "spatial_dims") ic.spatial_dims = v.get<std::size_t>();
                    else if (k == "propagate_width") ic.propagate_width = v.get<std::size_t>();
                    else throw ConfigError("unknown interaction key '" + k + "'");
                }
            } else {
                throw ConfigError("unknown model config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    check_config(cfg);
    return cfg;
}

ModelConfig large_config(InteractionKind kind) {
    ModelConfig cfg;
    cfg.cnn_widths = {32, 64, 64};
    cfg.q = 64;
    cfg.interaction.kind = kind;
    cfg.interaction.layers = 4;
    cfg.interaction.width = 192;
    cfg.interaction.output_width = 128;
    cfg.interaction.propagate_width = 96;
    cfg.head_hidden = {256, 128};
    return cfg;
}

std::vector<std::size_t> nearest_neighbours(const Tensor& points, std::size_t k, std::size_t& k_used) {
    const std::size_t v = points.dim(0), d = points.dim(1);
    if (v == 0) {
        k_used = 0;
        return {};
    }
    if (v == 1) {
        k_used = 1;
        return {0};
    }
    k_used = std::min(k, v - 1);
    std::vector<std::size_t> out;
    out.reserve(v * k_used);
    std::vector<std::pair<double, std::size_t>> dist(v - 1);
    for (std::size_t i = 0; i < v; ++i) {
        std::size_t n = 0;
        for (std::size_t j = 0; j < v; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = points.at(i, c) - points.at(j, c);
                s += diff * diff;
            }
            dist[n++] = {s, j};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_used), dist.end());
        for (std::size_t m = 0; m < k_used; ++m) out.push_back(dist[m].second);
    }
    return out;
}

Tensor image_tensor(const GrayImage& image) {
    Tensor t({image.height, image.width, 1});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = (255.0 - image.pixels[i]) / 255.0;
    return t;
}

std::pair<std::size_t, std::size_t> gather_cell(const Box& box, std::size_t h, std::size_t w, std::size_t fh,
                                                std::size_t fw) {
    auto scaled = [](double centre, std::size_t in, std::size_t out) {
        const double p = std::floor(centre * static_cast<double>(out) / static_cast<double>(in));
        return static_cast<std::size_t>(std::clamp(p, 0.0, static_cast<double>(out - 1)));
    };
    return {scaled(box.center_y(), h, fh), scaled(box.center_x(), w, fw)};
}

Var Model::Bound::operator()(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    const Var v = tape_->param(params_->get(name));
    vars_.emplace(name, v);
    return v;
}

Model::Bound Model::bind(nn::Tape& tape) { return Bound(tape, params_); }

void Model::add_dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    Tensor w({in, out});
    const double std = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& x : w.data()) x = std * normal01(rng);
    params_.add(name + ".w", std::move(w));
    params_.add(name + ".b", Tensor({out}));
}

Model::Model(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    check_config(cfg_);
    Rng rng(splitmix64(init_seed));

    std::size_t in = 1;
    for (std::size_t l = 0; l <= cfg_.cnn_widths.size(); ++l) {
        const std::size_t out = l < cfg_.cnn_widths.size() ? cfg_.cnn_widths[l] : cfg_.q;
        Tensor k({3, 3, in, out});
        const double std = std::sqrt(2.0 / static_cast<double>(9 * in));
        for (auto& x : k.data()) x = std * normal01(rng);
        params_.add("conv" + std::to_string(l) + ".k", std::move(k));
        params_.add("conv" + std::to_string(l) + ".b", Tensor({out}));
        in = out;
    }

    const auto& ic = cfg_.interaction;
    std::size_t d = cfg_.q + 1 + 4;
    for (std::size_t l = 0; l < ic.layers; ++l) {
        const std::size_t out = l + 1 == ic.layers ? ic.output_width : ic.width;
        const std::string p = "int" + std::to_string(l);
        switch (ic.kind) {
        case InteractionKind::fcnn:
            add_dense(p + ".fc0", d, ic.width, rng);
            add_dense(p + ".fc1", ic.width, out, rng);
            break;
        case InteractionKind::dgcnn_star:
            add_dense(p + ".edge0", 2 * d, ic.width, rng);
            add_dense(p + ".edge1", ic.width, out, rng);
            break;
        case InteractionKind::gravnet_star:
            add_dense(p + ".space", d, ic.spatial_dims, rng);
            add_dense(p + ".prop", d, ic.propagate_width, rng);
            add_dense(p + ".out", d + 2 * ic.propagate_width, out, rng);
            break;
        }
        d = out;
    }

    for (Head h : all_heads) {
        std::size_t hin = 2 * ic.output_width;
        const std::string p = std::string("head.") + to_string(h);
        for (std::size_t l = 0; l < cfg_.head_hidden.size(); ++l) {
            add_dense(p + ".fc" + std::to_string(l), hin, cfg_.head_hidden[l], rng);
            hin = cfg_.head_hidden[l];
        }
        add_dense(p + ".out", hin, 2, rng);
    }
}

Var Model::cnn_features(Bound& b, Var image) {
    Var x = image;
    for (std::size_t l = 0; l <= cfg_.cnn_widths.size(); ++l) {
        const std::string p = "conv" + std::to_string(l);
        x = nn::relu(nn::conv2d(x, b(p + ".k"), b(p + ".b"), cfg_.cnn_strides[l], 1));
    }
    return x;
}

Var Model::vertex_features(Bound& b, Var feature_map, const TableSample& sample) {
    const auto& fs = feature_map.shape();
    if (fs.size() != 3) throw ShapeMismatch("vertex_features: feature map " + nn::shape_string(fs));
    const std::size_t fh = fs[0], fw = fs[1], q = fs[2];
    const std::size_t h = sample.image.height, w = sample.image.width;
    const std::size_t v = sample.vertices.size();

    std::vector<std::size_t> idx(v);
    Tensor other({v, 1});
    Tensor pos({v, 4});
    for (std::size_t i = 0; i < v; ++i) {
        const auto& vert = sample.vertices[i];
        const auto [fy, fx] = gather_cell(vert.bbox, h, w, fh, fw);
        idx[i] = fy * fw + fx;
        other.at(i, 0) = vert.text_len / cfg_.max_word_len;
        pos.at(i, 0) = vert.bbox.x0 / static_cast<double>(w);
        pos.at(i, 1) = vert.bbox.y0 / static_cast<double>(h);
        pos.at(i, 2) = vert.bbox.x1 / static_cast<double>(w);
        pos.at(i, 3) = vert.bbox.y1 / static_cast<double>(h);
    }
    const Var gathered = nn::gather_rows(nn::reshape(feature_map, {fh * fw, q}), idx);
    const std::array<Var, 3> parts{gathered, b.tape().constant(std::move(other)), b.tape().constant(std::move(pos))};
    return nn::concat(parts);
}

Var Model::interact(Bound& b, Var x, bool& degenerate) {
    const auto& ic = cfg_.interaction;
    const std::size_t v = x.shape()[0];
    degenerate = ic.kind != InteractionKind::fcnn && v == 1;
    for (std::size_t l = 0; l < ic.layers; ++l) {
        const std::string p = "int" + std::to_string(l);
        switch (ic.kind) {
        case InteractionKind::fcnn:
            x = nn::relu(nn::dense(x, b(p + ".fc0.w"), b(p + ".fc0.b")));
            x = nn::relu(nn::dense(x, b(p + ".fc1.w"), b(p + ".fc1.b")));
            break;
        case InteractionKind::dgcnn_star: {
            std::size_t k = 0;
            const auto nbr = nearest_neighbours(x.value(), ic.k, k);
            std::vector<std::size_t> self(v * k);
            for (std::size_t i = 0; i < v; ++i) std::fill_n(self.begin() + static_cast<std::ptrdiff_t>(i * k), k, i);
            const Var xi = nn::gather_rows(x, self);
            const Var xj = nn::gather_rows(x, nbr);
            const std::array<Var, 2> edge{xi, nn::sub(xj, xi)};
            Var e = nn::concat(edge);
            e = nn::relu(nn::dense(e, b(p + ".edge0.w"), b(p + ".edge0.b")));
            e = nn::relu(nn::dense(e, b(p + ".edge1.w"), b(p + ".edge1.b")));
            x = nn::reduce_max(e, k);
            break;
        }
        case InteractionKind::gravnet_star: {
            const Var space = nn::dense(x, b(p + ".space.w"), b(p + ".space.b"));
            const Var prop = nn::dense(x, b(p + ".prop.w"), b(p + ".prop.b"));
            std::size_t k = 0;
            const auto nbr = nearest_neighbours(space.value(), ic.k, k);
            std::vector<std::size_t> self(v * k);
            for (std::size_t i = 0; i < v; ++i) std::fill_n(self.begin() + static_cast<std::ptrdiff_t>(i * k), k, i);
            const Var delta = nn::sub(nn::gather_rows(space, nbr), nn::gather_rows(space, self));
            Var weight = nn::exp(nn::scale(nn::row_sum(nn::mul(delta, delta)), -10.0));
            if (v == 1) weight = nn::scale(weight, 0.0);
            const Var messages = nn::mul_rows(nn::gather_rows(prop, nbr), weight);
            const std::array<Var, 3> parts{x, nn::reduce_mean(messages, k), nn::reduce_max(messages, k)};
            x = nn::relu(nn::dense(nn::concat(parts), b(p + ".out.w"), b(p + ".out.b")));
            break;
        }
        }
    }
    return x;
}

Var Model::classify_pairs(Bound& b, Var features, const SampleMatrix& partners, Head head) {
    const std::size_t v = features.shape()[0];
    if (partners.v != v) throw ShapeMismatch("classify_pairs: sample matrix for " + std::to_string(partners.v) +
                                             " vertices, features for " + std::to_string(v));
    std::vector<std::size_t> self(v * partners.t);
    for (std::size_t i = 0; i < v; ++i)
        std::fill_n(self.begin() + static_cast<std::ptrdiff_t>(i * partners.t), partners.t, i);
    const std::array<Var, 2> pair{nn::gather_rows(features, self), nn::gather_rows(features, partners.indices)};
    Var x = nn::concat(pair);
    const std::string p = std::string("head.") + to_string(head);
    for (std::size_t l = 0; l < cfg_.head_hidden.size(); ++l) {
        const std::string n = p + ".fc" + std::to_string(l);
        x = nn::relu(nn::dense(x, b(n + ".w"), b(n + ".b")));
    }
    x = nn::dense(x, b(p + ".out.w"), b(p + ".out.b"));
    return nn::reshape(x, {v, partners.t, 2});
}

ForwardResult Model::forward(nn::Tape& tape, const TableSample& sample, Mode mode, std::size_t s, Rng& rng) {
    const std::size_t v = sample.vertices.size();
    if (v == 0) throw ConfigError("forward: sample has no vertices");
    ForwardResult out;
    if (mode == Mode::train) {
        if (s == 0) throw ConfigError("samples per vertex must be at least 1");
        if (sample.gt.size() != v) throw ShapeMismatch("forward: ground truth does not match vertex count");
        out.samples[0] = draw(balanced_distribution(sample.gt.cells), s, rng);
        out.samples[1] = draw(balanced_distribution(sample.gt.rows), s, rng);
        out.samples[2] = draw(balanced_distribution(sample.gt.cols), s, rng);
    } else {
        out.samples.fill(full_pairing(v));
    }

    Bound b = bind(tape);
    const Var image = tape.constant(image_tensor(sample.image));
    const Var fmap = cnn_features(b, image);
    const Var fcat = vertex_features(b, fmap, sample);
    const Var fint = interact(b, fcat, out.degenerate_graph);
    out.logits.v = v;
    out.logits.t = out.samples[0].t;
    for (Head h : all_heads)
        out.logits.heads[static_cast<std::size_t>(h)] =
            classify_pairs(b, fint, out.samples[static_cast<std::size_t>(h)], h);
    return out;
}

std::filesystem::path model_config_path(const std::filesystem::path& checkpoint) {
    return std::filesystem::path(checkpoint.string() + ".json");
}

void save_model(Model& model, const std::filesystem::path& checkpoint) {
    nn::save_checkpoint(model.params(), checkpoint);
    const auto path = model_config_path(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(model.config()).dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& checkpoint) {
    const auto path = model_config_path(checkpoint);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what(), e.byte);
    }
    Model model(model_config_from_json(j), 0);
    nn::load_checkpoint(model.params(), checkpoint);
    return model;
}

} // namespace tabgraph
