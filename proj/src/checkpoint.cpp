#include "mil/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mil/errors.hpp"

using nlohmann::json;

namespace mil {

namespace {

constexpr char kMagic[] = {'M', 'I', 'L', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) throw IngestError("truncated checkpoint " + path);
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_raw<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
    const auto len = read_raw<std::uint64_t>(in, path);
    if (len > (1ULL << 32)) throw IngestError("corrupt length in " + path);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw IngestError("truncated checkpoint " + path);
    return s;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    write_string(out, name);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) write_raw<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

json layer_to_json(const LayerSpec& spec) {
    json j;
    j["kind"] = layer_kind_name(spec.kind);
    switch (spec.kind) {
        case LayerKind::Conv2d:
            j["in_channels"] = spec.in_channels;
            j["out_channels"] = spec.out_channels;
            j["kernel"] = spec.kernel;
            break;
        case LayerKind::Affine:
            j["out_units"] = spec.out_units;
            break;
        case LayerKind::Dropout:
            j["rate"] = spec.rate;
            break;
        default:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "conv2d") {
        return LayerSpec::conv2d(j.at("in_channels"), j.at("out_channels"),
                                 j.at("kernel"));
    }
    if (kind == "maxpool2x2") return LayerSpec::maxpool2x2();
    if (kind == "affine") return LayerSpec::affine(j.at("out_units"));
    if (kind == "relu") return LayerSpec::relu();
    if (kind == "sigmoid") return LayerSpec::sigmoid();
    if (kind == "dropout") return LayerSpec::dropout(j.at("rate"));
    throw IngestError("unknown layer kind '" + kind + "' in checkpoint");
}

json pooling_to_json(const PoolingConfig& p) {
    return json{{"kind", pool_kind_name(p.kind)}, {"r", p.r}, {"epsilon", p.epsilon}};
}

PoolingConfig pooling_from_json(const json& j) {
    PoolingConfig p;
    p.kind = pool_kind_from_string(j.at("kind"));
    p.r = j.at("r");
    p.epsilon = j.at("epsilon");
    return p;
}

json augment_to_json(const AugmentConfig& a) {
    json j;
    j["enable_stain"] = a.enable_stain;
    j["enable_dihedral"] = a.enable_dihedral;
    j["enable_blur"] = a.enable_blur;
    j["stain_sigma"] = a.stain_sigma;
    j["blur_radius_max"] = a.blur_radius_max;
    j["stain_h"] = a.stain.rows[0];
    j["stain_e"] = a.stain.rows[1];
    return j;
}

AugmentConfig augment_from_json(const json& j) {
    AugmentConfig a;
    a.enable_stain = j.at("enable_stain");
    a.enable_dihedral = j.at("enable_dihedral");
    a.enable_blur = j.at("enable_blur");
    a.stain_sigma = j.at("stain_sigma");
    a.blur_radius_max = j.at("blur_radius_max");
    const auto h = j.at("stain_h").get<std::array<double, 3>>();
    const auto e = j.at("stain_e").get<std::array<double, 3>>();
    a.stain = StainMatrix::from_rows(h, e);
    return a;
}

json train_to_json(const TrainConfig& t) {
    json j;
    j["optimizer"] = optimizer_name(t.optimizer);
    j["learning_rate"] = t.learning_rate;
    j["momentum"] = t.momentum;
    j["beta1"] = t.beta1;
    j["beta2"] = t.beta2;
    j["adam_epsilon"] = t.adam_epsilon;
    j["weight_decay"] = t.weight_decay;
    j["max_epochs"] = t.max_epochs;
    j["patience"] = t.patience;
    j["batch_bags"] = t.batch_bags;
    j["seed"] = t.seed;
    j["nll_epsilon"] = t.nll_epsilon;
    j["augment_enabled"] = t.augment_enabled;
    j["pooling"] = pooling_to_json(t.pooling);
    j["augment"] = augment_to_json(t.augment);
    return j;
}

TrainConfig train_from_json(const json& j) {
    TrainConfig t;
    t.optimizer = optimizer_from_string(j.at("optimizer"));
    t.learning_rate = j.at("learning_rate");
    t.momentum = j.at("momentum");
    t.beta1 = j.at("beta1");
    t.beta2 = j.at("beta2");
    t.adam_epsilon = j.at("adam_epsilon");
    t.weight_decay = j.at("weight_decay");
    t.max_epochs = j.at("max_epochs");
    t.patience = j.at("patience");
    t.batch_bags = j.at("batch_bags");
    t.seed = j.at("seed");
    t.nll_epsilon = j.at("nll_epsilon");
    t.augment_enabled = j.at("augment_enabled");
    t.pooling = pooling_from_json(j.at("pooling"));
    t.augment = augment_from_json(j.at("augment"));
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof kMagic);
    write_raw<std::uint32_t>(out, ckpt.format_version);

    json blob;
    blob["classifier"] = {
        {"in_channels", ckpt.classifier.in_channels},
        {"in_height", ckpt.classifier.in_height},
        {"in_width", ckpt.classifier.in_width},
    };
    json layers = json::array();
    for (const auto& spec : ckpt.classifier.layers) layers.push_back(layer_to_json(spec));
    blob["classifier"]["layers"] = layers;
    blob["pooling"] = pooling_to_json(ckpt.pooling);
    blob["train"] = train_to_json(ckpt.train_snapshot);
    blob["best_epoch"] = ckpt.best_epoch;
    blob["best_val_loss"] = ckpt.best_val_loss;
    blob["params_version"] = ckpt.params.version;
    write_string(out, blob.dump());

    for (std::size_t i = 0; i < ckpt.params.layers.size(); ++i) {
        const auto& p = ckpt.params.layers[i];
        if (p.weight.numel() > 0) {
            write_tensor(out, "layer" + std::to_string(i) + ".weight", p.weight);
        }
        if (p.bias.numel() > 0) {
            write_tensor(out, "layer" + std::to_string(i) + ".bias", p.bias);
        }
    }
    if (!out) throw IngestError("failed while writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open checkpoint " + path);
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw IngestError(path + " is not a checkpoint (bad magic)");
    }
    Checkpoint ckpt;
    ckpt.format_version = read_raw<std::uint32_t>(in, path);
    if (ckpt.format_version != 1) {
        throw IngestError(path + ": unsupported checkpoint version " +
                          std::to_string(ckpt.format_version));
    }

    json blob;
    try {
        blob = json::parse(read_string(in, path));
        const json& c = blob.at("classifier");
        ckpt.classifier.in_channels = c.at("in_channels");
        ckpt.classifier.in_height = c.at("in_height");
        ckpt.classifier.in_width = c.at("in_width");
        for (const auto& l : c.at("layers")) {
            ckpt.classifier.layers.push_back(layer_from_json(l));
        }
        ckpt.pooling = pooling_from_json(blob.at("pooling"));
        ckpt.train_snapshot = train_from_json(blob.at("train"));
        ckpt.best_epoch = blob.at("best_epoch");
        ckpt.best_val_loss = blob.at("best_val_loss");
        ckpt.params.version = blob.at("params_version");
    } catch (const json::exception& e) {
        throw IngestError(path + ": corrupt config blob: " + e.what());
    }
    ckpt.classifier.validate();

    // parameter tensors, shaped from the classifier config
    std::vector<std::size_t> shape = ckpt.classifier.input_shape();
    for (const auto& spec : ckpt.classifier.layers) {
        ckpt.params.layers.push_back(layer_param_shapes(spec, shape));
        shape = layer_output_shape(spec, shape, -1);
    }
    while (in.peek() != EOF) {
        const std::string name = read_string(in, path);
        const auto rank = read_raw<std::uint32_t>(in, path);
        if (rank > 8) throw IngestError(path + ": corrupt tensor rank");
        std::vector<std::size_t> extents(rank);
        for (auto& e : extents) {
            e = static_cast<std::size_t>(read_raw<std::uint64_t>(in, path));
        }
        const auto dot = name.find('.');
        std::size_t index = std::string::npos;
        if (name.rfind("layer", 0) == 0 && dot != std::string::npos) {
            index = std::stoul(name.substr(5, dot - 5));
        }
        if (index >= ckpt.params.layers.size()) {
            throw IngestError(path + ": unexpected tensor '" + name + "'");
        }
        Tensor& dst = name.substr(dot + 1) == "weight"
                          ? ckpt.params.layers[index].weight
                          : ckpt.params.layers[index].bias;
        if (dst.shape != extents) {
            throw IngestError(path + ": tensor '" + name + "' has shape " +
                              shape_to_string(extents) + ", expected " +
                              shape_to_string(dst.shape));
        }
        in.read(reinterpret_cast<char*>(dst.data.data()),
                static_cast<std::streamsize>(dst.data.size() * sizeof(double)));
        if (!in) throw IngestError("truncated checkpoint " + path);
    }
    ckpt.params.require_finite();
    return ckpt;
}

}  // namespace mil
