#include "mil/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mil/errors.hpp"

namespace fs = std::filesystem;

namespace mil {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    return out;
}

void copy_block(const ImageU8& src, int x0, int y0, int side,
                std::vector<std::uint8_t>& dst) {
    dst.resize(static_cast<std::size_t>(side) * side * 3);
    for (int y = 0; y < side; ++y) {
        const std::uint8_t* s = src.row(y0 + y) + static_cast<std::size_t>(x0) * 3;
        std::copy(s, s + static_cast<std::size_t>(side) * 3,
                  dst.begin() + static_cast<std::size_t>(y) * side * 3);
    }
}

void default_warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// Collects the bags of one image under the given role. Images that meet
// the 768x768 protocol minimum follow the paper pipeline; smaller ones
// are read as pre-cut patch strips (one bag, tiles of side = width).
void append_image_bags(const SlideImage& slide, SplitRole role,
                       const BagBuildOptions& options, std::vector<Bag>& out) {
    const auto warn = options.warn ? options.warn : default_warn;
    const std::string stem = fs::path(slide.source_path).stem().string();

    auto finish_bag = [&](Bag&& bag) {
        std::erase_if(bag.patches, [&](const Patch& p) {
            return !white_filter_keep(p, options.white_threshold);
        });
        if (bag.patches.empty()) {
            warn("bag " + bag.id + " dropped: every patch was white-filtered");
            return;
        }
        out.push_back(std::move(bag));
    };

    if (slide.image.width >= kSubimageSide && slide.image.height >= kSubimageSide) {
        const auto subs = extract_subimages(slide, role);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            Bag bag;
            bag.id = role == SplitRole::Test ? stem : stem + ":s" + std::to_string(i);
            bag.label = slide.label;
            bag.source_path = slide.source_path;
            bag.subimage_x = subs[i].x0;
            bag.subimage_y = subs[i].y0;
            bag.patches = tile_patches(subs[i]);
            finish_bag(std::move(bag));
        }
        return;
    }

    // strip layout: square tiles of side = image width
    const int side = slide.image.width;
    if (side <= 0 || slide.image.height % side != 0) {
        throw IngestError(slide.source_path + ": image is neither a " +
                          std::to_string(kSubimageSide) + "px slide nor a patch strip");
    }
    Bag bag;
    bag.id = stem;
    bag.label = slide.label;
    bag.source_path = slide.source_path;
    bag.patches = tile_patches(slide.image.pixels, slide.image.width,
                               slide.image.height, side);
    finish_bag(std::move(bag));
}

std::vector<Bag> build_bags_for_entries(const std::vector<ManifestEntry>& entries,
                                        SplitRole role,
                                        const BagBuildOptions& options) {
    std::vector<Bag> bags;
    for (const auto& entry : entries) {
        SlideImage slide;
        slide.image = load_image(entry.path);
        slide.source_path = entry.path;
        slide.patient_id = entry.patient_id;
        slide.label = entry.label;
        append_image_bags(slide, role, options, bags);
    }
    return bags;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open manifest " + path);
    const fs::path base = fs::path(path).parent_path();
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty manifest " + path);
    if (split_csv_row(line) != std::vector<std::string>{"path", "label", "patient_id"}) {
        throw IngestError(path + ": expected header path,label,patient_id");
    }
    std::vector<ManifestEntry> entries;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_row(line);
        if (fields.size() != 3) {
            throw IngestError(path + ":" + std::to_string(row) + ": expected 3 fields");
        }
        ManifestEntry e;
        fs::path p(fields[0]);
        e.path = p.is_absolute() ? p.string() : (base / p).string();
        if (fields[1] == "0") e.label = 0;
        else if (fields[1] == "1") e.label = 1;
        else {
            throw IngestError(path + ":" + std::to_string(row) + ": label '" +
                              fields[1] + "' not in {0,1}");
        }
        e.patient_id = fields[2];
        if (e.patient_id.empty()) {
            throw IngestError(path + ":" + std::to_string(row) + ": empty patient_id");
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw IngestError(path + ": no data rows");
    return entries;
}

void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write " + path);
    out << "path,label,patient_id\n";
    for (const auto& e : entries) {
        out << e.path << "," << e.label << "," << e.patient_id << "\n";
    }
}

std::vector<Subimage> extract_subimages(const SlideImage& slide, SplitRole role) {
    const int w = slide.image.width;
    const int h = slide.image.height;
    if (w < kSubimageSide || h < kSubimageSide) {
        throw IngestError(slide.source_path + ": " + std::to_string(w) + "x" +
                          std::to_string(h) + " is smaller than the required " +
                          std::to_string(kSubimageSide) + "x" +
                          std::to_string(kSubimageSide));
    }
    std::vector<Subimage> subs;
    if (role == SplitRole::Test) {
        Subimage s;
        s.x0 = (w - kSubimageSide) / 2;
        s.y0 = (h - kSubimageSide) / 2;
        copy_block(slide.image, s.x0, s.y0, kSubimageSide, s.rgb);
        subs.push_back(std::move(s));
        return subs;
    }
    // Slide along the longer axis, offsets round(i * slack / 7); the
    // other axis stays centered. A square image degenerates to 8 copies.
    const bool slide_x = w >= h;
    const int slack = (slide_x ? w : h) - kSubimageSide;
    const int fixed = ((slide_x ? h : w) - kSubimageSide) / 2;
    for (int i = 0; i < kTrainSubimages; ++i) {
        const int off = static_cast<int>(std::llround(
            static_cast<double>(i) * slack / (kTrainSubimages - 1)));
        Subimage s;
        s.x0 = slide_x ? off : fixed;
        s.y0 = slide_x ? fixed : off;
        copy_block(slide.image, s.x0, s.y0, kSubimageSide, s.rgb);
        subs.push_back(std::move(s));
    }
    return subs;
}

std::vector<Patch> tile_patches(const std::vector<std::uint8_t>& rgb, int width,
                                int height, int side) {
    if (side <= 0 || width % side != 0 || height % side != 0) {
        throw InternalError("tile_patches: " + std::to_string(width) + "x" +
                            std::to_string(height) + " not divisible by tile side " +
                            std::to_string(side));
    }
    const int grid_w = width / side;
    const int grid_h = height / side;
    std::vector<Patch> patches;
    patches.reserve(static_cast<std::size_t>(grid_w) * grid_h);
    for (int gy = 0; gy < grid_h; ++gy) {
        for (int gx = 0; gx < grid_w; ++gx) {
            Patch p;
            p.side = side;
            p.grid_row = gy;
            p.grid_col = gx;
            p.rgb.resize(static_cast<std::size_t>(side) * side * 3);
            for (int y = 0; y < side; ++y) {
                const std::uint8_t* src =
                    rgb.data() +
                    (static_cast<std::size_t>(gy) * side + y) * width * 3 +
                    static_cast<std::size_t>(gx) * side * 3;
                std::copy(src, src + static_cast<std::size_t>(side) * 3,
                          p.rgb.begin() + static_cast<std::size_t>(y) * side * 3);
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

std::vector<Patch> tile_patches(const Subimage& sub) {
    return tile_patches(sub.rgb, sub.side, sub.side, kPatchSide);
}

bool white_filter_keep(const Patch& patch, int white_threshold) {
    const std::size_t total = static_cast<std::size_t>(patch.side) * patch.side;
    std::size_t white = 0;
    for (std::size_t i = 0; i < total; ++i) {
        const std::uint8_t* px = patch.rgb.data() + i * 3;
        if (px[0] >= white_threshold && px[1] >= white_threshold &&
            px[2] >= white_threshold) {
            ++white;
        }
    }
    // discard iff strictly more than 75% white
    return 4 * white <= 3 * total;
}

FoldPlan make_folds(const std::vector<ManifestEntry>& entries, int k,
                    double validation_fraction, Rng rng) {
    if (k < 2) throw ConfigError("fold count must be >= 2, got " + std::to_string(k));
    if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
        throw ConfigError("validation fraction must be in [0, 1)");
    }

    // patient -> label, in first-appearance order
    std::vector<std::string> order;
    std::map<std::string, int> label_of;
    for (const auto& e : entries) {
        auto [it, inserted] = label_of.emplace(e.patient_id, e.label);
        if (inserted) order.push_back(e.patient_id);
        else if (it->second != e.label) {
            throw IngestError("patient " + e.patient_id + " has conflicting labels");
        }
    }

    FoldPlan plan;
    plan.k = k;
    plan.validation.resize(k);

    for (int label = 0; label <= 1; ++label) {
        std::vector<std::string> group;
        for (const auto& id : order) {
            if (label_of[id] == label) group.push_back(id);
        }
        if (static_cast<int>(group.size()) < k) {
            throw ConfigError("class " + std::to_string(label) + " has " +
                              std::to_string(group.size()) + " patients, fewer than " +
                              std::to_string(k) + " folds");
        }
        // Fisher-Yates with the shared stream, then round-robin dealing
        // keeps per-class fold sizes within one of each other.
        Rng stream = rng.fork(label == 0 ? "folds/neg" : "folds/pos");
        for (std::size_t i = group.size(); i > 1; --i) {
            std::swap(group[i - 1], group[stream.uniform_int(i)]);
        }
        for (std::size_t i = 0; i < group.size(); ++i) {
            plan.assignment[group[i]] = static_cast<int>(i % k);
        }
        // per fold, reserve validation patients from this class's
        // training patients (those not assigned to the fold)
        for (int f = 0; f < k; ++f) {
            std::vector<std::string> train_ids;
            for (const auto& id : group) {
                if (plan.assignment[id] != f) train_ids.push_back(id);
            }
            if (train_ids.size() < 2) continue;  // cannot spare one
            std::size_t want = static_cast<std::size_t>(std::ceil(
                validation_fraction * static_cast<double>(train_ids.size())));
            if (validation_fraction > 0.0 && want == 0) want = 1;
            want = std::min(want, train_ids.size() - 1);
            Rng pick = rng.fork("folds/val").fork(static_cast<std::uint64_t>(f) * 2 +
                                                  static_cast<std::uint64_t>(label));
            for (std::size_t i = train_ids.size(); i > 1; --i) {
                std::swap(train_ids[i - 1], train_ids[pick.uniform_int(i)]);
            }
            for (std::size_t i = 0; i < want; ++i) {
                plan.validation[f].push_back(train_ids[i]);
            }
        }
    }
    for (auto& v : plan.validation) std::sort(v.begin(), v.end());
    return plan;
}

std::vector<Bag> build_bags(const std::vector<ManifestEntry>& entries,
                            const FoldPlan& plan, int fold_index, SplitRole role,
                            const BagBuildOptions& options) {
    if (fold_index < 0 || fold_index >= plan.k) {
        throw ConfigError("fold index " + std::to_string(fold_index) +
                          " out of range for k=" + std::to_string(plan.k));
    }
    const auto& val_ids = plan.validation[fold_index];
    auto in_validation = [&](const std::string& id) {
        return std::binary_search(val_ids.begin(), val_ids.end(), id);
    };

    std::vector<ManifestEntry> selected;
    for (const auto& e : entries) {
        const auto it = plan.assignment.find(e.patient_id);
        if (it == plan.assignment.end()) {
            throw ConfigError("patient " + e.patient_id + " missing from fold plan");
        }
        const bool is_test = it->second == fold_index;
        const bool is_val = !is_test && in_validation(e.patient_id);
        if ((role == SplitRole::Test && is_test) ||
            (role == SplitRole::Val && is_val) ||
            (role == SplitRole::Train && !is_test && !is_val)) {
            selected.push_back(e);
        }
    }
    return build_bags_for_entries(selected, role, options);
}

std::vector<Bag> build_bags_all(const std::vector<ManifestEntry>& entries,
                                SplitRole role, const BagBuildOptions& options) {
    return build_bags_for_entries(entries, role, options);
}

void SynthConfig::validate() const {
    if (num_bags < 2 || num_bags % 2 != 0) {
        throw ConfigError("synthetic bag count must be even and >= 2 to balance "
                          "classes, got " + std::to_string(num_bags));
    }
    if (k_min < 1) throw ConfigError("k-min must be >= 1");
    if (k_max < k_min) throw ConfigError("k-max must be >= k-min");
    if (!(witness_rate > 0.0 && witness_rate < 1.0)) {
        throw ConfigError("witness rate must be in (0, 1)");
    }
    if (patch_size < 3) throw ConfigError("patch size must be >= 3");
}

SynthDataset synth_bags(const SynthConfig& config) {
    config.validate();
    Rng root = Rng(config.seed).fork("synth");

    SynthDataset ds;
    ds.bags.reserve(config.num_bags);
    ds.witness_flags.reserve(config.num_bags);

    const int side = config.patch_size;
    const int sq = side / 3;
    const int sq0 = (side - sq) / 2;

    auto noise_patch = [&](Rng& rng) {
        Patch p;
        p.side = side;
        p.rgb.resize(static_cast<std::size_t>(side) * side * 3);
        for (auto& b : p.rgb) {
            const double v = rng.gaussian(120.0, 30.0);
            b = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
        return p;
    };
    auto paint_witness = [&](Patch& p, Rng& rng) {
        // bright centered square, 1/3 of the patch side
        for (int y = sq0; y < sq0 + sq; ++y) {
            for (int x = sq0; x < sq0 + sq; ++x) {
                std::uint8_t* px = p.rgb.data() +
                                   (static_cast<std::size_t>(y) * side + x) * 3;
                for (int c = 0; c < 3; ++c) {
                    const double v = rng.gaussian(225.0, 8.0);
                    px[c] = static_cast<std::uint8_t>(std::clamp(v, 190.0, 255.0));
                }
            }
        }
    };

    for (int i = 0; i < config.num_bags; ++i) {
        const int label = i < config.num_bags / 2 ? 1 : 0;  // exactly balanced
        Rng bag_rng = root.fork(static_cast<std::uint64_t>(i));
        const int k = config.k_min +
                      static_cast<int>(bag_rng.fork("K").uniform_int(
                          static_cast<std::uint64_t>(config.k_max - config.k_min + 1)));

        std::vector<int> witness(k, 0);
        if (label == 1) {
            Rng wit_rng = bag_rng.fork("witness");
            for (int j = 0; j < k; ++j) {
                witness[j] = wit_rng.uniform() < config.witness_rate ? 1 : 0;
            }
            if (std::count(witness.begin(), witness.end(), 1) == 0) {
                witness[static_cast<std::size_t>(
                    wit_rng.uniform_int(static_cast<std::uint64_t>(k)))] = 1;
            }
        }

        Bag bag;
        char buf[16];
        std::snprintf(buf, sizeof buf, "bag_%04d", i);
        bag.id = buf;
        bag.label = label;
        for (int j = 0; j < k; ++j) {
            Rng patch_rng = bag_rng.fork("patch").fork(static_cast<std::uint64_t>(j));
            Patch p = noise_patch(patch_rng);
            if (witness[j]) paint_witness(p, patch_rng);
            p.grid_row = j;
            p.grid_col = 0;
            bag.patches.push_back(std::move(p));
        }
        ds.bags.push_back(std::move(bag));
        ds.witness_flags.push_back(std::move(witness));
    }
    return ds;
}

void save_synth_dataset(const std::string& dir, const SynthDataset& dataset) {
    fs::create_directories(dir);
    std::vector<ManifestEntry> entries;
    std::ofstream wit(fs::path(dir) / "witness.csv");
    if (!wit) throw IngestError("cannot write witness.csv in " + dir);
    wit << "bag_id,patch_index,witness\n";

    for (std::size_t i = 0; i < dataset.bags.size(); ++i) {
        const Bag& bag = dataset.bags[i];
        const int side = bag.patches.front().side;
        ImageU8 strip;
        strip.width = side;
        strip.height = side * static_cast<int>(bag.patches.size());
        strip.pixels.resize(static_cast<std::size_t>(strip.width) * strip.height * 3);
        for (std::size_t j = 0; j < bag.patches.size(); ++j) {
            std::copy(bag.patches[j].rgb.begin(), bag.patches[j].rgb.end(),
                      strip.pixels.begin() +
                          j * bag.patches[j].rgb.size());
        }
        const std::string file = bag.id + ".png";
        save_png_rgb((fs::path(dir) / file).string(), strip);
        entries.push_back({file, bag.label, bag.id});
        for (std::size_t j = 0; j < bag.patches.size(); ++j) {
            wit << bag.id << "," << j << "," << dataset.witness_flags[i][j] << "\n";
        }
    }
    save_manifest((fs::path(dir) / "manifest.csv").string(), entries);
}

}  // namespace mil
