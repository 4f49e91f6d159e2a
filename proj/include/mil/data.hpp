#ifndef MIL_DATA_HPP
#define MIL_DATA_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mil/image.hpp"
#include "mil/rng.hpp"

namespace mil {

// Slide-protocol constants: 768x768 subimages tiled into 96x96 patches.
inline constexpr int kSubimageSide = 768;
inline constexpr int kPatchSide = 96;
inline constexpr int kTrainSubimages = 8;

// One instance: a square RGB pixel block plus its grid position within
// the subimage it was cut from.
struct Patch {
    int side = kPatchSide;
    std::vector<std::uint8_t> rgb;  // side * side * 3, interleaved
    int grid_row = 0;
    int grid_col = 0;
};

// Variable-size collection of patches with a single binary label.
struct Bag {
    std::string id;
    int label = 0;  // y in {0, 1}
    std::vector<Patch> patches;
    std::string source_path;
    int subimage_x = 0;
    int subimage_y = 0;
};

struct ManifestEntry {
    std::string path;
    int label = 0;
    std::string patient_id;
};

struct SlideImage {
    ImageU8 image;
    std::string source_path;
    std::string patient_id;
    int label = 0;
};

struct Subimage {
    int x0 = 0;
    int y0 = 0;
    int side = kSubimageSide;
    std::vector<std::uint8_t> rgb;  // side * side * 3
};

// Patient-level fold assignment, label-stratified, with per-fold
// validation patients reserved out of the training patients.
struct FoldPlan {
    int k = 0;
    std::map<std::string, int> assignment;               // patient -> fold
    std::vector<std::vector<std::string>> validation;    // per fold
};

enum class SplitRole { Train, Val, Test };

// Header `path,label,patient_id`; relative paths are resolved against
// the manifest's directory. Throws IngestError on malformed rows.
std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries);

// Train mode: eight 768x768 subimages sliding along the longer axis at
// offsets round(i * slack / 7); the other axis is centered. Test mode:
// the single centered subimage. Throws IngestError for undersized input.
std::vector<Subimage> extract_subimages(const SlideImage& slide, SplitRole role);

// Non-overlapping row-major tiling into side x side patches; `side` must
// divide both dimensions.
std::vector<Patch> tile_patches(const std::vector<std::uint8_t>& rgb, int width,
                                int height, int side);
std::vector<Patch> tile_patches(const Subimage& sub);

// A pixel is white iff all three channels >= white_threshold; the patch
// is discarded iff strictly more than 75% of its pixels are white.
bool white_filter_keep(const Patch& patch, int white_threshold = 240);

// Patient-level, label-stratified k-fold plan; per fold,
// ceil(validation_fraction * n) training patients per class are reserved
// for validation when the class can spare one. Deterministic given rng.
FoldPlan make_folds(const std::vector<ManifestEntry>& entries, int k,
                    double validation_fraction, Rng rng);

struct BagBuildOptions {
    int white_threshold = 240;
    // receives one message per dropped (fully filtered) subimage bag
    std::function<void(const std::string&)> warn;
};

// Assembles the bags for one fold and role. Images >= 768x768 follow the
// slide protocol (8 overlapping train subimages -> 8 bags, or the single
// centered test subimage -> 1 bag). Smaller images are treated as patch
// strips: the whole image is one bag tiled at side = image width. Bags
// whose every patch is white-filtered are dropped with a warning.
std::vector<Bag> build_bags(const std::vector<ManifestEntry>& entries,
                            const FoldPlan& plan, int fold_index,
                            SplitRole role, const BagBuildOptions& options = {});

// Loads the bags of the listed entries without any fold logic (all
// entries, given role). Used by the train/eval subcommands.
std::vector<Bag> build_bags_all(const std::vector<ManifestEntry>& entries,
                                SplitRole role,
                                const BagBuildOptions& options = {});

struct SynthConfig {
    int num_bags = 400;
    int k_min = 5;
    int k_max = 15;
    double witness_rate = 0.1;
    int patch_size = 32;
    std::uint64_t seed = 7;

    void validate() const;  // throws ConfigError
};

struct SynthDataset {
    std::vector<Bag> bags;
    // witness_flags[i][k] mirrors bags[i].patches[k]; diagnostics only,
    // never visible to training.
    std::vector<std::vector<int>> witness_flags;
};

// Balanced synthetic witness task: negative patches are clipped Gaussian
// noise, witnesses carry a bright centered square of 1/3 patch size; a
// bag is positive iff it holds at least one witness.
SynthDataset synth_bags(const SynthConfig& config);

// Serializes a synthetic dataset as one PNG strip per bag (width =
// patch_size, height = K * patch_size) plus manifest.csv + witness.csv.
void save_synth_dataset(const std::string& dir, const SynthDataset& dataset);

}  // namespace mil

#endif
