#ifndef MIL_AUGMENT_HPP
#define MIL_AUGMENT_HPP

#include <array>
#include <vector>

#include "mil/data.hpp"
#include "mil/rng.hpp"

namespace mil {

// Optical-density stain basis: rows are unit H, E and residual vectors
// in OD-RGB space. The residual completes the basis so projection is an
// exact (invertible) change of coordinates.
struct StainMatrix {
    std::array<std::array<double, 3>, 3> rows{};     // H, E, residual
    std::array<std::array<double, 3>, 3> inverse{};

    // Rows are normalized; the inverse and its conditioning are checked
    // here (condition number must stay below 1e4).
    static StainMatrix from_rows(const std::array<double, 3>& h,
                                 const std::array<double, 3>& e);
    static StainMatrix hematoxylin_eosin();  // standard published vectors
};

struct AugmentConfig {
    bool enable_stain = true;
    bool enable_dihedral = true;
    bool enable_blur = true;
    double stain_sigma = 0.1;      // std-dev of the H/E scale factors
    double blur_radius_max = 2.0;  // px
    StainMatrix stain = StainMatrix::hematoxylin_eosin();

    void validate() const;  // throws ConfigError
};

// Beer-Lambert conversion: OD_c = -log10((I_c + 1) / 256) per channel;
// the inverse rounds back to 8-bit with clamping.
std::vector<double> rgb_to_od(const std::vector<std::uint8_t>& rgb);
std::vector<std::uint8_t> od_to_rgb(const std::vector<double>& od);
double channel_to_od(std::uint8_t value);
std::uint8_t od_to_channel(double od);

// Scales the H and E coordinate planes by two i.i.d. factors drawn once
// per patch from Normal(1, stain_sigma^2), clamped to [0.2, 1.8]; the
// residual coordinate is left alone.
Patch stain_jitter(const Patch& patch, const AugmentConfig& config, Rng& rng);

// The 8 symmetries of the square: element / 4 selects an optional
// horizontal mirror (applied first), element % 4 counts clockwise
// 90-degree rotations.
Patch dihedral_apply(const Patch& patch, int element);
int dihedral_inverse(int element);
Patch dihedral(const Patch& patch, Rng& rng);  // uniform over the 8

// Separable Gaussian with sigma = radius, half-width ceil(3 sigma),
// clamp-to-edge borders; radius below 0.05 is the identity.
Patch gaussian_blur(const Patch& patch, double radius);

// stain -> dihedral -> blur, in that order (the order is part of the
// contract since the transforms only approximately commute). The rng
// stream should be keyed by (epoch, bag, patch) by the caller.
Patch augment_pipeline(const Patch& patch, const AugmentConfig& config, Rng rng);

}  // namespace mil

#endif
