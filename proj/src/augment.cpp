#include "mil/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mil/errors.hpp"

namespace mil {

namespace {

std::array<double, 3> normalized(const std::array<double, 3>& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n <= 0.0) throw ConfigError("stain vector must be nonzero");
    // keep already-unit vectors bit-stable so checkpoint round trips are
    // lossless
    if (std::abs(n - 1.0) <= 1e-12) return v;
    return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

StainMatrix StainMatrix::from_rows(const std::array<double, 3>& h,
                                   const std::array<double, 3>& e) {
    StainMatrix m;
    m.rows[0] = normalized(h);
    m.rows[1] = normalized(e);
    // residual completes the basis
    const auto& a = m.rows[0];
    const auto& b = m.rows[1];
    m.rows[2] = normalized({a[1] * b[2] - a[2] * b[1],
                            a[2] * b[0] - a[0] * b[2],
                            a[0] * b[1] - a[1] * b[0]});

    Eigen::Matrix3d mat;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) mat(i, j) = m.rows[i][j];
    }
    if (std::abs(mat.determinant()) < 1e-12) {
        throw ConfigError("stain matrix is singular (H and E parallel)");
    }
    const Eigen::Matrix3d inv = mat.inverse();
    // Frobenius-norm condition estimate; bounds the 2-norm condition
    // within a factor of 3 for a 3x3 matrix.
    const double cond = mat.norm() * inv.norm();
    if (!std::isfinite(cond) || cond >= 1e4) {
        throw ConfigError("stain matrix is ill-conditioned (H and E nearly "
                          "parallel)");
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m.inverse[i][j] = inv(i, j);
    }
    return m;
}

StainMatrix StainMatrix::hematoxylin_eosin() {
    return from_rows({0.65, 0.70, 0.29}, {0.07, 0.99, 0.11});
}

void AugmentConfig::validate() const {
    if (stain_sigma < 0.0) throw ConfigError("stain_sigma must be >= 0");
    if (blur_radius_max < 0.0) throw ConfigError("blur_radius_max must be >= 0");
}

double channel_to_od(std::uint8_t value) {
    return -std::log10((static_cast<double>(value) + 1.0) / 256.0);
}

std::uint8_t od_to_channel(double od) {
    const double v = std::llround(256.0 * std::pow(10.0, -od) - 1.0);
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

std::vector<double> rgb_to_od(const std::vector<std::uint8_t>& rgb) {
    std::vector<double> od(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) od[i] = channel_to_od(rgb[i]);
    return od;
}

std::vector<std::uint8_t> od_to_rgb(const std::vector<double>& od) {
    std::vector<std::uint8_t> rgb(od.size());
    for (std::size_t i = 0; i < od.size(); ++i) rgb[i] = od_to_channel(od[i]);
    return rgb;
}

Patch stain_jitter(const Patch& patch, const AugmentConfig& config, Rng& rng) {
    config.validate();
    // one factor pair per patch keeps tissue texture coherent
    const double g_h = std::clamp(rng.gaussian(1.0, config.stain_sigma), 0.2, 1.8);
    const double g_e = std::clamp(rng.gaussian(1.0, config.stain_sigma), 0.2, 1.8);

    const auto& inv = config.stain.inverse;
    const auto& m = config.stain.rows;
    Patch out = patch;
    const std::size_t n_px = patch.rgb.size() / 3;
    for (std::size_t i = 0; i < n_px; ++i) {
        double od[3];
        for (int c = 0; c < 3; ++c) od[c] = channel_to_od(patch.rgb[i * 3 + c]);
        // coords = od . M^-1  (row-vector convention: od = coords . M)
        double coord[3];
        for (int j = 0; j < 3; ++j) {
            coord[j] = od[0] * inv[0][j] + od[1] * inv[1][j] + od[2] * inv[2][j];
        }
        coord[0] *= g_h;
        coord[1] *= g_e;
        for (int c = 0; c < 3; ++c) {
            const double v =
                coord[0] * m[0][c] + coord[1] * m[1][c] + coord[2] * m[2][c];
            out.rgb[i * 3 + c] = od_to_channel(v);
        }
    }
    return out;
}

Patch dihedral_apply(const Patch& patch, int element) {
    if (patch.rgb.size() != static_cast<std::size_t>(patch.side) * patch.side * 3) {
        throw DomainError("dihedral transform requires a square patch");
    }
    if (element < 0 || element > 7) {
        throw DomainError("dihedral element must be in 0..7");
    }
    const int n = patch.side;
    const bool mirror = element >= 4;
    const int rot = element % 4;
    Patch out = patch;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            int sx = x, sy = y;
            // invert the rotation to find the source pixel
            for (int r = 0; r < rot; ++r) {
                // 90 degrees clockwise: dest(x, y) <- src(y, n-1-x)
                const int tx = sy;
                const int ty = n - 1 - sx;
                sx = tx;
                sy = ty;
            }
            if (mirror) sx = n - 1 - sx;
            const std::uint8_t* src =
                patch.rgb.data() + (static_cast<std::size_t>(sy) * n + sx) * 3;
            std::uint8_t* dst =
                out.rgb.data() + (static_cast<std::size_t>(y) * n + x) * 3;
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
        }
    }
    return out;
}

int dihedral_inverse(int element) {
    if (element < 0 || element > 7) {
        throw DomainError("dihedral element must be in 0..7");
    }
    if (element < 4) return (4 - element) % 4;
    return element;  // mirrored elements are involutions
}

Patch dihedral(const Patch& patch, Rng& rng) {
    return dihedral_apply(patch, static_cast<int>(rng.uniform_int(8)));
}

Patch gaussian_blur(const Patch& patch, double radius) {
    if (radius < 0.0) throw DomainError("blur radius must be >= 0");
    if (radius < 0.05) return patch;

    const double sigma = radius;
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * half + 1);
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        kernel[i + half] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += kernel[i + half];
    }
    for (double& k : kernel) k /= sum;

    const int n = patch.side;
    auto clamp_idx = [n](int i) { return std::clamp(i, 0, n - 1); };

    // horizontal pass into doubles, vertical pass back to bytes
    std::vector<double> tmp(patch.rgb.size());
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    const int sx = clamp_idx(x + i);
                    acc += kernel[i + half] *
                           patch.rgb[(static_cast<std::size_t>(y) * n + sx) * 3 + c];
                }
                tmp[(static_cast<std::size_t>(y) * n + x) * 3 + c] = acc;
            }
        }
    }
    Patch out = patch;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    const int sy = clamp_idx(y + i);
                    acc += kernel[i + half] *
                           tmp[(static_cast<std::size_t>(sy) * n + x) * 3 + c];
                }
                out.rgb[(static_cast<std::size_t>(y) * n + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(std::llround(acc), 0LL, 255LL));
            }
        }
    }
    return out;
}

Patch augment_pipeline(const Patch& patch, const AugmentConfig& config, Rng rng) {
    config.validate();
    Patch out = patch;
    if (config.enable_stain) {
        Rng stream = rng.fork("stain");
        out = stain_jitter(out, config, stream);
    }
    if (config.enable_dihedral) {
        Rng stream = rng.fork("dihedral");
        out = dihedral(out, stream);
    }
    if (config.enable_blur) {
        Rng stream = rng.fork("blur");
        out = gaussian_blur(out, stream.uniform(0.0, config.blur_radius_max));
    }
    return out;
}

}  // namespace mil
