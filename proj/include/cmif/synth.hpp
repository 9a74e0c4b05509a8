#pragma once

// Synthetic multimodal image pairs with known rigid ground truth.

#include <cmif/align.hpp>
#include <cmif/core.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmif::synth {

enum class Modality { identity, gamma_remap, inversion, channel_mix };

inline Modality parse_modality(const std::string& s) {
    if (s == "identity") return Modality::identity;
    if (s == "gamma-remap") return Modality::gamma_remap;
    if (s == "inversion") return Modality::inversion;
    if (s == "channel-mix") return Modality::channel_mix;
    throw std::invalid_argument("unknown modality '" + s + "'");
}

inline const char* to_string(Modality m) {
    switch (m) {
        case Modality::identity: return "identity";
        case Modality::gamma_remap: return "gamma-remap";
        case Modality::inversion: return "inversion";
        case Modality::channel_mix: return "channel-mix";
    }
    return "?";
}

// Continuous random scene: smooth blobs plus sharp-edged discs and bars,
// evaluated analytically so any rigid resampling is exact.
class Scene {
public:
    Scene(std::uint64_t seed, double extent) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> pos(-extent, 2.0 * extent);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const int blobs = 60;
        for (int i = 0; i < blobs; ++i) {
            blobs_.push_back({{pos(rng), pos(rng)}, extent * (0.03 + 0.12 * unit(rng)), unit(rng) * 2.0 - 1.0});
        }
        const int discs = 40;
        for (int i = 0; i < discs; ++i) {
            discs_.push_back({{pos(rng), pos(rng)}, extent * (0.02 + 0.08 * unit(rng)), unit(rng) - 0.5});
        }
        for (int i = 0; i < 12; ++i) {
            const double a = unit(rng) * std::numbers::pi;
            bars_.push_back({{pos(rng), pos(rng)}, {std::cos(a), std::sin(a)}, extent * (0.01 + 0.03 * unit(rng)),
                             extent * (0.1 + 0.3 * unit(rng)), unit(rng) - 0.5});
        }
    }

    double operator()(Vec2 p) const {
        double v = 0.0;
        for (const auto& b : blobs_) {
            const Vec2 d = p - b.center;
            v += b.amplitude * std::exp(-(d.x * d.x + d.y * d.y) / (2.0 * b.sigma * b.sigma));
        }
        for (const auto& d : discs_) {
            if ((p - d.center).norm() <= d.radius) v += d.amplitude;
        }
        for (const auto& b : bars_) {
            const Vec2 d = p - b.center;
            const double along = d.x * b.dir.x + d.y * b.dir.y;
            const double across = -d.x * b.dir.y + d.y * b.dir.x;
            if (std::abs(along) <= b.half_length && std::abs(across) <= b.half_width) v += b.amplitude;
        }
        // Squash to (0, 1).
        return 1.0 / (1.0 + std::exp(-1.5 * v));
    }

private:
    struct Blob {
        Vec2 center;
        double sigma;
        double amplitude;
    };
    struct Disc {
        Vec2 center;
        double radius;
        double amplitude;
    };
    struct Bar {
        Vec2 center;
        Vec2 dir;
        double half_width;
        double half_length;
        double amplitude;
    };
    std::vector<Blob> blobs_;
    std::vector<Disc> discs_;
    std::vector<Bar> bars_;
};

struct PairSpec {
    GridShape shape{256, 256};
    Modality modality = Modality::gamma_remap;
    double label_noise = 0.05;    // fraction of floating pixels replaced by uniform noise
    double max_shift_frac = 0.1;  // translation bound as a fraction of the width
    double angle_range = std::numbers::pi;  // rotation drawn from [-range, range)
    // Fixed ground truth instead of random draws.
    std::optional<double> angle;
    std::optional<Vec2> translation;
};

struct SyntheticPair {
    IntensityImage reference;
    IntensityImage floating;
    // Maps floating coordinates into reference coordinates.
    RigidTransform truth;
};

inline double remap(Modality m, double v) {
    switch (m) {
        case Modality::identity: return v;
        case Modality::gamma_remap: return std::pow(1.0 - v, 2.5);
        case Modality::inversion: return 1.0 - v;
        case Modality::channel_mix: return v;
    }
    return v;
}

inline SyntheticPair make_pair(const PairSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Scene scene(rng(), std::max(spec.shape.height, spec.shape.width));
    double angle = (2.0 * unit(rng) - 1.0) * spec.angle_range;
    const double shift = spec.max_shift_frac * spec.shape.width;
    Vec2 t{(2.0 * unit(rng) - 1.0) * shift, (2.0 * unit(rng) - 1.0) * shift};
    if (spec.angle) angle = *spec.angle;
    if (spec.translation) t = *spec.translation;
    const RigidTransform truth{angle, t, grid_center(spec.shape)};

    const std::size_t n = spec.shape.size();
    std::vector<double> ref(n);
    for (int r = 0; r < spec.shape.height; ++r) {
        for (int c = 0; c < spec.shape.width; ++c) ref[static_cast<std::size_t>(r * spec.shape.width + c)] = scene({double(c), double(r)});
    }
    const int channels = spec.modality == Modality::channel_mix ? 3 : 1;
    std::vector<double> flt(n * static_cast<std::size_t>(channels));
    for (int r = 0; r < spec.shape.height; ++r) {
        for (int c = 0; c < spec.shape.width; ++c) {
            double v = scene(truth({double(c), double(r)}));
            const bool noisy = unit(rng) < spec.label_noise;
            if (noisy) v = unit(rng);
            const std::size_t i = static_cast<std::size_t>(r * spec.shape.width + c);
            if (channels == 1) {
                flt[i] = remap(spec.modality, v);
            } else {
                flt[i * 3 + 0] = v * v;
                flt[i * 3 + 1] = 1.0 - v;
                flt[i * 3 + 2] = std::sin(std::numbers::pi * v);
            }
        }
    }
    return {IntensityImage(spec.shape, 1, std::move(ref)), IntensityImage(spec.shape, channels, std::move(flt)),
            truth};
}

struct TrialRecord {
    std::uint64_t seed = 0;
    RigidTransform truth;
    AlignmentResult estimate;
    double corner_error = 0.0;
    bool success = false;
    double seconds = 0.0;
};

// Generates one pair, aligns it with circular masks, and scores the estimate.
inline TrialRecord run_trial(const PairSpec& spec, const AlignmentConfig& config, std::uint64_t seed) {
    const auto pair = make_pair(spec, seed);
    const Mask ma = make_circular_mask(spec.shape);
    const Mask mb = make_circular_mask(spec.shape);
    const auto start = std::chrono::steady_clock::now();
    AlignmentConfig cfg = config;
    cfg.seed = config.seed ^ seed;
    TrialRecord rec;
    rec.seed = seed;
    rec.truth = pair.truth;
    rec.estimate = rigid_align(pair.reference, ma, pair.floating, mb, cfg);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.corner_error = corner_error(pair.truth, rec.estimate.transform, spec.shape);
    rec.success = alignment_succeeded(rec.corner_error, spec.shape);
    return rec;
}

}  // namespace cmif::synth
