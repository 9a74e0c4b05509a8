#pragma once

// Global rigid alignment by MI maximization: for every candidate transform,
// warp the floating image, compute the full CMIF map, and keep the best
// overlap-gated displacement.

#include <cmif/cmif.hpp>
#include <cmif/core.hpp>
#include <cmif/error.hpp>
#include <cmif/quantize.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace cmif {

struct AlignmentConfig {
    double gamma = 0.5;
    int angle_count = 200;
    int refinement_count = 32;
    // k, batch size and iteration count of the quantizer; kmeans.seed is ignored
    // in favour of `seed`.
    KMeansParams kmeans{16, 1000, 25, 0};
    std::uint64_t seed = 0;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("alignment: gamma must lie in [0, 1]");
        if (angle_count < 1) throw std::invalid_argument("alignment: angle_count must be >= 1");
        if (refinement_count < 0) throw std::invalid_argument("alignment: refinement_count must be >= 0");
        if (kmeans.k < 2) throw std::invalid_argument("alignment: k must be >= 2");
    }
};

enum class AlignmentStage { grid, refined };

inline const char* to_string(AlignmentStage s) { return s == AlignmentStage::grid ? "grid" : "refined"; }

struct AlignmentResult {
    // Maps floating-image coordinates into reference-image coordinates.
    RigidTransform transform;
    double mi = 0.0;
    double angle = 0.0;
    // Shift of the warped floating content relative to the reference, in
    // original (unpadded) pixels: transform(p) = T(p) - displacement.
    Offset displacement{};
    std::uint32_t n_at_opt = 0;
    AlignmentStage stage = AlignmentStage::grid;
    // Index into the transform set that produced the result.
    std::size_t transform_index = 0;
};

struct PaddedReference {
    LabelImage labels;
    Mask mask;
    Offset pad{};
};

inline int pad_amount(int floating_size, double gamma) {
    // The epsilon keeps e.g. 300 * 0.3 = 90.000000000000014 from rounding up.
    return static_cast<int>(std::ceil(static_cast<double>(floating_size) * (1.0 - gamma) - 1e-9));
}

// Pads the reference symmetrically by ceil(size_B * (1 - gamma)) per axis.
// Padded cells are masked out and carry LabelImage::kPadLabel.
inline PaddedReference zero_pad(const LabelImage& a, const Mask& ma, GridShape floating, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("zero_pad: gamma must lie in [0, 1]");
    if (a.shape() != ma.shape()) throw std::invalid_argument("zero_pad: mask shape mismatch");
    require_valid(floating, "zero_pad floating shape");
    const Offset pad{pad_amount(floating.height, gamma), pad_amount(floating.width, gamma)};
    const GridShape s{a.shape().height + 2 * pad.row, a.shape().width + 2 * pad.col};
    Grid<Label> labels(s, LabelImage::kPadLabel);
    Mask mask(s, false);
    for (int r = 0; r < a.shape().height; ++r) {
        for (int c = 0; c < a.shape().width; ++c) {
            labels(r + pad.row, c + pad.col) = a(r, c);
            mask.set(r + pad.row, c + pad.col, ma(r, c));
        }
    }
    return {LabelImage(std::move(labels), a.k()), std::move(mask), pad};
}

struct WarpedImage {
    LabelImage labels;
    Mask mask;
};

// Nearest-neighbour warp: output pixel x takes B(round(T^-1(x))) when that
// pre-image lies inside B and under M_B, otherwise it is masked out.
inline WarpedImage warp_nn(const LabelImage& b, const Mask& mb, const RigidTransform& t, GridShape out_shape) {
    if (b.shape() != mb.shape()) throw std::invalid_argument("warp_nn: mask shape mismatch");
    require_valid(out_shape, "warp_nn output");
    const RigidTransform inv = t.inverse();
    Grid<Label> labels(out_shape, 0);
    Mask mask(out_shape, false);
    const double c = std::cos(inv.angle), s = std::sin(inv.angle);
    for (int r = 0; r < out_shape.height; ++r) {
        for (int col = 0; col < out_shape.width; ++col) {
            const double dx = col - inv.center.x, dy = r - inv.center.y;
            const double px = c * dx - s * dy + inv.center.x + inv.translation.x;
            const double py = s * dx + c * dy + inv.center.y + inv.translation.y;
            const int sc = static_cast<int>(std::floor(px + 0.5));
            const int sr = static_cast<int>(std::floor(py + 0.5));
            if (!mb.grid().contains(sr, sc) || !mb(sr, sc)) continue;
            labels(r, col) = b(sr, sc);
            mask.set(r, col, true);
        }
    }
    return {LabelImage(std::move(labels), b.k()), std::move(mask)};
}

template <typename Count>
struct GatedMax {
    Offset chi{};
    double mi = 0.0;
    Count n{};
};

// Best MI among valid cells with N >= gamma * max N. Ties prefer larger N,
// then the lexicographically smallest displacement.
template <typename Count>
GatedMax<Count> gated_argmax(const BasicCMIFMap<Count>& map, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gated_argmax: gamma must lie in [0, 1]");
    Count max_n{};
    bool any = false;
    for (std::size_t i = 0; i < map.n.size(); ++i) {
        if (!map.valid[i]) continue;
        any = true;
        max_n = std::max(max_n, map.n[i]);
    }
    if (!any) throw degenerate_input_error("gated_argmax: map has no valid displacement");
    const double gate = gamma * static_cast<double>(max_n);
    const GridShape e = map.domain.extent;
    GatedMax<Count> best;
    bool found = false;
    for (int r = 0; r < e.height; ++r) {
        for (int c = 0; c < e.width; ++c) {
            if (!map.valid(r, c)) continue;
            const Count n = map.n(r, c);
            if (static_cast<double>(n) < gate) continue;
            const double mi = map.mi(r, c);
            // Row-major scan visits displacements in lexicographic order, so
            // only strict improvements replace the incumbent.
            if (!found || mi > best.mi || (mi == best.mi && n > best.n)) {
                best = {map.domain.shift({r, c}), mi, n};
                found = true;
            }
        }
    }
    return best;
}

// count equispaced rotations starting at -pi, covering [-pi, pi).
inline std::vector<RigidTransform> make_angle_grid(int count, Vec2 center = {}) {
    if (count < 1) throw std::invalid_argument("make_angle_grid: count must be >= 1");
    std::vector<RigidTransform> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double angle = -std::numbers::pi + 2.0 * std::numbers::pi * i / count;
        out.push_back(RigidTransform::rotation(angle, center));
    }
    return out;
}

// Quantized, padded inputs shared by the grid and refinement stages.
struct PreparedPair {
    PaddedReference reference;
    LabelImage floating;
    Mask floating_mask;
    KMeansModel reference_model;
    KMeansModel floating_model;
    double gamma = 0.5;
};

inline PreparedPair prepare_alignment(const IntensityImage& a, const Mask& ma, const IntensityImage& b,
                                      const Mask& mb, const AlignmentConfig& config) {
    config.validate();
    KMeansParams pa = config.kmeans, pb = config.kmeans;
    pa.seed = config.seed;
    pb.seed = config.seed + 1;
    auto model_a = fit_kmeans(a, ma, pa);
    auto model_b = fit_kmeans(b, mb, pb);
    if (model_a.k() == 1 && model_b.k() == 1) {
        throw degenerate_input_error("no mutual information possible: both images quantize to a single label");
    }
    auto la = quantize(a, model_a);
    auto lb = quantize(b, model_b);
    return {zero_pad(la, ma, b.shape(), config.gamma), std::move(lb), mb, std::move(model_a), std::move(model_b),
            config.gamma};
}

namespace detail {

struct TransformOutcome {
    GatedMax<std::uint32_t> best;
    Offset frame{};
    bool ok = false;
};

// Integer frame holding every pixel of T(B): output pixel y is the point y + frame.
inline std::pair<Offset, GridShape> warp_frame(GridShape b, const RigidTransform& t) {
    double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
    for (const Vec2 p : {Vec2{0, 0}, Vec2{double(b.width - 1), 0}, Vec2{0, double(b.height - 1)},
                         Vec2{double(b.width - 1), double(b.height - 1)}}) {
        const Vec2 q = t(p);
        min_x = std::min(min_x, q.x);
        min_y = std::min(min_y, q.y);
        max_x = std::max(max_x, q.x);
        max_y = std::max(max_y, q.y);
    }
    const Offset o{static_cast<int>(std::floor(min_y)) - 1, static_cast<int>(std::floor(min_x)) - 1};
    const GridShape s{static_cast<int>(std::ceil(max_y)) - o.row + 2, static_cast<int>(std::ceil(max_x)) - o.col + 2};
    return {o, s};
}

inline TransformOutcome evaluate_transform(const PreparedPair& p, const RigidTransform& t) {
    TransformOutcome out;
    const auto [frame, shape] = warp_frame(p.floating.shape(), t);
    const RigidTransform to_frame = compose(RigidTransform::translate({-double(frame.col), -double(frame.row)}), t);
    const auto warped = warp_nn(p.floating, p.floating_mask, to_frame, shape);
    CmifOptions opt;
    opt.gate_gamma = p.gamma;
    const auto map = cmif_map(p.reference.labels, p.reference.mask, warped.labels, warped.mask, opt);
    bool any = false;
    for (auto v : map.valid.data()) any = any || v;
    if (!any) return out;
    out.best = gated_argmax(map, p.gamma);
    out.frame = frame;
    out.ok = true;
    return out;
}

inline AlignmentResult to_result(const PreparedPair& p, const RigidTransform& t, const TransformOutcome& o,
                                 std::size_t index) {
    AlignmentResult r;
    r.displacement = o.frame + o.best.chi + p.reference.pad;
    r.transform = compose(RigidTransform::translate({-double(r.displacement.col), -double(r.displacement.row)}), t);
    r.mi = o.best.mi;
    r.angle = t.angle;
    r.n_at_opt = o.best.n;
    r.transform_index = index;
    return r;
}

}  // namespace detail

// Runs the transform loop on prepared inputs. The earliest transform wins ties.
inline AlignmentResult align_prepared(const PreparedPair& p, const std::vector<RigidTransform>& transforms) {
    if (transforms.empty()) throw std::invalid_argument("alignment: transform set is empty");
    std::vector<detail::TransformOutcome> outcomes(transforms.size());
    const auto count = static_cast<std::ptrdiff_t>(transforms.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        outcomes[static_cast<std::size_t>(i)] = detail::evaluate_transform(p, transforms[static_cast<std::size_t>(i)]);
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok) continue;
        if (!best || outcomes[i].best.mi > outcomes[*best].best.mi) best = i;
    }
    if (!best) throw degenerate_input_error("alignment: no transform produced any overlap");
    return detail::to_result(p, transforms[*best], outcomes[*best], *best);
}

inline AlignmentResult global_align(const IntensityImage& a, const Mask& ma, const IntensityImage& b,
                                    const Mask& mb, const std::vector<RigidTransform>& transforms,
                                    const AlignmentConfig& config) {
    if (transforms.empty()) throw std::invalid_argument("alignment: transform set is empty");
    return align_prepared(prepare_alignment(a, ma, b, mb, config), transforms);
}

// Random search over angles drawn uniformly from
// [theta - 2 pi / grid_count, theta + 2 pi / grid_count]; keeps the grid result
// unless a refined angle has strictly higher MI.
inline AlignmentResult refine(const AlignmentResult& grid, int grid_count, int refinement_count,
                              std::uint64_t seed, const PreparedPair& p, Vec2 center) {
    if (grid_count < 1) throw std::invalid_argument("refine: grid_count must be >= 1");
    if (refinement_count <= 0) return grid;
    const double half = 2.0 * std::numbers::pi / grid_count;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(grid.angle - half, grid.angle + half);
    std::vector<RigidTransform> transforms;
    transforms.reserve(static_cast<std::size_t>(refinement_count));
    for (int i = 0; i < refinement_count; ++i) transforms.push_back(RigidTransform::rotation(dist(rng), center));
    AlignmentResult refined = align_prepared(p, transforms);
    if (refined.mi > grid.mi) {
        refined.stage = AlignmentStage::refined;
        return refined;
    }
    return grid;
}

// Grid search over config.angle_count rotations about the floating image's
// center, followed by config.refinement_count random refinement angles.
inline AlignmentResult rigid_align(const IntensityImage& a, const Mask& ma, const IntensityImage& b,
                                   const Mask& mb, const AlignmentConfig& config) {
    const auto prepared = prepare_alignment(a, ma, b, mb, config);
    const Vec2 center = grid_center(b.shape());
    const auto grid = align_prepared(prepared, make_angle_grid(config.angle_count, center));
    return refine(grid, config.angle_count, config.refinement_count, config.seed + 2, prepared, center);
}

// Mean distance between the floating image's corner pixels under the two transforms.
inline double corner_error(const RigidTransform& truth, const RigidTransform& estimate, GridShape shape) {
    const double w = shape.width - 1, h = shape.height - 1;
    double sum = 0.0;
    for (const Vec2 p : {Vec2{0, 0}, Vec2{w, 0}, Vec2{0, h}, Vec2{w, h}}) sum += (truth(p) - estimate(p)).norm();
    return sum / 4.0;
}

inline bool alignment_succeeded(double error, GridShape shape) { return error < 0.02 * shape.width; }

}  // namespace cmif
