#pragma once

// Grid, mask, transform and displacement-domain types shared by every module.
//
// Storage is row-major (row, col). Geometry uses continuous (x = col, y = row)
// coordinates with pixel centers at integer positions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmif {

struct GridShape {
    int height = 1;
    int width = 1;

    constexpr std::size_t size() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    constexpr bool valid() const noexcept { return height >= 1 && width >= 1; }
    friend constexpr bool operator==(const GridShape&, const GridShape&) = default;
};

inline void require_valid(GridShape s, const char* what = "grid") {
    if (!s.valid()) {
        throw std::invalid_argument(std::string(what) + ": shape must be at least 1x1, got " +
                                    std::to_string(s.height) + "x" + std::to_string(s.width));
    }
}

// Integer (row, col) pair used for displacements and offsets.
struct Offset {
    int row = 0;
    int col = 0;
    friend constexpr bool operator==(const Offset&, const Offset&) = default;
    friend constexpr Offset operator+(Offset a, Offset b) { return {a.row + b.row, a.col + b.col}; }
    friend constexpr Offset operator-(Offset a, Offset b) { return {a.row - b.row, a.col - b.col}; }
    friend constexpr Offset operator-(Offset a) { return {-a.row, -a.col}; }
    friend constexpr auto operator<=>(const Offset&, const Offset&) = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    double norm() const { return std::hypot(x, y); }
};

// Dense 2D grid of values.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    explicit Grid(GridShape shape, T fill = T{}) : shape_(shape) {
        require_valid(shape);
        data_.assign(shape.size(), fill);
    }
    Grid(GridShape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        require_valid(shape);
        if (data_.size() != shape.size()) {
            throw std::invalid_argument("grid: data length does not match shape");
        }
    }

    GridShape shape() const noexcept { return shape_; }
    int height() const noexcept { return shape_.height; }
    int width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(int r, int c) { return data_[index(r, c)]; }
    const T& operator()(int r, int c) const { return data_[index(r, c)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool contains(int r, int c) const noexcept {
        return r >= 0 && c >= 0 && r < shape_.height && c < shape_.width;
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& vector() const noexcept { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int r, int c) const noexcept {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(shape_.width) +
               static_cast<std::size_t>(c);
    }

    GridShape shape_{};
    std::vector<T> data_;
};

// Real-valued image with m channels per pixel, stored pixel-interleaved.
class IntensityImage {
public:
    IntensityImage() = default;
    IntensityImage(GridShape shape, int channels, std::vector<double> data)
        : shape_(shape), channels_(channels), data_(std::move(data)) {
        require_valid(shape, "intensity image");
        if (channels < 1) throw std::invalid_argument("intensity image: channels must be >= 1");
        if (data_.size() != shape.size() * static_cast<std::size_t>(channels)) {
            throw std::invalid_argument("intensity image: data length != height*width*channels");
        }
        for (double v : data_) {
            if (!std::isfinite(v)) throw std::invalid_argument("intensity image: non-finite value");
        }
    }
    static IntensityImage from_grid(const Grid<double>& g) {
        return IntensityImage(g.shape(), 1, g.vector());
    }

    GridShape shape() const noexcept { return shape_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return shape_.size(); }

    std::span<const double> pixel(std::size_t i) const {
        return std::span<const double>(data_).subspan(i * static_cast<std::size_t>(channels_),
                                                      static_cast<std::size_t>(channels_));
    }
    double at(int r, int c, int ch = 0) const {
        return data_[(static_cast<std::size_t>(r) * static_cast<std::size_t>(shape_.width) +
                      static_cast<std::size_t>(c)) *
                         static_cast<std::size_t>(channels_) +
                     static_cast<std::size_t>(ch)];
    }
    std::span<const double> data() const noexcept { return data_; }

private:
    GridShape shape_{};
    int channels_ = 1;
    std::vector<double> data_;
};

using Label = std::uint16_t;

// Categorical image with labels in {0..k-1}. Padding may introduce kPadLabel,
// which is outside every level set.
class LabelImage {
public:
    static constexpr Label kPadLabel = std::numeric_limits<Label>::max();
    static constexpr int kMaxLabels = kPadLabel;

    LabelImage() = default;
    LabelImage(Grid<Label> labels, int k) : labels_(std::move(labels)), k_(k) {
        if (k < 1 || k > kMaxLabels) throw std::invalid_argument("label image: k out of range");
        for (Label l : labels_.data()) {
            if (l >= k && l != kPadLabel) {
                throw std::invalid_argument("label image: label " + std::to_string(l) +
                                            " >= k=" + std::to_string(k));
            }
        }
    }

    GridShape shape() const noexcept { return labels_.shape(); }
    int k() const noexcept { return k_; }
    const Grid<Label>& grid() const noexcept { return labels_; }
    Label operator()(int r, int c) const { return labels_(r, c); }
    Label operator[](std::size_t i) const { return labels_[i]; }

    friend bool operator==(const LabelImage&, const LabelImage&) = default;

private:
    Grid<Label> labels_;
    int k_ = 1;
};

// Binary region-of-interest mask.
class Mask {
public:
    Mask() = default;
    explicit Mask(GridShape shape, bool value = true)
        : bits_(shape, static_cast<std::uint8_t>(value ? 1 : 0)) {}
    explicit Mask(Grid<std::uint8_t> bits) : bits_(std::move(bits)) {
        for (auto& b : bits_.data()) b = b ? 1 : 0;
    }

    GridShape shape() const noexcept { return bits_.shape(); }
    bool operator()(int r, int c) const { return bits_(r, c) != 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(int r, int c, bool v) { bits_(r, c) = v ? 1 : 0; }
    const Grid<std::uint8_t>& grid() const noexcept { return bits_; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits_.data()) n += b;
        return n;
    }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    Grid<std::uint8_t> bits_;
};

// Non-negative per-pixel weights generalizing Mask.
class WeightMask {
public:
    WeightMask() = default;
    explicit WeightMask(GridShape shape, double value = 1.0) : weights_(shape, value) { check(); }
    explicit WeightMask(Grid<double> weights) : weights_(std::move(weights)) { check(); }
    static WeightMask from_mask(const Mask& m) {
        Grid<double> w(m.shape(), 0.0);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = m[i] ? 1.0 : 0.0;
        return WeightMask(std::move(w));
    }

    GridShape shape() const noexcept { return weights_.shape(); }
    double operator()(int r, int c) const { return weights_(r, c); }
    double operator[](std::size_t i) const { return weights_[i]; }
    const Grid<double>& grid() const noexcept { return weights_; }

private:
    void check() const {
        for (double w : weights_.data()) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw std::invalid_argument("weight mask: weights must be finite and >= 0");
            }
        }
    }
    Grid<double> weights_;
};

// The set of integer shifts chi for which the floating grid (shifted by chi)
// touches the reference grid. Cell (i, j) holds chi = origin + (i, j).
struct DisplacementDomain {
    Offset origin{};
    GridShape extent{};

    static DisplacementDomain full(GridShape reference, GridShape floating) {
        require_valid(reference, "reference");
        require_valid(floating, "floating");
        return {{-(reference.height - 1), -(reference.width - 1)},
                {reference.height + floating.height - 1, reference.width + floating.width - 1}};
    }

    bool contains(Offset chi) const noexcept {
        const Offset i = chi - origin;
        return i.row >= 0 && i.col >= 0 && i.row < extent.height && i.col < extent.width;
    }
    Offset cell(Offset chi) const {
        if (!contains(chi)) throw std::out_of_range("displacement outside domain");
        return chi - origin;
    }
    Offset shift(Offset cell) const noexcept { return cell + origin; }
    std::size_t flat(Offset chi) const {
        const Offset i = cell(chi);
        return static_cast<std::size_t>(i.row) * static_cast<std::size_t>(extent.width) +
               static_cast<std::size_t>(i.col);
    }
    friend bool operator==(const DisplacementDomain&, const DisplacementDomain&) = default;
};

// Rotation by `angle` about `center`, followed by `translation`:
//   p -> R(angle) (p - center) + center + translation
struct RigidTransform {
    double angle = 0.0;
    Vec2 translation{};
    Vec2 center{};

    static RigidTransform identity() { return {}; }
    static RigidTransform rotation(double angle, Vec2 center = {}) { return {angle, {}, center}; }
    static RigidTransform translate(Vec2 t) { return {0.0, t, {}}; }

    Vec2 apply(Vec2 p) const {
        const double c = std::cos(angle), s = std::sin(angle);
        const Vec2 d = p - center;
        return {c * d.x - s * d.y + center.x + translation.x,
                s * d.x + c * d.y + center.y + translation.y};
    }
    Vec2 operator()(Vec2 p) const { return apply(p); }

    RigidTransform inverse() const {
        // p = R^T (q - center - t) + center, expressed about the same center.
        const double c = std::cos(-angle), s = std::sin(-angle);
        const Vec2 t{-(c * translation.x - s * translation.y), -(s * translation.x + c * translation.y)};
        return {-angle, t, center};
    }
};

// Returns the transform p -> outer(inner(p)), pivoting about inner's center.
inline RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
    const double c = std::cos(outer.angle), s = std::sin(outer.angle);
    const Vec2 q = inner.center + inner.translation - outer.center;
    const Vec2 rq{c * q.x - s * q.y, s * q.x + c * q.y};
    RigidTransform out;
    out.angle = outer.angle + inner.angle;
    out.center = inner.center;
    out.translation = rq + outer.center + outer.translation - inner.center;
    return out;
}

inline Vec2 grid_center(GridShape s) {
    return {(s.width - 1) / 2.0, (s.height - 1) / 2.0};
}

inline Mask make_circular_mask(GridShape shape) {
    require_valid(shape, "circular mask");
    Mask m(shape, false);
    const double radius = std::min(shape.height, shape.width) / 2.0;
    const double cy = (shape.height - 1) / 2.0, cx = (shape.width - 1) / 2.0;
    for (int r = 0; r < shape.height; ++r) {
        for (int c = 0; c < shape.width; ++c) {
            const double dy = r - cy, dx = c - cx;
            m.set(r, c, dx * dx + dy * dy <= radius * radius);
        }
    }
    return m;
}

// Zeroes pixels outside the mask. Idempotent.
template <typename T>
Grid<T> apply_mask(const Grid<T>& g, const Mask& m) {
    if (g.shape() != m.shape()) throw std::invalid_argument("apply_mask: shape mismatch");
    Grid<T> out = g;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!m[i]) out[i] = T{};
    }
    return out;
}

// Smallest axis-aligned box holding every set pixel; nullopt-like empty box
// is reported with height/width 0.
struct Box {
    Offset origin{};
    int height = 0;
    int width = 0;
    bool empty() const noexcept { return height <= 0 || width <= 0; }
};

template <typename T>
Box support_box(const Grid<T>& g) {
    int r0 = g.height(), r1 = -1, c0 = g.width(), c1 = -1;
    for (int r = 0; r < g.height(); ++r) {
        for (int c = 0; c < g.width(); ++c) {
            if (g(r, c) != T{}) {
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
            }
        }
    }
    if (r1 < 0) return {};
    return {{r0, c0}, r1 - r0 + 1, c1 - c0 + 1};
}

inline Box support_box(const Mask& m) { return support_box(m.grid()); }
inline Box support_box(const WeightMask& m) { return support_box(m.grid()); }

}  // namespace cmif
