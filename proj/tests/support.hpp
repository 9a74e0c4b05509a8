#pragma once

// Random instance generators and brute-force references shared by the tests.

#include <cmif/core.hpp>

#include <cstdint>
#include <random>
#include <vector>

namespace cmif::fixtures {

inline LabelImage random_labels(std::mt19937_64& rng, GridShape s, int k) {
    std::uniform_int_distribution<int> d(0, k - 1);
    Grid<Label> g(s, 0);
    for (auto& v : g.data()) v = static_cast<Label>(d(rng));
    return LabelImage(std::move(g), k);
}

inline Mask random_mask(std::mt19937_64& rng, GridShape s, double p = 0.7) {
    std::bernoulli_distribution d(p);
    Mask m(s, false);
    for (int r = 0; r < s.height; ++r) {
        for (int c = 0; c < s.width; ++c) m.set(r, c, d(rng));
    }
    return m;
}

inline Mask full_mask(GridShape s) { return Mask(s, true); }

inline WeightMask random_weights(std::mt19937_64& rng, GridShape s) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Grid<double> g(s, 0.0);
    for (auto& v : g.data()) v = d(rng) < 0.2 ? 0.0 : d(rng);
    return WeightMask(std::move(g));
}

inline GridShape random_shape(std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return {d(rng), d(rng)};
}

inline Grid<double> random_binary(std::mt19937_64& rng, GridShape s, double p = 0.5) {
    std::bernoulli_distribution d(p);
    Grid<double> g(s, 0.0);
    for (auto& v : g.data()) v = d(rng) ? 1.0 : 0.0;
    return g;
}

// Literal sum_x f(x) g(x + chi), full extent.
inline Grid<double> brute_correlation(const Grid<double>& f, const Grid<double>& g) {
    const auto d = DisplacementDomain::full(f.shape(), g.shape());
    Grid<double> out(d.extent, 0.0);
    for (int i = 0; i < d.extent.height; ++i) {
        for (int j = 0; j < d.extent.width; ++j) {
            const Offset chi = d.shift({i, j});
            double s = 0.0;
            for (int r = 0; r < f.height(); ++r) {
                for (int c = 0; c < f.width(); ++c) {
                    if (g.contains(r + chi.row, c + chi.col)) s += f(r, c) * g(r + chi.row, c + chi.col);
                }
            }
            out(i, j) = s;
        }
    }
    return out;
}

// Copy of `img` with labels renamed through `perm`.
inline LabelImage relabel(const LabelImage& img, const std::vector<int>& perm) {
    Grid<Label> g(img.shape(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<Label>(perm[img[i]]);
    return LabelImage(std::move(g), img.k());
}

// Integer shift of `img`: out(r, c) = img(r - s.row, c - s.col), masked out
// where the source falls outside.
struct Shifted {
    LabelImage labels;
    Mask mask;
};

inline Shifted shift_labels(const LabelImage& img, Offset s) {
    Grid<Label> g(img.shape(), 0);
    Mask m(img.shape(), false);
    for (int r = 0; r < img.shape().height; ++r) {
        for (int c = 0; c < img.shape().width; ++c) {
            const int sr = r - s.row, sc = c - s.col;
            if (sr < 0 || sc < 0 || sr >= img.shape().height || sc >= img.shape().width) continue;
            g(r, c) = img(sr, sc);
            m.set(r, c, true);
        }
    }
    return {LabelImage(std::move(g), img.k()), std::move(m)};
}

}  // namespace cmif::fixtures
