#pragma once

// Mini-batch k-means quantization of multi-channel images into LabelImages,
// and level-set extraction.

#include <cmif/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

namespace cmif {

struct KMeansParams {
    int k = 16;
    int batch_size = 1000;
    int max_iter = 25;  // passes over the masked samples
    std::uint64_t seed = 0;
};

class KMeansModel {
public:
    KMeansModel() = default;
    KMeansModel(int dim, std::vector<std::vector<double>> centroids, std::uint64_t seed)
        : dim_(dim), centroids_(std::move(centroids)), seed_(seed) {
        if (dim < 1) throw std::invalid_argument("kmeans model: dimension must be >= 1");
        if (centroids_.empty()) throw std::invalid_argument("kmeans model: needs at least one centroid");
        for (const auto& c : centroids_) {
            if (static_cast<int>(c.size()) != dim) {
                throw std::invalid_argument("kmeans model: centroid dimension mismatch");
            }
            for (double v : c) {
                if (!std::isfinite(v)) throw std::invalid_argument("kmeans model: non-finite centroid");
            }
        }
    }

    int k() const noexcept { return static_cast<int>(centroids_.size()); }
    int dim() const noexcept { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<std::vector<double>>& centroids() const noexcept { return centroids_; }

    // Nearest centroid; ties go to the lowest index.
    int assign(std::span<const double> v) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k(); ++j) {
            double d = 0.0;
            const auto& c = centroids_[static_cast<std::size_t>(j)];
            for (int i = 0; i < dim_; ++i) {
                const double t = v[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(i)];
                d += t * t;
            }
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        return best;
    }

    friend bool operator==(const KMeansModel&, const KMeansModel&) = default;

private:
    int dim_ = 1;
    std::vector<std::vector<double>> centroids_;
    std::uint64_t seed_ = 0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

// Distinct sample vectors, stopping once `limit` have been seen.
inline std::vector<std::vector<double>> distinct_samples(const IntensityImage& image,
                                                         const std::vector<std::size_t>& idx,
                                                         std::size_t limit) {
    std::set<std::vector<double>> seen;
    for (std::size_t i : idx) {
        const auto p = image.pixel(i);
        seen.emplace(p.begin(), p.end());
        if (seen.size() >= limit) break;
    }
    return {seen.begin(), seen.end()};
}

inline std::vector<std::vector<double>> kmeanspp_init(const IntensityImage& image,
                                                      const std::vector<std::size_t>& idx, int k,
                                                      std::mt19937_64& rng) {
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(k));
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    {
        const auto p = image.pixel(idx[pick(rng)]);
        centers.emplace_back(p.begin(), p.end());
    }
    std::vector<double> d2(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        d2[i] = squared_distance(image.pixel(idx[i]), centers.back());
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t chosen = 0;
        const double target = unit(rng) * total;
        double acc = 0.0;
        // If rounding leaves acc <= target, the last positive entry is used.
        for (std::size_t i = 0; i < d2.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            chosen = i;
            if (acc > target) break;
        }
        const auto p = image.pixel(idx[chosen]);
        centers.emplace_back(p.begin(), p.end());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            d2[i] = std::min(d2[i], squared_distance(image.pixel(idx[i]), centers.back()));
        }
    }
    return centers;
}

}  // namespace detail

// Fits k centroids on the masked pixels with mini-batch k-means (k-means++ seeded).
// When the masked pixels hold fewer than k distinct vectors the model's k is
// reduced to that number and the centroids are exactly those vectors.
inline KMeansModel fit_kmeans(const IntensityImage& image, const Mask& mask, const KMeansParams& params) {
    if (mask.shape() != image.shape()) throw std::invalid_argument("fit_kmeans: mask shape mismatch");
    if (params.k < 2) throw std::invalid_argument("fit_kmeans: k must be >= 2");
    if (params.k > LabelImage::kMaxLabels) throw std::invalid_argument("fit_kmeans: k too large");
    if (params.batch_size < 1 || params.max_iter < 1) {
        throw std::invalid_argument("fit_kmeans: batch_size and max_iter must be >= 1");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        if (mask[i]) idx.push_back(i);
    }
    if (idx.size() < static_cast<std::size_t>(params.k)) {
        throw std::invalid_argument("fit_kmeans: fewer masked pixels than k");
    }
    const int dim = image.channels();

    auto distinct = detail::distinct_samples(image, idx, static_cast<std::size_t>(params.k));
    if (distinct.size() < static_cast<std::size_t>(params.k)) {
        return KMeansModel(dim, std::move(distinct), params.seed);
    }

    std::mt19937_64 rng(params.seed);
    auto centers = detail::kmeanspp_init(image, idx, params.k, rng);

    const std::size_t k = centers.size();
    std::vector<std::uint64_t> counts(k, 0);
    const std::size_t batch = static_cast<std::size_t>(params.batch_size);
    const std::size_t steps = std::max<std::size_t>(
        1, (static_cast<std::size_t>(params.max_iter) * idx.size() + batch - 1) / batch);
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    std::vector<std::size_t> sample(batch);
    std::vector<int> owner(batch);
    std::vector<double> dist(batch);

    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t i = 0; i < batch; ++i) sample[i] = idx[pick(rng)];
        for (std::size_t i = 0; i < batch; ++i) {
            const auto p = image.pixel(sample[i]);
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double d = detail::squared_distance(p, centers[j]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(j);
                }
            }
            owner[i] = best;
            dist[i] = best_d;
        }
        // Per-center learning rate 1/count.
        for (std::size_t i = 0; i < batch; ++i) {
            auto& c = centers[static_cast<std::size_t>(owner[i])];
            const double eta = 1.0 / static_cast<double>(++counts[static_cast<std::size_t>(owner[i])]);
            const auto p = image.pixel(sample[i]);
            for (int d = 0; d < dim; ++d) {
                c[static_cast<std::size_t>(d)] += eta * (p[static_cast<std::size_t>(d)] - c[static_cast<std::size_t>(d)]);
            }
        }
        // Centers that have never received a sample move to the batch's worst-fit sample.
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < batch; ++i) {
                if (dist[i] > dist[far]) far = i;
            }
            if (dist[far] <= 0.0) continue;
            const auto p = image.pixel(sample[far]);
            centers[j].assign(p.begin(), p.end());
            dist[far] = 0.0;
        }
    }
    return KMeansModel(dim, std::move(centers), params.seed);
}

inline KMeansModel fit_kmeans(const IntensityImage& image, const Mask& mask, int k, int batch_size,
                              int max_iter, std::uint64_t seed) {
    return fit_kmeans(image, mask, KMeansParams{k, batch_size, max_iter, seed});
}

inline LabelImage quantize(const IntensityImage& image, const KMeansModel& model) {
    if (image.channels() != model.dim()) {
        throw std::invalid_argument("quantize: image has " + std::to_string(image.channels()) +
                                    " channels, model expects " + std::to_string(model.dim()));
    }
    Grid<Label> labels(image.shape(), 0);
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        labels[i] = static_cast<Label>(model.assign(image.pixel(i)));
    }
    return LabelImage(std::move(labels), model.k());
}

// Indicator of (mask == 1 and label == a).
inline Grid<std::uint8_t> level_set(const LabelImage& labels, int a, const Mask& mask) {
    if (a < 0 || a >= labels.k()) throw std::invalid_argument("level_set: label out of range");
    if (labels.shape() != mask.shape()) throw std::invalid_argument("level_set: shape mismatch");
    Grid<std::uint8_t> out(labels.shape(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (mask[i] && labels[i] == a) ? 1 : 0;
    }
    return out;
}

// Weight where label == a, else 0.
inline Grid<double> weighted_level_set(const LabelImage& labels, int a, const WeightMask& weights) {
    if (a < 0 || a >= labels.k()) throw std::invalid_argument("weighted_level_set: label out of range");
    if (labels.shape() != weights.shape()) throw std::invalid_argument("weighted_level_set: shape mismatch");
    Grid<double> out(labels.shape(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = labels[i] == a ? weights[i] : 0.0;
    }
    return out;
}

}  // namespace cmif
