#pragma once

// Direct histogram method: for every displacement in isolation, scan the
// overlap, bin label pairs, and evaluate the entropies. Slow and simple; it
// shares no computation with cmif.hpp and serves as the reference.

#include <cmif/cmif.hpp>
#include <cmif/core.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cmif::oracle {

struct DirectResult {
    CMIFMap map;
    // Empty unless counts were requested.
    JointCounts joint;
    MarginalCounts marginals;
    CountMap n;
};

struct WeightedDirectResult {
    SWMIMap map;
};

namespace detail {

inline double entropy_bits(const std::vector<double>& counts, double n) {
    double h = 0.0;
    for (double c : counts) {
        if (c > 0.0) {
            const double p = c / n;
            h -= p * std::log2(p);
        }
    }
    return h;
}

// Per-pixel code: label when masked in, k (one past the last label) otherwise.
inline std::vector<int> codes(const LabelImage& img, const Mask& m) {
    std::vector<int> out(img.shape().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = m[i] ? static_cast<int>(img[i]) : img.k();
        if (out[i] > img.k()) out[i] = img.k();  // padding filler
    }
    return out;
}

}  // namespace detail

inline DirectResult direct_cmif_map(const LabelImage& a, const Mask& ma, const LabelImage& b, const Mask& mb,
                                    bool keep_counts = true) {
    if (a.shape() != ma.shape() || b.shape() != mb.shape()) {
        throw std::invalid_argument("direct_cmif_map: mask shape mismatch");
    }
    const int ka = a.k(), kb = b.k();
    const int ha = a.shape().height, wa = a.shape().width;
    const int hb = b.shape().height, wb = b.shape().width;
    const DisplacementDomain domain{{-(ha - 1), -(wa - 1)}, {ha + hb - 1, wa + wb - 1}};
    const GridShape e = domain.extent;

    DirectResult res;
    res.map = CMIFMap{domain, Grid<double>(e, 0.0), Grid<std::uint32_t>(e, 0u), Grid<std::uint8_t>(e, 0)};
    if (keep_counts) {
        res.joint.k_a = ka;
        res.joint.k_b = kb;
        res.joint.maps.assign(static_cast<std::size_t>(ka * kb), CountMap{domain, Grid<std::uint32_t>(e, 0u)});
        res.marginals.a.assign(static_cast<std::size_t>(ka), CountMap{domain, Grid<std::uint32_t>(e, 0u)});
        res.marginals.b.assign(static_cast<std::size_t>(kb), CountMap{domain, Grid<std::uint32_t>(e, 0u)});
        res.n = CountMap{domain, Grid<std::uint32_t>(e, 0u)};
    }

    const std::vector<int> code_a = detail::codes(a, ma);
    const std::vector<int> code_b = detail::codes(b, mb);
    const int stride = kb + 1;

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < e.height; ++i) {
        std::vector<std::uint32_t> hist(static_cast<std::size_t>((ka + 1) * stride));
        std::vector<double> joint(static_cast<std::size_t>(ka * kb)), marg_a(static_cast<std::size_t>(ka)),
            marg_b(static_cast<std::size_t>(kb));
        const int dr = domain.origin.row + i;
        const int r0 = std::max(0, -dr), r1 = std::min(ha, hb - dr);
        for (int j = 0; j < e.width; ++j) {
            const int dc = domain.origin.col + j;
            const int c0 = std::max(0, -dc), c1 = std::min(wa, wb - dc);
            std::fill(hist.begin(), hist.end(), 0u);
            for (int r = r0; r < r1; ++r) {
                const int* ra = code_a.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(wa);
                const int* rb = code_b.data() + static_cast<std::size_t>(r + dr) * static_cast<std::size_t>(wb) + dc;
                for (int c = c0; c < c1; ++c) ++hist[static_cast<std::size_t>(ra[c] * stride + rb[c])];
            }
            std::uint32_t n = 0;
            std::fill(marg_a.begin(), marg_a.end(), 0.0);
            std::fill(marg_b.begin(), marg_b.end(), 0.0);
            for (int x = 0; x < ka; ++x) {
                for (int y = 0; y < kb; ++y) {
                    const std::uint32_t c = hist[static_cast<std::size_t>(x * stride + y)];
                    joint[static_cast<std::size_t>(x * kb + y)] = c;
                    marg_a[static_cast<std::size_t>(x)] += c;
                    marg_b[static_cast<std::size_t>(y)] += c;
                    n += c;
                    if (keep_counts) res.joint.maps[static_cast<std::size_t>(x * kb + y)].counts(i, j) = c;
                }
            }
            if (keep_counts) {
                for (int x = 0; x < ka; ++x) {
                    res.marginals.a[static_cast<std::size_t>(x)].counts(i, j) =
                        static_cast<std::uint32_t>(marg_a[static_cast<std::size_t>(x)]);
                }
                for (int y = 0; y < kb; ++y) {
                    res.marginals.b[static_cast<std::size_t>(y)].counts(i, j) =
                        static_cast<std::uint32_t>(marg_b[static_cast<std::size_t>(y)]);
                }
                res.n.counts(i, j) = n;
            }
            res.map.n(i, j) = n;
            if (n == 0) continue;
            const double nd = n;
            res.map.mi(i, j) = detail::entropy_bits(marg_a, nd) + detail::entropy_bits(marg_b, nd) -
                               detail::entropy_bits(joint, nd);
            res.map.valid(i, j) = 1;
        }
    }
    return res;
}

// Weighted direct method: each overlapping pixel pair adds W_A(x) * W_B(x + chi).
inline SWMIMap direct_swmi_map(const LabelImage& a, const WeightMask& wa_mask, const LabelImage& b,
                               const WeightMask& wb_mask, double empty_fraction = 1e-10) {
    if (a.shape() != wa_mask.shape() || b.shape() != wb_mask.shape()) {
        throw std::invalid_argument("direct_swmi_map: weight shape mismatch");
    }
    const int ka = a.k(), kb = b.k();
    const int ha = a.shape().height, wa = a.shape().width;
    const int hb = b.shape().height, wb = b.shape().width;
    const DisplacementDomain domain{{-(ha - 1), -(wa - 1)}, {ha + hb - 1, wa + wb - 1}};
    const GridShape e = domain.extent;
    SWMIMap out{domain, Grid<double>(e, 0.0), Grid<double>(e, 0.0), Grid<std::uint8_t>(e, 0)};
    std::vector<double> joint(static_cast<std::size_t>(ka * kb)), marg_a(static_cast<std::size_t>(ka)),
        marg_b(static_cast<std::size_t>(kb));
    double max_n = 0.0;
    for (int i = 0; i < e.height; ++i) {
        const int dr = domain.origin.row + i;
        for (int j = 0; j < e.width; ++j) {
            const int dc = domain.origin.col + j;
            std::fill(joint.begin(), joint.end(), 0.0);
            double n = 0.0;
            for (int r = std::max(0, -dr); r < std::min(ha, hb - dr); ++r) {
                for (int c = std::max(0, -dc); c < std::min(wa, wb - dc); ++c) {
                    const int la = a(r, c), lb = b(r + dr, c + dc);
                    if (la >= ka || lb >= kb) continue;
                    const double w = wa_mask(r, c) * wb_mask(r + dr, c + dc);
                    joint[static_cast<std::size_t>(la * kb + lb)] += w;
                    n += w;
                }
            }
            out.n(i, j) = n;
            max_n = std::max(max_n, n);
        }
    }
    for (int i = 0; i < e.height; ++i) {
        const int dr = domain.origin.row + i;
        for (int j = 0; j < e.width; ++j) {
            const double n = out.n(i, j);
            if (!(n > empty_fraction * max_n) || n <= 0.0) continue;
            const int dc = domain.origin.col + j;
            std::fill(joint.begin(), joint.end(), 0.0);
            std::fill(marg_a.begin(), marg_a.end(), 0.0);
            std::fill(marg_b.begin(), marg_b.end(), 0.0);
            for (int r = std::max(0, -dr); r < std::min(ha, hb - dr); ++r) {
                for (int c = std::max(0, -dc); c < std::min(wa, wb - dc); ++c) {
                    const int la = a(r, c), lb = b(r + dr, c + dc);
                    if (la >= ka || lb >= kb) continue;
                    const double w = wa_mask(r, c) * wb_mask(r + dr, c + dc);
                    joint[static_cast<std::size_t>(la * kb + lb)] += w;
                    marg_a[static_cast<std::size_t>(la)] += w;
                    marg_b[static_cast<std::size_t>(lb)] += w;
                }
            }
            out.mi(i, j) = detail::entropy_bits(marg_a, n) + detail::entropy_bits(marg_b, n) -
                           detail::entropy_bits(joint, n);
            out.valid(i, j) = 1;
        }
    }
    return out;
}

// MI at zero displacement from the relative-frequency form
//   sum_ab p(a,b) log2( p(a,b) / (p(a) p(b)) ).
inline double scalar_mi(const LabelImage& a, const Mask& ma, const LabelImage& b, const Mask& mb) {
    if (a.shape() != ma.shape() || b.shape() != mb.shape()) {
        throw std::invalid_argument("scalar_mi: mask shape mismatch");
    }
    const int ka = a.k(), kb = b.k();
    const int h = std::min(a.shape().height, b.shape().height);
    const int w = std::min(a.shape().width, b.shape().width);
    std::vector<double> pab(static_cast<std::size_t>(ka * kb), 0.0);
    double n = 0.0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!ma(r, c) || !mb(r, c)) continue;
            const int la = a(r, c), lb = b(r, c);
            if (la >= ka || lb >= kb) continue;
            pab[static_cast<std::size_t>(la * kb + lb)] += 1.0;
            n += 1.0;
        }
    }
    if (n == 0.0) throw std::invalid_argument("scalar_mi: empty overlap");
    std::vector<double> pa(static_cast<std::size_t>(ka), 0.0), pb(static_cast<std::size_t>(kb), 0.0);
    for (auto& p : pab) p /= n;
    for (int x = 0; x < ka; ++x) {
        for (int y = 0; y < kb; ++y) {
            pa[static_cast<std::size_t>(x)] += pab[static_cast<std::size_t>(x * kb + y)];
            pb[static_cast<std::size_t>(y)] += pab[static_cast<std::size_t>(x * kb + y)];
        }
    }
    double mi = 0.0;
    for (int x = 0; x < ka; ++x) {
        for (int y = 0; y < kb; ++y) {
            const double p = pab[static_cast<std::size_t>(x * kb + y)];
            if (p > 0.0) mi += p * std::log2(p / (pa[static_cast<std::size_t>(x)] * pb[static_cast<std::size_t>(y)]));
        }
    }
    return mi;
}

}  // namespace cmif::oracle
