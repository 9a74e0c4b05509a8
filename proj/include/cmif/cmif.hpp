#pragma once

// Mutual information between a reference and a floating label image at every
// integer displacement, computed from correlations of level sets:
//
//   C_ab(chi) = CC(L_a[A], L_b[B])      joint counts
//   C_a(chi)  = CC(L_a[A], M_B)         marginal counts of A
//   C_b(chi)  = CC(M_A, L_b[B])         marginal counts of B
//   N(chi)    = CC(M_A, M_B)            overlap
//
// and MI(chi) = H_A(chi) + H_B(chi) - H_AB(chi) with frequencies count / N.

#include <cmif/core.hpp>
#include <cmif/error.hpp>
#include <cmif/quantize.hpp>
#include <cmif/xcorr.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <vector>

namespace cmif {

template <typename Count>
struct BasicCMIFMap {
    DisplacementDomain domain{};
    Grid<double> mi;           // bits; meaningful where valid
    Grid<Count> n;             // overlap
    Grid<std::uint8_t> valid;  // N > 0 and evaluated

    bool is_valid(Offset chi) const {
        const Offset c = domain.cell(chi);
        return valid(c.row, c.col) != 0;
    }
    double mi_at(Offset chi) const {
        const Offset c = domain.cell(chi);
        return mi(c.row, c.col);
    }
    Count n_at(Offset chi) const {
        const Offset c = domain.cell(chi);
        return n(c.row, c.col);
    }
};

using CMIFMap = BasicCMIFMap<std::uint32_t>;
// Spatially weighted variant: N and the counts are real-valued.
using SWMIMap = BasicCMIFMap<double>;

struct EntropyMaps {
    DisplacementDomain domain{};
    Grid<double> h_a;
    Grid<double> h_b;
    Grid<double> h_ab;
    Grid<std::uint8_t> valid;
};

// Joint count maps, stored a-major: maps[a * k_b + b].
struct JointCounts {
    int k_a = 0;
    int k_b = 0;
    std::vector<CountMap> maps;
    const CountMap& at(int a, int b) const { return maps[static_cast<std::size_t>(a * k_b + b)]; }
};

struct MarginalCounts {
    std::vector<CountMap> a;
    std::vector<CountMap> b;
};

struct CmifOptions {
    // Only these displacements are evaluated; the rest are reported invalid.
    std::optional<DisplacementWindow> window;
    // Evaluate only where N >= gamma * max N (N is still reported everywhere).
    std::optional<double> gate_gamma;
    bool keep_entropies = false;
    // Above this size the B-marginals are correlated directly instead of being
    // summed from the joint counts.
    std::size_t marginal_buffer_bytes = std::size_t{256} << 20;
};

template <typename Count>
struct CmifResult {
    BasicCMIFMap<Count> map;
    std::optional<EntropyMaps> entropies;
};

namespace detail {

// c * log2(c), tabulated for small integer counts.
inline double xlog2x(std::uint32_t c) {
    static const std::vector<double> table = [] {
        std::vector<double> t(std::size_t{1} << 16);
        t[0] = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = static_cast<double>(i) * std::log2(static_cast<double>(i));
        return t;
    }();
    if (c < table.size()) return table[c];
    return static_cast<double>(c) * std::log2(static_cast<double>(c));
}

inline double xlog2x(double c) { return c > 0.0 ? c * std::log2(c) : 0.0; }

// Entropy in bits of counts summing to n, given sum of c*log2(c).
inline double entropy_from_sum(double n, double sum_xlogx) { return std::log2(n) - sum_xlogx / n; }

template <typename Count>
Count to_count(double raw) {
    if constexpr (std::is_same_v<Count, std::uint32_t>) {
        return round_count(raw);
    } else {
        return raw > 0.0 ? raw : 0.0;
    }
}

// Rounds one correlation window to counts and folds it into the running
// joint-entropy sums and marginal counts. The residual check runs once per
// window rather than per cell.
inline void accumulate_counts(std::span<const double> raw, std::uint32_t max_n, std::span<double> s_ab,
                              std::span<std::uint32_t> c_a, std::uint32_t* c_b) {
    static const std::vector<double> table = [] {
        std::vector<double> t(std::size_t{1} << 16);
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = static_cast<double>(i) * std::log2(static_cast<double>(i));
        return t;
    }();
    const std::size_t cells = raw.size();
    double worst = 0.0;
    const bool small = max_n < table.size();
    for (std::size_t i = 0; i < cells; ++i) {
        const double r = std::floor(raw[i] + 0.5);
        worst = std::max(worst, std::abs(raw[i] - r));
        const auto c = static_cast<std::uint32_t>(std::max(r, 0.0));
        s_ab[i] += small ? table[std::min<std::size_t>(c, table.size() - 1)] : xlog2x(c);
        c_a[i] += c;
        if (c_b) c_b[i] += c;
    }
    if (!(worst < kRoundingTolerance)) {
        throw numerical_health_error("cmif: correlation residual " + std::to_string(worst) +
                                     " exceeds rounding tolerance; transform precision insufficient");
    }
}

// Weighted overlap below this fraction of max N is treated as empty.
inline constexpr double kWeightedEmptyFraction = 1e-10;

template <typename Count, typename MaskGrid, typename LevelA, typename LevelB>
CmifResult<Count> stream_cmif(GridShape shape_a, int k_a, const MaskGrid& mask_a, LevelA&& level_a,
                              GridShape shape_b, int k_b, const MaskGrid& mask_b, LevelB&& level_b,
                              const CmifOptions& opt) {
    constexpr bool weighted = std::is_same_v<Count, double>;
    CmifResult<Count> res;
    auto& out = res.map;
    out.domain = DisplacementDomain::full(shape_a, shape_b);
    const GridShape extent = out.domain.extent;
    out.mi = Grid<double>(extent, 0.0);
    out.n = Grid<Count>(extent, Count{});
    out.valid = Grid<std::uint8_t>(extent, 0);
    if (opt.keep_entropies) {
        res.entropies = EntropyMaps{out.domain, Grid<double>(extent, 0.0), Grid<double>(extent, 0.0),
                                    Grid<double>(extent, 0.0), Grid<std::uint8_t>(extent, 0)};
    }
    if (opt.gate_gamma && !(*opt.gate_gamma >= 0.0 && *opt.gate_gamma <= 1.0)) {
        throw std::invalid_argument("cmif: gate gamma must lie in [0, 1]");
    }

    const Box box_a = support_box(mask_a), box_b = support_box(mask_b);
    if (box_a.empty() || box_b.empty()) return res;

    // Overlap map. With gating, max N is taken over the whole domain.
    const std::optional<DisplacementWindow> n_window = opt.gate_gamma ? std::nullopt : opt.window;
    const auto n_layout = CorrelationLayout::make(shape_a, box_a, shape_b, box_b, n_window);
    Count max_n{};
    if (!n_layout.empty()) {
        const SpectrumCache ma(mask_a, box_a, n_layout.padded, SpectrumRole::reference);
        const SpectrumCache mb(mask_b, box_b, n_layout.padded, SpectrumRole::floating);
        const GridShape ws = n_layout.window_shape();
        std::vector<double> raw(ws.size());
        correlate_window(ma, mb, n_layout, raw);
        const Offset base = out.domain.cell(n_layout.window.lo);
        for (int i = 0; i < ws.height; ++i) {
            for (int j = 0; j < ws.width; ++j) {
                const Count v = to_count<Count>(raw[static_cast<std::size_t>(i * ws.width + j)]);
                out.n(base.row + i, base.col + j) = v;
                max_n = std::max(max_n, v);
            }
        }
    }
    if (max_n <= Count{}) return res;
    const double empty_below = weighted ? kWeightedEmptyFraction * static_cast<double>(max_n) : 0.0;

    // Displacements to evaluate.
    DisplacementWindow eval = opt.window ? intersect(*opt.window, full_window(out.domain)) : full_window(out.domain);
    if (opt.gate_gamma) {
        const double gate = *opt.gate_gamma * static_cast<double>(max_n);
        DisplacementWindow hit{{extent.height, extent.width}, {-1, -1}};
        for (int r = 0; r < extent.height; ++r) {
            for (int c = 0; c < extent.width; ++c) {
                const double v = static_cast<double>(out.n(r, c));
                if (v > empty_below && v >= gate) {
                    hit.lo = {std::min(hit.lo.row, r), std::min(hit.lo.col, c)};
                    hit.hi = {std::max(hit.hi.row, r), std::max(hit.hi.col, c)};
                }
            }
        }
        hit.lo = out.domain.shift(hit.lo);
        hit.hi = out.domain.shift(hit.hi);
        eval = intersect(eval, hit);
    }
    const auto layout = CorrelationLayout::make(shape_a, box_a, shape_b, box_b, eval);
    if (layout.empty()) return res;
    const GridShape ws = layout.window_shape();
    const std::size_t cells = ws.size();
    const Offset base = out.domain.cell(layout.window.lo);

    std::vector<SpectrumCache> spec_b;
    spec_b.reserve(static_cast<std::size_t>(k_b));
    for (int b = 0; b < k_b; ++b) spec_b.emplace_back(level_b(b), box_b, layout.padded, SpectrumRole::floating);

    const bool sum_b_marginals =
        static_cast<std::size_t>(k_b) * cells * sizeof(Count) <= opt.marginal_buffer_bytes;

    std::vector<double> raw(cells);
    std::vector<double> s_ab(cells, 0.0), s_a(cells, 0.0), s_b(cells, 0.0);
    std::vector<Count> c_a(cells), total(cells, Count{});
    std::vector<Count> c_b(sum_b_marginals ? static_cast<std::size_t>(k_b) * cells : 0, Count{});

    for (int a = 0; a < k_a; ++a) {
        const SpectrumCache fa(level_a(a), box_a, layout.padded, SpectrumRole::reference);
        std::fill(c_a.begin(), c_a.end(), Count{});
        for (int b = 0; b < k_b; ++b) {
            correlate_window(fa, spec_b[static_cast<std::size_t>(b)], layout, raw);
            Count* cb = sum_b_marginals ? c_b.data() + static_cast<std::size_t>(b) * cells : nullptr;
            if constexpr (!weighted) {
                accumulate_counts(raw, max_n, s_ab, c_a, cb);
            } else {
                for (std::size_t i = 0; i < cells; ++i) {
                    const Count c = to_count<Count>(raw[i]);
                    if (c > Count{}) {
                        s_ab[i] += xlog2x(c);
                        c_a[i] += c;
                        if (cb) cb[i] += c;
                    }
                }
            }
        }
        for (std::size_t i = 0; i < cells; ++i) {
            s_a[i] += xlog2x(c_a[i]);
            total[i] += c_a[i];
        }
    }
    if (sum_b_marginals) {
        for (int b = 0; b < k_b; ++b) {
            const Count* cb = c_b.data() + static_cast<std::size_t>(b) * cells;
            for (std::size_t i = 0; i < cells; ++i) s_b[i] += xlog2x(cb[i]);
        }
    } else {
        const SpectrumCache ma(mask_a, box_a, layout.padded, SpectrumRole::reference);
        for (int b = 0; b < k_b; ++b) {
            correlate_window(ma, spec_b[static_cast<std::size_t>(b)], layout, raw);
            for (std::size_t i = 0; i < cells; ++i) s_b[i] += xlog2x(to_count<Count>(raw[i]));
        }
    }

    for (int i = 0; i < ws.height; ++i) {
        for (int j = 0; j < ws.width; ++j) {
            const std::size_t w = static_cast<std::size_t>(i) * static_cast<std::size_t>(ws.width) +
                                  static_cast<std::size_t>(j);
            const int r = base.row + i, c = base.col + j;
            const Count n = out.n(r, c);
            if constexpr (!weighted) {
                if (total[w] != n) {
                    throw numerical_health_error("cmif: marginal counts do not sum to the overlap count");
                }
            }
            if (!(static_cast<double>(n) > empty_below)) continue;
            const double nd = static_cast<double>(n);
            const double h_a = entropy_from_sum(nd, s_a[w]);
            const double h_b = entropy_from_sum(nd, s_b[w]);
            const double h_ab = entropy_from_sum(nd, s_ab[w]);
            out.mi(r, c) = h_a + h_b - h_ab;
            out.valid(r, c) = 1;
            if (res.entropies) {
                res.entropies->h_a(r, c) = h_a;
                res.entropies->h_b(r, c) = h_b;
                res.entropies->h_ab(r, c) = h_ab;
                res.entropies->valid(r, c) = 1;
            }
        }
    }
    return res;
}

inline void check_pair(const LabelImage& a, const Mask& ma, const LabelImage& b, const Mask& mb) {
    if (a.shape() != ma.shape()) throw std::invalid_argument("cmif: reference mask shape mismatch");
    if (b.shape() != mb.shape()) throw std::invalid_argument("cmif: floating mask shape mismatch");
}

// All-zero count map, for pairs where one mask is empty.
inline CountMap zero_counts(GridShape a, GridShape b) {
    const auto domain = DisplacementDomain::full(a, b);
    return {domain, Grid<std::uint32_t>(domain.extent, 0u)};
}

}  // namespace detail

inline CmifResult<std::uint32_t> cmif_compute(const LabelImage& a, const Mask& ma, const LabelImage& b,
                                              const Mask& mb, const CmifOptions& opt = {}) {
    detail::check_pair(a, ma, b, mb);
    return detail::stream_cmif<std::uint32_t>(
        a.shape(), a.k(), ma.grid(), [&](int l) { return level_set(a, l, ma); }, b.shape(), b.k(), mb.grid(),
        [&](int l) { return level_set(b, l, mb); }, opt);
}

inline CMIFMap cmif_map(const LabelImage& a, const Mask& ma, const LabelImage& b, const Mask& mb,
                        const CmifOptions& opt = {}) {
    return cmif_compute(a, ma, b, mb, opt).map;
}

// Spatially weighted MI: each pair of co-located pixels contributes
// W_A(x) * W_B(x + chi) to the histograms.
inline CmifResult<double> swmi_compute(const LabelImage& a, const WeightMask& wa, const LabelImage& b,
                                       const WeightMask& wb, const CmifOptions& opt = {}) {
    if (a.shape() != wa.shape() || b.shape() != wb.shape()) {
        throw std::invalid_argument("swmi: weight shape mismatch");
    }
    return detail::stream_cmif<double>(
        a.shape(), a.k(), wa.grid(), [&](int l) { return weighted_level_set(a, l, wa); }, b.shape(), b.k(),
        wb.grid(), [&](int l) { return weighted_level_set(b, l, wb); }, opt);
}

inline SWMIMap swmi_map(const LabelImage& a, const WeightMask& wa, const LabelImage& b, const WeightMask& wb,
                        const CmifOptions& opt = {}) {
    return swmi_compute(a, wa, b, wb, opt).map;
}

// N(chi) = CC(M_A, M_B)
inline CountMap overlap_map(const Mask& ma, const Mask& mb) {
    const auto domain = DisplacementDomain::full(ma.shape(), mb.shape());
    return round_counts(cross_correlate(ma.grid(), mb.grid()), domain);
}

// C_ab(chi) = CC(L_a[A], L_b[B]) for every (a, b).
inline JointCounts joint_count_maps(const LabelImage& a, const Mask& ma, const LabelImage& b, const Mask& mb) {
    detail::check_pair(a, ma, b, mb);
    JointCounts out{a.k(), b.k(), {}};
    const Box box_a = support_box(ma), box_b = support_box(mb);
    if (box_a.empty() || box_b.empty()) {
        out.maps.assign(static_cast<std::size_t>(a.k() * b.k()), detail::zero_counts(a.shape(), b.shape()));
        return out;
    }
    const auto layout = CorrelationLayout::make(a.shape(), box_a, b.shape(), box_b);
    std::vector<SpectrumCache> spec_b;
    for (int lb = 0; lb < b.k(); ++lb) {
        spec_b.emplace_back(level_set(b, lb, mb), box_b, layout.padded, SpectrumRole::floating);
    }
    for (int la = 0; la < a.k(); ++la) {
        const SpectrumCache fa(level_set(a, la, ma), box_a, layout.padded, SpectrumRole::reference);
        for (int lb = 0; lb < b.k(); ++lb) {
            out.maps.push_back(round_counts(correlate_cached(fa, spec_b[static_cast<std::size_t>(lb)], layout),
                                            layout.domain));
        }
    }
    return out;
}

// C_a(chi) = CC(L_a[A], M_B), C_b(chi) = CC(M_A, L_b[B]).
inline MarginalCounts marginal_count_maps(const LabelImage& a, const Mask& ma, const LabelImage& b,
                                          const Mask& mb) {
    detail::check_pair(a, ma, b, mb);
    MarginalCounts out;
    const Box box_a = support_box(ma), box_b = support_box(mb);
    if (box_a.empty() || box_b.empty()) {
        out.a.assign(static_cast<std::size_t>(a.k()), detail::zero_counts(a.shape(), b.shape()));
        out.b.assign(static_cast<std::size_t>(b.k()), detail::zero_counts(a.shape(), b.shape()));
        return out;
    }
    const auto layout = CorrelationLayout::make(a.shape(), box_a, b.shape(), box_b);
    const SpectrumCache sa(ma.grid(), box_a, layout.padded, SpectrumRole::reference);
    const SpectrumCache sb(mb.grid(), box_b, layout.padded, SpectrumRole::floating);
    for (int la = 0; la < a.k(); ++la) {
        const SpectrumCache f(level_set(a, la, ma), box_a, layout.padded, SpectrumRole::reference);
        out.a.push_back(round_counts(correlate_cached(f, sb, layout), layout.domain));
    }
    for (int lb = 0; lb < b.k(); ++lb) {
        const SpectrumCache g(level_set(b, lb, mb), box_b, layout.padded, SpectrumRole::floating);
        out.b.push_back(round_counts(correlate_cached(sa, g, layout), layout.domain));
    }
    return out;
}

// Shifted entropies from complete count families. Cells with N = 0 are invalid.
inline EntropyMaps entropy_maps(const JointCounts& joint, const MarginalCounts& marginals, const CountMap& n) {
    const auto& d = n.domain;
    const GridShape e = d.extent;
    auto same = [&](const CountMap& m) { return m.domain == d; };
    if (!std::all_of(joint.maps.begin(), joint.maps.end(), same) ||
        !std::all_of(marginals.a.begin(), marginals.a.end(), same) ||
        !std::all_of(marginals.b.begin(), marginals.b.end(), same)) {
        throw std::invalid_argument("entropy_maps: count maps over different domains");
    }
    EntropyMaps out{d, Grid<double>(e, 0.0), Grid<double>(e, 0.0), Grid<double>(e, 0.0),
                    Grid<std::uint8_t>(e, 0)};
    for (std::size_t i = 0; i < n.counts.size(); ++i) {
        const std::uint32_t total = n.counts[i];
        if (total == 0) continue;
        double s_a = 0.0, s_b = 0.0, s_ab = 0.0;
        for (const auto& m : marginals.a) s_a += detail::xlog2x(m.counts[i]);
        for (const auto& m : marginals.b) s_b += detail::xlog2x(m.counts[i]);
        for (const auto& m : joint.maps) s_ab += detail::xlog2x(m.counts[i]);
        const double nd = static_cast<double>(total);
        out.h_a[i] = detail::entropy_from_sum(nd, s_a);
        out.h_b[i] = detail::entropy_from_sum(nd, s_b);
        out.h_ab[i] = detail::entropy_from_sum(nd, s_ab);
        out.valid[i] = 1;
    }
    return out;
}

}  // namespace cmif
