#pragma once

// Linear cross-correlation of non-negative grids through FFTW:
//   out(chi) = sum_x f(x) g(x + chi)
// for every chi of the full displacement domain. Inputs are cropped to their
// support and zero-padded so circular wrap-around never reaches the
// displacements that are read back.

#include <cmif/core.hpp>
#include <cmif/error.hpp>

#include <fftw3.h>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cmif {

// Integer counts over a displacement domain.
struct CountMap {
    DisplacementDomain domain{};
    Grid<std::uint32_t> counts;

    std::uint32_t at(Offset chi) const {
        const Offset c = domain.cell(chi);
        return counts(c.row, c.col);
    }
    friend bool operator==(const CountMap&, const CountMap&) = default;
};

// Inclusive rectangle of displacements.
struct DisplacementWindow {
    Offset lo{};
    Offset hi{};
    bool empty() const noexcept { return hi.row < lo.row || hi.col < lo.col; }
    GridShape shape() const noexcept { return {hi.row - lo.row + 1, hi.col - lo.col + 1}; }
    bool contains(Offset chi) const noexcept {
        return chi.row >= lo.row && chi.row <= hi.row && chi.col >= lo.col && chi.col <= hi.col;
    }
};

inline DisplacementWindow full_window(const DisplacementDomain& d) {
    return {d.origin, d.origin + Offset{d.extent.height - 1, d.extent.width - 1}};
}

inline DisplacementWindow intersect(const DisplacementWindow& a, const DisplacementWindow& b) {
    return {{std::max(a.lo.row, b.lo.row), std::max(a.lo.col, b.lo.col)},
            {std::min(a.hi.row, b.hi.row), std::min(a.hi.col, b.hi.col)}};
}

// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
inline int next_smooth_size(int n) {
    if (n <= 1) return 1;
    for (int m = n;; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7}) {
            while (r % p == 0) r /= p;
        }
        if (r == 1) return m;
    }
}

// Transform invocation counts, for instrumentation and tests.
struct TransformCounters {
    std::atomic<std::uint64_t> forward{0};
    std::atomic<std::uint64_t> inverse{0};
    void reset() {
        forward = 0;
        inverse = 0;
    }
};

inline TransformCounters& transform_counters() {
    static TransformCounters counters;
    return counters;
}

namespace detail {

template <typename T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() = default;
    template <typename U>
    FftwAllocator(const FftwAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) {
        void* p = fftw_malloc(n * sizeof(T));
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
    template <typename U>
    bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using fftw_vector = std::vector<T, FftwAllocator<T>>;

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
    PlanPair() = default;
    PlanPair(const PlanPair&) = delete;
    PlanPair& operator=(const PlanPair&) = delete;
    ~PlanPair() {
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

// The FFTW planner is not thread-safe; execution with the new-array API is.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

inline const PlanPair& plans_for(GridShape padded) {
    static std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> cache;
    std::lock_guard lock(planner_mutex());
    auto& slot = cache[{padded.height, padded.width}];
    if (!slot) {
        const int n0 = padded.height, n1 = padded.width;
        const std::size_t real_n = padded.size();
        const std::size_t cplx_n = static_cast<std::size_t>(n0) * static_cast<std::size_t>(n1 / 2 + 1);
        fftw_vector<double> real(real_n);
        fftw_vector<std::complex<double>> cplx(cplx_n);
        const unsigned flags = real_n >= 128u * 128u ? FFTW_MEASURE : FFTW_ESTIMATE;
        auto plans = std::make_unique<PlanPair>();
        auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
        plans->forward = fftw_plan_dft_r2c_2d(n0, n1, real.data(), c, flags);
        plans->inverse = fftw_plan_dft_c2r_2d(n0, n1, c, real.data(), flags | FFTW_DESTROY_INPUT);
        if (!plans->forward || !plans->inverse) throw std::runtime_error("fftw: planning failed");
        slot = std::move(plans);
    }
    return *slot;
}

inline int mod(int a, int n) {
    const int r = a % n;
    return r < 0 ? r + n : r;
}

}  // namespace detail

enum class SpectrumRole { reference, floating };

// Forward transform of a zero-padded grid, restricted to a support box of the
// source grid. Reference-role spectra are conjugated when multiplied.
class SpectrumCache {
public:
    SpectrumCache() = default;

    template <typename T>
    SpectrumCache(const Grid<T>& source, Box crop, GridShape padded, SpectrumRole role)
        : source_shape_(source.shape()), crop_(crop), padded_(padded), role_(role) {
        if (crop.height > padded.height || crop.width > padded.width) {
            throw std::invalid_argument("spectrum: crop larger than padded extent");
        }
        if (crop.empty()) return;
        const auto& plans = detail::plans_for(padded);
        detail::fftw_vector<double> real(padded.size(), 0.0);
        for (int r = 0; r < crop.height; ++r) {
            for (int c = 0; c < crop.width; ++c) {
                real[static_cast<std::size_t>(r) * static_cast<std::size_t>(padded.width) +
                     static_cast<std::size_t>(c)] =
                    static_cast<double>(source(r + crop.origin.row, c + crop.origin.col));
            }
        }
        coeffs_.resize(static_cast<std::size_t>(padded.height) *
                       static_cast<std::size_t>(padded.width / 2 + 1));
        fftw_execute_dft_r2c(plans.forward, real.data(), reinterpret_cast<fftw_complex*>(coeffs_.data()));
        ++transform_counters().forward;
    }

    GridShape source_shape() const noexcept { return source_shape_; }
    Box crop() const noexcept { return crop_; }
    GridShape padded() const noexcept { return padded_; }
    SpectrumRole role() const noexcept { return role_; }
    bool zero() const noexcept { return crop_.empty(); }
    std::span<const std::complex<double>> coefficients() const noexcept { return coeffs_; }

private:
    GridShape source_shape_{};
    Box crop_{};
    GridShape padded_{};
    SpectrumRole role_ = SpectrumRole::reference;
    detail::fftw_vector<std::complex<double>> coeffs_;
};

// Geometry shared by all correlations between one reference support and one
// floating support: the full displacement domain, the window of displacements
// read back, and a transform extent large enough that the window is alias-free.
struct CorrelationLayout {
    DisplacementDomain domain{};
    DisplacementWindow window{};
    Box reference_box{};
    Box floating_box{};
    GridShape padded{1, 1};

    static CorrelationLayout make(GridShape reference, Box reference_box, GridShape floating,
                                  Box floating_box,
                                  std::optional<DisplacementWindow> requested = std::nullopt) {
        CorrelationLayout l;
        l.domain = DisplacementDomain::full(reference, floating);
        l.reference_box = reference_box;
        l.floating_box = floating_box;
        DisplacementWindow w = requested ? intersect(*requested, full_window(l.domain)) : full_window(l.domain);
        if (reference_box.empty() || floating_box.empty()) {
            l.window = {{0, 0}, {-1, -1}};
            return l;
        }
        // chi' = chi + o_ref - o_flt in cropped coordinates; nonzero for
        // chi' in [-(h_ref - 1), h_flt - 1] per axis.
        const Offset shift = reference_box.origin - floating_box.origin;
        const DisplacementWindow support{{-(reference_box.height - 1) - shift.row, -(reference_box.width - 1) - shift.col},
                                         {floating_box.height - 1 - shift.row, floating_box.width - 1 - shift.col}};
        l.window = intersect(w, support);
        if (l.window.empty()) return l;
        const Offset lo = l.window.lo + shift, hi = l.window.hi + shift;
        const int need_r = std::max(hi.row + reference_box.height - 1, floating_box.height - 1 - lo.row) + 1;
        const int need_c = std::max(hi.col + reference_box.width - 1, floating_box.width - 1 - lo.col) + 1;
        l.padded = {next_smooth_size(std::max({need_r, reference_box.height, floating_box.height})),
                    next_smooth_size(std::max({need_c, reference_box.width, floating_box.width}))};
        return l;
    }

    bool empty() const noexcept { return window.empty(); }
    GridShape window_shape() const noexcept { return window.shape(); }
};

namespace detail {

struct CorrelationScratch {
    fftw_vector<std::complex<double>> product;
    fftw_vector<double> real;
};

inline CorrelationScratch& scratch_for(GridShape padded) {
    thread_local CorrelationScratch s;
    const std::size_t cplx_n = static_cast<std::size_t>(padded.height) *
                               static_cast<std::size_t>(padded.width / 2 + 1);
    if (s.product.size() < cplx_n) s.product.resize(cplx_n);
    if (s.real.size() < padded.size()) s.real.resize(padded.size());
    return s;
}

}  // namespace detail

// Correlates two cached spectra and writes the layout's window (row-major,
// window_shape()) into `out`.
inline void correlate_window(const SpectrumCache& ref, const SpectrumCache& flt, const CorrelationLayout& layout,
                             std::span<double> out) {
    if (ref.role() != SpectrumRole::reference || flt.role() != SpectrumRole::floating) {
        throw std::invalid_argument("correlate: expected (reference, floating) spectra");
    }
    if (layout.empty()) return;
    if (ref.padded() != layout.padded || flt.padded() != layout.padded) {
        throw std::invalid_argument("correlate: spectrum extent does not match layout");
    }
    const GridShape ws = layout.window_shape();
    if (out.size() != ws.size()) throw std::invalid_argument("correlate: output size mismatch");
    if (ref.zero() || flt.zero()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const GridShape padded = layout.padded;
    auto& s = detail::scratch_for(padded);
    const auto a = ref.coefficients();
    const auto b = flt.coefficients();
    for (std::size_t i = 0; i < a.size(); ++i) s.product[i] = std::conj(a[i]) * b[i];
    fftw_execute_dft_c2r(detail::plans_for(padded).inverse, reinterpret_cast<fftw_complex*>(s.product.data()),
                         s.real.data());
    ++transform_counters().inverse;

    const double scale = 1.0 / static_cast<double>(padded.size());
    const Offset shift = ref.crop().origin - flt.crop().origin;
    for (int i = 0; i < ws.height; ++i) {
        const int rr = detail::mod(layout.window.lo.row + i + shift.row, padded.height);
        const double* row = s.real.data() + static_cast<std::size_t>(rr) * static_cast<std::size_t>(padded.width);
        double* dst = out.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(ws.width);
        int cc = detail::mod(layout.window.lo.col + shift.col, padded.width);
        for (int j = 0; j < ws.width; ++j) {
            dst[j] = row[cc] * scale;
            if (++cc == padded.width) cc = 0;
        }
    }
}

// Full-domain correlation of two cached spectra; cells outside the layout's
// window are zero.
inline Grid<double> correlate_cached(const SpectrumCache& ref, const SpectrumCache& flt,
                                     const CorrelationLayout& layout) {
    Grid<double> out(layout.domain.extent, 0.0);
    if (layout.empty()) return out;
    const GridShape ws = layout.window_shape();
    std::vector<double> win(ws.size());
    correlate_window(ref, flt, layout, win);
    const Offset base = layout.domain.cell(layout.window.lo);
    for (int i = 0; i < ws.height; ++i) {
        for (int j = 0; j < ws.width; ++j) {
            out(base.row + i, base.col + j) = win[static_cast<std::size_t>(i) * static_cast<std::size_t>(ws.width) +
                                                  static_cast<std::size_t>(j)];
        }
    }
    return out;
}

template <typename T>
void require_nonnegative(const Grid<T>& g, const char* what) {
    for (const T& v : g.data()) {
        if (!(static_cast<double>(v) >= 0.0) || !std::isfinite(static_cast<double>(v))) {
            throw std::invalid_argument(std::string(what) + ": values must be finite and non-negative");
        }
    }
}

// out(chi) = sum_x f(x) g(x + chi) over DisplacementDomain::full(f, g).
template <typename T, typename U>
Grid<double> cross_correlate(const Grid<T>& f, const Grid<U>& g) {
    if (f.size() == 0 || g.size() == 0) throw std::invalid_argument("cross_correlate: empty grid");
    require_nonnegative(f, "cross_correlate");
    require_nonnegative(g, "cross_correlate");
    const Box fb = support_box(f), gb = support_box(g);
    const auto layout = CorrelationLayout::make(f.shape(), fb, g.shape(), gb);
    if (layout.empty()) return Grid<double>(layout.domain.extent, 0.0);
    const SpectrumCache fs(f, fb, layout.padded, SpectrumRole::reference);
    const SpectrumCache gs(g, gb, layout.padded, SpectrumRole::floating);
    return correlate_cached(fs, gs, layout);
}

// Residual above which a correlation of 0/1 grids is no longer trusted.
inline constexpr double kRoundingTolerance = 0.25;

inline std::uint32_t round_count(double raw) {
    const double r = std::nearbyint(raw);
    if (!(std::abs(raw - r) < kRoundingTolerance)) {
        throw numerical_health_error("round_counts: residual " + std::to_string(std::abs(raw - r)) +
                                     " at value " + std::to_string(raw) +
                                     "; transform precision insufficient for this image size");
    }
    return r <= 0.0 ? 0u : static_cast<std::uint32_t>(r);
}

inline CountMap round_counts(const Grid<double>& raw, const DisplacementDomain& domain) {
    if (raw.shape() != domain.extent) throw std::invalid_argument("round_counts: shape does not match domain");
    CountMap m{domain, Grid<std::uint32_t>(raw.shape(), 0u)};
    for (std::size_t i = 0; i < raw.size(); ++i) m.counts[i] = round_count(raw[i]);
    return m;
}

}  // namespace cmif
