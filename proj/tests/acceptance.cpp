// Acceptance suite: one PASS/FAIL line per criterion.
//
//   cmif_acceptance                  run every criterion
//   cmif_acceptance --criterion 4    run one
//
// Exit status is non-zero when any selected criterion fails.

#include "support.hpp"

#include <cmif/align.hpp>
#include <cmif/cmif.hpp>
#include <cmif/map_io.hpp>
#include <cmif/oracle.hpp>
#include <cmif/synth.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace cmif;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double max_mi_diff(const CMIFMap& a, const CMIFMap& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.mi.size(); ++i) {
        if (a.valid[i]) d = std::max(d, std::abs(a.mi[i] - b.mi[i]));
    }
    return d;
}

// 1. Count maps and MI of the correlation method equal the direct method.
Outcome oracle_equivalence() {
    std::mt19937_64 rng(1001);
    const int ks[] = {2, 4, 8};
    int count_failures = 0;
    double worst = 0.0;
    const auto t0 = Clock::now();
    for (int t = 0; t < 200; ++t) {
        const int ka = ks[t % 3], kb = ks[(t / 3) % 3];
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 32), ka);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 32), kb);
        const double pa = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
        const auto ma = fixtures::random_mask(rng, a.shape(), pa), mb = fixtures::random_mask(rng, b.shape(), 1.2 - pa);
        const auto direct = oracle::direct_cmif_map(a, ma, b, mb);
        const auto joint = joint_count_maps(a, ma, b, mb);
        const auto marg = marginal_count_maps(a, ma, b, mb);
        const auto n = overlap_map(ma, mb);
        const auto map = cmif_map(a, ma, b, mb);
        const bool counts_equal = joint.maps == direct.joint.maps && marg.a == direct.marginals.a &&
                                  marg.b == direct.marginals.b && n == direct.n && map.n == direct.map.n &&
                                  map.valid == direct.map.valid;
        if (!counts_equal) ++count_failures;
        worst = std::max(worst, max_mi_diff(map, direct.map));
    }
    const double secs = seconds_since(t0);
    return {count_failures == 0 && worst <= 1e-10 && secs < 60.0,
            fmt("200 instances, count mismatches %d, max |dMI| %.3g, %.1f s", count_failures, worst, secs)};
}

// 2. Relative-frequency MI form equals the entropy form used by cmif_map.
Outcome mi_identity() {
    std::mt19937_64 rng(1002);
    double worst = 0.0;
    int done = 0;
    while (done < 100) {
        const auto s = fixtures::random_shape(rng, 2, 24);
        const auto a = fixtures::random_labels(rng, s, 1 + done % 8);
        const auto b = fixtures::random_labels(rng, s, 1 + (done * 5) % 8);
        const auto ma = fixtures::random_mask(rng, s), mb = fixtures::random_mask(rng, s);
        const auto map = cmif_map(a, ma, b, mb);
        if (!map.is_valid({0, 0})) continue;
        worst = std::max(worst, std::abs(map.mi_at({0, 0}) - oracle::scalar_mi(a, ma, b, mb)));
        ++done;
    }
    return {worst < 1e-12, fmt("100 instances, max |difference| %.3g", worst)};
}

// 3. Integer shifts of a random label image are recovered exactly.
Outcome exact_translation() {
    std::mt19937_64 rng(1003);
    const GridShape s{128, 128};
    const int levels = 8;
    std::uniform_int_distribution<int> lab(0, levels - 1), shift(-32, 32);
    std::vector<double> base(s.size());
    for (auto& v : base) v = lab(rng);
    const IntensityImage a(s, 1, base);
    const Mask full(s);
    AlignmentConfig cfg;
    cfg.gamma = 0.5;
    cfg.angle_count = 1;
    cfg.refinement_count = 0;
    int recovered = 0;
    for (int t = 0; t < 50; ++t) {
        const Offset d{shift(rng), shift(rng)};
        // B(y) = A(y - d); pixels without a source get fresh random labels.
        std::vector<double> v(s.size());
        for (int r = 0; r < s.height; ++r) {
            for (int c = 0; c < s.width; ++c) {
                const int sr = r - d.row, sc = c - d.col;
                const bool inside = sr >= 0 && sc >= 0 && sr < s.height && sc < s.width;
                v[static_cast<std::size_t>(r * s.width + c)] = inside ? a.at(sr, sc) : lab(rng);
            }
        }
        const IntensityImage b(s, 1, std::move(v));
        const auto res = global_align(a, full, b, full, {RigidTransform::identity()}, cfg);
        if (res.displacement == d) ++recovered;
    }
    return {recovered == 50, fmt("%d/50 shifts recovered exactly", recovered)};
}

// Direct-method cross-check of one finished trial: recompute the CMIF map at
// the winning transform with both methods on the support crops, and confirm
// the gated optimum agrees.
bool validate_with_direct(const synth::PairSpec& spec, const AlignmentConfig& cfg, std::uint64_t seed,
                          const AlignmentResult& res, std::string& why) {
    const auto pair = synth::make_pair(spec, seed);
    const Mask m = make_circular_mask(spec.shape);
    AlignmentConfig c = cfg;
    c.seed = cfg.seed ^ seed;
    const auto prepared = prepare_alignment(pair.reference, m, pair.floating, m, c);
    const RigidTransform t = RigidTransform::rotation(res.angle, grid_center(spec.shape));
    const auto [frame, shape] = detail::warp_frame(spec.shape, t);
    const auto warped = warp_nn(prepared.floating, prepared.floating_mask,
                                compose(RigidTransform::translate({-double(frame.col), -double(frame.row)}), t), shape);

    auto crop = [](const LabelImage& l, const Mask& mk, Box b) {
        Grid<Label> g({b.height, b.width}, 0);
        Mask out({b.height, b.width}, false);
        for (int r = 0; r < b.height; ++r) {
            for (int col = 0; col < b.width; ++col) {
                const Label v = l(r + b.origin.row, col + b.origin.col);
                g(r, col) = v == LabelImage::kPadLabel ? 0 : v;
                out.set(r, col, mk(r + b.origin.row, col + b.origin.col));
            }
        }
        return std::pair{LabelImage(std::move(g), l.k()), std::move(out)};
    };
    const Box ba = support_box(prepared.reference.mask), bb = support_box(warped.mask);
    const auto [la, ma] = crop(prepared.reference.labels, prepared.reference.mask, ba);
    const auto [lb, mb] = crop(warped.labels, warped.mask, bb);
    const auto direct = oracle::direct_cmif_map(la, ma, lb, mb, false).map;
    const auto fast = cmif_map(la, ma, lb, mb);
    if (fast.n != direct.n || fast.valid != direct.valid) {
        why = "count planes differ";
        return false;
    }
    if (max_mi_diff(fast, direct) > 1e-10) {
        why = fmt("MI differs by %.3g", max_mi_diff(fast, direct));
        return false;
    }
    const auto best = gated_argmax(direct, cfg.gamma);
    // chi in crop coordinates -> chi in padded coordinates.
    const Offset chi = best.chi + bb.origin - ba.origin;
    const Offset disp = frame + chi + prepared.reference.pad;
    if (disp != res.displacement || std::abs(best.mi - res.mi) > 1e-10) {
        why = "gated optimum differs from the pipeline result";
        return false;
    }
    return true;
}

// 4. Synthetic multimodal rigid recovery.
int synthetic_trials = 50;

Outcome synthetic_recovery() {
    synth::PairSpec spec;
    spec.shape = {256, 256};
    spec.modality = synth::Modality::gamma_remap;
    spec.label_noise = 0.05;
    AlignmentConfig cfg;
    cfg.gamma = 0.5;
    cfg.angle_count = 100;
    cfg.refinement_count = 32;
    cfg.kmeans = {16, 100, 100, 0};
    const int trials = synthetic_trials, validated = std::min(5, trials);
    int success = 0, agree = 0;
    double err_sum = 0.0;
    std::string why;
    const auto t0 = Clock::now();
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(t);
        const auto rec = synth::run_trial(spec, cfg, seed);
        success += rec.success ? 1 : 0;
        err_sum += rec.corner_error;
        std::printf("  trial %2d  corner error %7.3f px  %s  (%.1f s)\n", t, rec.corner_error,
                    rec.success ? "ok" : "FAILED", rec.seconds);
        if (t < validated) {
            std::string w;
            if (validate_with_direct(spec, cfg, seed, rec.estimate, w)) {
                ++agree;
            } else {
                why = w;
            }
        }
        std::fflush(stdout);
    }
    const double rate = static_cast<double>(success) / trials;
    return {trials >= 50 && rate >= 0.9 && agree == validated,
            fmt("success %d/%d (%.0f%%), mean corner error %.2f px, direct-method check %d/%d%s%s, %.0f s", success,
                trials, 100.0 * rate, err_sum / trials, agree, validated, why.empty() ? "" : ": ", why.c_str(),
                seconds_since(t0))};
}

template <typename F>
double time_once(F&& f) {
    const auto t0 = Clock::now();
    f();
    return seconds_since(t0);
}

// 5. Correlation method vs direct method wall-clock.
Outcome speedup() {
    std::mt19937_64 rng(1005);
    const double budget = 600.0;
    std::string detail;
    bool pass = true;
    double direct_prev = 0.0;
    int prev_size = 0;
    for (int size : {512, 1024}) {
        const double required = size == 512 ? 10.0 : 50.0;
        const GridShape sa{size, size}, sb{size / 2, size / 2};
        const auto a = fixtures::random_labels(rng, sa, 8), b = fixtures::random_labels(rng, sb, 8);
        const Mask ma(sa), mb(sb);
        cmif_map(a, ma, b, mb);  // plan creation is not part of the measurement
        CMIFMap fast;
        const double t_fft = time_once([&] { fast = cmif_map(a, ma, b, mb); });
        // Direct cost grows with |A| * |B|.
        const double projected =
            prev_size ? direct_prev * std::pow(static_cast<double>(size) / prev_size, 4.0) : 0.0;
        if (projected > budget) {
            detail += fmt("size %d: fft %.2f s, direct projected %.0f s > %.0f s budget (budget-exceeded); ", size,
                          t_fft, projected, budget);
            continue;
        }
        CMIFMap slow;
        const double t_direct = time_once([&] { slow = oracle::direct_cmif_map(a, ma, b, mb, false).map; });
        const auto cmp = compare_maps(fast, slow);
        const bool same = cmp.n_identical && cmp.valid_identical && cmp.max_mi_difference <= 1e-10;
        const double ratio = t_direct / t_fft;
        const bool ok = same && (ratio >= required || t_direct > budget);
        pass = pass && ok;
        detail += fmt("size %d: fft %.2f s, direct %.1f s, speedup %.0fx (need %.0fx)%s; ", size, t_fft, t_direct,
                      ratio, required, same ? "" : " MAPS DIFFER");
        direct_prev = t_direct;
        prev_size = size;
        std::printf("  %s\n", detail.c_str());
        std::fflush(stdout);
    }
    return {pass, detail};
}

// 6. Time vs label count follows the 1 + 2k + k^2 transform count.
Outcome scaling_law() {
    std::mt19937_64 rng(1006);
    const GridShape sa{256, 256}, sb{128, 128};
    const Mask ma(sa), mb(sb);
    std::vector<double> xs, ys;
    std::string detail;
    for (int k : {2, 4, 8, 16, 32}) {
        const auto a = fixtures::random_labels(rng, sa, k), b = fixtures::random_labels(rng, sb, k);
        cmif_map(a, ma, b, mb);
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep) best = std::min(best, time_once([&] { cmif_map(a, ma, b, mb); }));
        xs.push_back(std::log(1.0 + 2.0 * k + double(k) * k));
        ys.push_back(std::log(best));
        detail += fmt("k=%d %.3fs ", k, best);
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope >= 0.5 && slope <= 2.0, fmt("log-log slope %.3f (accepted [0.5, 2]); %s", slope, detail.c_str())};
}

// 7. Unit weights on the mask support reproduce binary-mask MI.
Outcome swmi_degeneration() {
    std::mt19937_64 rng(1007);
    double worst = 0.0;
    int mismatched_validity = 0;
    for (int t = 0; t < 50; ++t) {
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 24), 1 + t % 6);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 24), 1 + (t / 6) % 6);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        const auto bin = cmif_map(a, ma, b, mb);
        const auto sw = swmi_map(a, WeightMask::from_mask(ma), b, WeightMask::from_mask(mb));
        for (std::size_t i = 0; i < bin.mi.size(); ++i) {
            if (bin.valid[i] != sw.valid[i]) {
                ++mismatched_validity;
                continue;
            }
            if (bin.valid[i]) worst = std::max(worst, std::abs(bin.mi[i] - sw.mi[i]));
        }
    }
    return {worst < 1e-9 && mismatched_validity == 0,
            fmt("50 instances, max |dMI| %.3g, validity mismatches %d", worst, mismatched_validity)};
}

// 8. Randomized invariants, each over at least 100 cases.
Outcome property_suite() {
    std::mt19937_64 rng(1008);
    const int cases = 100;
    int bound_fail = 0, marginal_fail = 0, perm_fail = 0, gate_fail = 0, det_fail = 0;

    for (int t = 0; t < cases; ++t) {
        const int ka = 1 + t % 6, kb = 1 + (t / 6) % 6;
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 16), ka);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 16), kb);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());

        CmifOptions opt;
        opt.keep_entropies = true;
        const auto r = cmif_compute(a, ma, b, mb, opt);
        const auto& e = *r.entropies;
        for (std::size_t i = 0; i < r.map.mi.size(); ++i) {
            if (!r.map.valid[i]) continue;
            if (r.map.mi[i] < -1e-12 || r.map.mi[i] > std::min(e.h_a[i], e.h_b[i]) + 1e-12) {
                ++bound_fail;
                break;
            }
        }

        const auto marg = marginal_count_maps(a, ma, b, mb);
        const auto n = overlap_map(ma, mb);
        for (std::size_t i = 0; i < n.counts.size(); ++i) {
            std::uint32_t sa = 0, sb = 0;
            for (const auto& m : marg.a) sa += m.counts[i];
            for (const auto& m : marg.b) sb += m.counts[i];
            if (sa != n.counts[i] || sb != n.counts[i]) {
                ++marginal_fail;
                break;
            }
        }

        std::vector<int> pa(static_cast<std::size_t>(ka)), pb(static_cast<std::size_t>(kb));
        std::iota(pa.begin(), pa.end(), 0);
        std::iota(pb.begin(), pb.end(), 0);
        std::shuffle(pa.begin(), pa.end(), rng);
        std::shuffle(pb.begin(), pb.end(), rng);
        const auto permuted = cmif_map(fixtures::relabel(a, pa), ma, fixtures::relabel(b, pb), mb);
        if (permuted.valid != r.map.valid || max_mi_diff(r.map, permuted) > 1e-12) ++perm_fail;

        if (std::any_of(r.map.valid.data().begin(), r.map.valid.data().end(), [](auto v) { return v != 0; })) {
            double prev = 1e300;
            for (double g : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
                const double mi = gated_argmax(r.map, g).mi;
                if (mi > prev) {
                    ++gate_fail;
                    break;
                }
                prev = mi;
            }
        }
    }

    // Determinism of quantization and alignment under fixed seeds.
    for (int t = 0; t < cases; ++t) {
        const GridShape s = fixtures::random_shape(rng, 8, 16);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> va(s.size()), vb(s.size());
        for (auto& v : va) v = u(rng);
        for (auto& v : vb) v = u(rng);
        const IntensityImage ia(s, 1, va), ib(s, 1, vb);
        const Mask m = make_circular_mask(s);
        AlignmentConfig cfg;
        cfg.angle_count = 4;
        cfg.refinement_count = 2;
        cfg.kmeans = {4, 20, 3, 0};
        cfg.seed = static_cast<std::uint64_t>(t);
        const auto r1 = rigid_align(ia, m, ib, m, cfg);
        const auto r2 = rigid_align(ia, m, ib, m, cfg);
        if (r1.mi != r2.mi || r1.displacement != r2.displacement || r1.n_at_opt != r2.n_at_opt ||
            r1.transform.angle != r2.transform.angle) {
            ++det_fail;
        }
    }

    const int total = bound_fail + marginal_fail + perm_fail + gate_fail + det_fail;
    return {total == 0, fmt("%d cases each; failures: bounds %d, marginal sums %d, permutation %d, gate monotonicity "
                            "%d, determinism %d",
                            cases, bound_fail, marginal_fail, perm_fail, gate_fail, det_fail)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CMIF acceptance suite"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
    app.add_option("--trials", synthetic_trials, "Trials for criterion 4 (quick checks; the criterion needs 50)")
        ->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"relative-frequency vs entropy MI", mi_identity},
        {"exact translation recovery", exact_translation},
        {"synthetic multimodal rigid recovery", synthetic_recovery},
        {"speedup over the direct method", speedup},
        {"label-count scaling law", scaling_law},
        {"SWMI degeneration", swmi_degeneration},
        {"property suite", property_suite},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && static_cast<int>(i) + 1 != only) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %zu (%s): %s - %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
