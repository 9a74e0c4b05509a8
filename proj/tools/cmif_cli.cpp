// cmif: alignment runs, CMIF-map dumps, benchmark sweeps and synthetic evaluation.
//
// Exit codes: 0 ok, 1 I/O error, 2 degenerate or invalid input,
// 3 numerical-health failure (including cross-method checksum mismatches).

#include "raster.hpp"

#include <cmif/align.hpp>
#include <cmif/cmif.hpp>
#include <cmif/error.hpp>
#include <cmif/map_io.hpp>
#include <cmif/oracle.hpp>
#include <cmif/serialize.hpp>
#include <cmif/synth.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace cmif;
using Clock = std::chrono::steady_clock;

constexpr int kExitIo = 1;
constexpr int kExitDegenerate = 2;
constexpr int kExitNumerical = 3;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct QuantizerOptions {
    int k = 16;
    int batch = 1000;
    int iter = 25;
    std::uint64_t seed = 0;
};

void add_quantizer_options(CLI::App* app, QuantizerOptions& q) {
    app->add_option("--k", q.k, "Number of k-means labels per image")->check(CLI::Range(2, 65534))->capture_default_str();
    app->add_option("--batch", q.batch, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--iter", q.iter, "Passes over the masked pixels")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--seed", q.seed, "Random seed")->capture_default_str();
}

void apply_threads(int threads) {
#if defined(_OPENMP)
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw tools::io_error("cannot open '" + path + "' for writing");
    return os;
}

void write_text(const std::string& path, const std::string& text) {
    auto os = open_out(path);
    os << text;
    if (!os) throw tools::io_error("write to '" + path + "' failed");
}

Mask make_mask(const std::string& kind, const std::string& file, GridShape shape) {
    if (!file.empty()) {
        Mask m = tools::read_mask(file);
        if (m.shape() != shape) throw std::invalid_argument("mask '" + file + "' does not match its image");
        return m;
    }
    return kind == "circular" ? make_circular_mask(shape) : Mask(shape, true);
}

// ---------------------------------------------------------------- align

struct AlignArgs {
    std::string ref, flt, out, overlay, ref_mask, flt_mask;
    std::string mask = "full";
    std::string timing = "pipeline";
    QuantizerOptions q;
    int angles = 200;
    int refine = 32;
    double gamma = 0.5;
    int threads = 0;
};

// Reference in green, warped floating image in magenta.
void write_overlay(const std::string& path, const IntensityImage& a, const IntensityImage& b,
                   const RigidTransform& t) {
    auto to_byte = [](const IntensityImage& img) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            lo = std::min(lo, img.pixel(i)[0]);
            hi = std::max(hi, img.pixel(i)[0]);
        }
        const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
        Grid<std::uint8_t> g(img.shape(), 0);
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            g[i] = static_cast<std::uint8_t>(std::lround((img.pixel(i)[0] - lo) * scale));
        }
        return g;
    };
    const auto ga = to_byte(a), gb = to_byte(b);
    const RigidTransform inv = t.inverse();
    Grid<std::uint8_t> warped(a.shape(), 0);
    for (int r = 0; r < a.shape().height; ++r) {
        for (int c = 0; c < a.shape().width; ++c) {
            const Vec2 p = inv({double(c), double(r)});
            const int sr = static_cast<int>(std::floor(p.y + 0.5)), sc = static_cast<int>(std::floor(p.x + 0.5));
            if (gb.contains(sr, sc)) warped(r, c) = gb(sr, sc);
        }
    }
    tools::write_rgb(path, warped, ga, warped);
}

int run_align(const AlignArgs& args) {
    apply_threads(args.threads);
    const auto a = tools::read_image(args.ref);
    const auto b = tools::read_image(args.flt);
    const Mask ma = make_mask(args.mask, args.ref_mask, a.shape());
    const Mask mb = make_mask(args.mask, args.flt_mask, b.shape());
    AlignmentConfig cfg;
    cfg.gamma = args.gamma;
    cfg.angle_count = args.angles;
    cfg.refinement_count = args.refine;
    cfg.kmeans = {args.q.k, args.q.batch, args.q.iter, 0};
    cfg.seed = args.q.seed;

    const auto t0 = Clock::now();
    const auto prepared = prepare_alignment(a, ma, b, mb, cfg);
    const auto t1 = Clock::now();
    const Vec2 center = grid_center(b.shape());
    const auto grid = align_prepared(prepared, make_angle_grid(cfg.angle_count, center));
    const auto result = refine(grid, cfg.angle_count, cfg.refinement_count, cfg.seed + 2, prepared, center);
    const double seconds = args.timing == "map" ? seconds_since(t1) : seconds_since(t0);

    auto j = to_json(result, cfg);
    j["k_effective"] = {prepared.reference_model.k(), prepared.floating_model.k()};
    j["wall_time_s"] = seconds;
    j["timing"] = args.timing;
    j["inputs"] = {{"reference", args.ref}, {"floating", args.flt}, {"mask", args.mask},
                   {"reference_mask", args.ref_mask}, {"floating_mask", args.flt_mask}};
    j["threads"] = args.threads;
    const std::string text = j.dump(2) + "\n";
    if (args.out.empty()) {
        std::cout << text;
    } else {
        write_text(args.out, text);
    }
    if (!args.overlay.empty()) write_overlay(args.overlay, a, b, result.transform);
    return 0;
}

// ---------------------------------------------------------------- cmif-map

struct MapArgs {
    std::string ref, flt, out, method = "fft", ref_mask, flt_mask, mask = "full";
    QuantizerOptions q;
    bool csv = false;
    int threads = 0;
};

int run_cmif_map(const MapArgs& args) {
    apply_threads(args.threads);
    const auto a = tools::read_image(args.ref);
    const auto b = tools::read_image(args.flt);
    const Mask ma = make_mask(args.mask, args.ref_mask, a.shape());
    const Mask mb = make_mask(args.mask, args.flt_mask, b.shape());
    const auto la = quantize(a, fit_kmeans(a, ma, args.q.k, args.q.batch, args.q.iter, args.q.seed));
    const auto lb = quantize(b, fit_kmeans(b, mb, args.q.k, args.q.batch, args.q.iter, args.q.seed + 1));
    const auto t0 = Clock::now();
    const CMIFMap map = args.method == "direct" ? oracle::direct_cmif_map(la, ma, lb, mb, false).map
                                                : cmif_map(la, ma, lb, mb);
    const double seconds = seconds_since(t0);
    if (args.csv) {
        auto os = open_out(args.out);
        write_map_csv(os, map);
        if (!os) throw tools::io_error("write to '" + args.out + "' failed");
    } else {
        try {
            save_map(args.out, map);
        } catch (const std::runtime_error& e) {
            throw tools::io_error(e.what());
        }
    }
    std::fprintf(stderr, "%s map %dx%d (k %d/%d) in %.3f s, checksum %016llx\n", args.method.c_str(),
                 map.domain.extent.height, map.domain.extent.width, la.k(), lb.k(), seconds,
                 static_cast<unsigned long long>(count_checksum(map)));
    return 0;
}

// ---------------------------------------------------------------- map-diff

int run_map_diff(const std::string& first, const std::string& second, double tolerance) {
    CMIFMap a, b;
    try {
        a = load_map(first);
        b = load_map(second);
    } catch (const map_format_error&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw tools::io_error(e.what());
    }
    const auto cmp = compare_maps(a, b);
    std::printf("same_domain %d\nn_identical %d\nvalid_identical %d\nmax_mi_difference %.17g\n", cmp.same_domain,
                cmp.n_identical, cmp.valid_identical, cmp.max_mi_difference);
    const bool equal = cmp.same_domain && cmp.n_identical && cmp.valid_identical && cmp.max_mi_difference <= tolerance;
    std::printf("%s\n", equal ? "equal" : "DIFFERENT");
    return equal ? 0 : kExitNumerical;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::string sizes = "128..1024";
    std::vector<int> ks{2, 4, 8, 16};
    std::vector<std::string> methods{"fft", "direct"};
    double budget = 60.0;
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
};

std::vector<int> parse_sizes(const std::string& s) {
    std::vector<int> out;
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
        const int lo = std::stoi(s.substr(0, dots)), hi = std::stoi(s.substr(dots + 2));
        if (lo < 2 || hi < lo) throw std::invalid_argument("bad size range '" + s + "'");
        for (int v = lo; v <= hi; v *= 2) out.push_back(v);
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const int v = std::stoi(item);
        if (v < 2) throw std::invalid_argument("sizes must be >= 2");
        out.push_back(v);
    }
    return out;
}

struct BenchRecord {
    std::string method;
    int ref_size = 0;
    int float_size = 0;
    int k = 0;
    double wall_time = 0.0;
    std::uint64_t transforms = 0;
    std::uint64_t checksum = 0;
    std::string status = "ok";
};

int run_bench(const BenchArgs& args) {
    apply_threads(args.threads);
    const auto sizes = parse_sizes(args.sizes);
    std::vector<BenchRecord> records;
    bool mismatch = false;
    std::ostringstream csv;
    csv << "method,ref_size,float_size,k,wall_time_s,transforms_count,checksum,status\n";
    auto emit = [&](const BenchRecord& r) {
        char line[256];
        std::snprintf(line, sizeof line, "%s,%d,%d,%d,%.6f,%llu,%016llx,%s\n", r.method.c_str(), r.ref_size,
                      r.float_size, r.k, r.wall_time, static_cast<unsigned long long>(r.transforms),
                      static_cast<unsigned long long>(r.checksum), r.status.c_str());
        csv << line;
        std::fputs(line, stderr);
        records.push_back(r);
    };
    // Last measured direct time per k, and the size it was measured at.
    std::map<int, std::pair<double, int>> direct_last;
    for (int size : sizes) {
        for (int k : args.ks) {
            std::mt19937_64 rng(args.seed ^ (static_cast<std::uint64_t>(size) << 20) ^ static_cast<std::uint64_t>(k));
            const GridShape sa{size, size}, sb{size / 2, size / 2};
            auto random_labels = [&](GridShape s) {
                std::uniform_int_distribution<int> d(0, k - 1);
                Grid<Label> g(s, 0);
                for (auto& v : g.data()) v = static_cast<Label>(d(rng));
                return LabelImage(std::move(g), k);
            };
            const auto a = random_labels(sa), b = random_labels(sb);
            const Mask ma(sa), mb(sb);
            std::optional<CMIFMap> fft_map, direct_map;
            for (const auto& method : args.methods) {
                BenchRecord r{method, size, size / 2, k};
                if (method == "fft") {
                    cmif_map(a, ma, b, mb);  // warm the transform planner
                    transform_counters().reset();
                    const auto t0 = Clock::now();
                    fft_map = cmif_map(a, ma, b, mb);
                    r.wall_time = seconds_since(t0);
                    r.transforms = transform_counters().forward + transform_counters().inverse;
                    r.checksum = count_checksum(*fft_map);
                } else if (method == "direct") {
                    const auto it = direct_last.find(k);
                    if (it != direct_last.end()) {
                        // Direct cost grows with |A| * |B|.
                        const double projected =
                            it->second.first * std::pow(static_cast<double>(size) / it->second.second, 4.0);
                        if (projected > args.budget) {
                            r.status = "budget-exceeded";
                            r.wall_time = projected;
                            emit(r);
                            continue;
                        }
                    }
                    const auto t0 = Clock::now();
                    direct_map = oracle::direct_cmif_map(a, ma, b, mb, false).map;
                    r.wall_time = seconds_since(t0);
                    r.checksum = count_checksum(*direct_map);
                    direct_last[k] = {r.wall_time, size};
                } else {
                    throw std::invalid_argument("unknown method '" + method + "'");
                }
                emit(r);
            }
            if (fft_map && direct_map) {
                const auto cmp = compare_maps(*fft_map, *direct_map);
                if (!cmp.n_identical || !cmp.valid_identical || cmp.max_mi_difference > 1e-10) {
                    std::fprintf(stderr, "checksum mismatch at size %d, k %d\n", size, k);
                    mismatch = true;
                }
            }
        }
    }
    if (args.out.empty()) {
        std::cout << csv.str();
    } else {
        write_text(args.out, csv.str());
    }

    // Growth of the fft method with image size at each k: exponent of
    // t ~ (N log N)^e, N = padded area.
    for (int k : args.ks) {
        std::vector<double> xs, ys;
        for (const auto& r : records) {
            if (r.method != "fft" || r.k != k) continue;
            const double n = std::pow(1.5 * r.ref_size, 2.0);
            xs.push_back(std::log(n * std::log2(n)));
            ys.push_back(std::log(r.wall_time));
        }
        if (xs.size() < 2) continue;
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= xs.size();
        my /= ys.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        std::fprintf(stderr, "fft k=%d: time ~ (N log N)^%.2f\n", k, sxy / sxx);
    }
    return mismatch ? kExitNumerical : 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    int trials = 20;
    std::uint64_t seed = 0;
    std::string size = "256x256";
    double angle_range_deg = 180.0;
    double noise = 0.05;
    std::string modality = "gamma-remap";
    QuantizerOptions q{16, 100, 100, 0};
    int angles = 100;
    int refine = 32;
    double gamma = 0.5;
    std::string out = "eval";
    int threads = 0;
};

GridShape parse_shape(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw std::invalid_argument("size must look like HxW");
    const GridShape g{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    require_valid(g, "--size");
    return g;
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int run_eval(const EvalArgs& args) {
    apply_threads(args.threads);
    synth::PairSpec spec;
    spec.shape = parse_shape(args.size);
    spec.modality = synth::parse_modality(args.modality);
    spec.label_noise = args.noise;
    spec.angle_range = args.angle_range_deg * std::numbers::pi / 180.0;
    AlignmentConfig cfg;
    cfg.gamma = args.gamma;
    cfg.angle_count = args.angles;
    cfg.refinement_count = args.refine;
    cfg.kmeans = {args.q.k, args.q.batch, args.q.iter, 0};
    cfg.seed = args.q.seed;

    std::ostringstream csv;
    csv << "trial,seed,true_angle_rad,true_tx,true_ty,est_angle_rad,est_tx,est_ty,mi_bits,stage,corner_error_px,"
           "success,wall_time_s\n";
    std::vector<double> times, errors;
    int success = 0;
    nlohmann::json trials = nlohmann::json::array();
    for (int t = 0; t < args.trials; ++t) {
        const std::uint64_t seed = args.seed + static_cast<std::uint64_t>(t);
        const auto rec = synth::run_trial(spec, cfg, seed);
        success += rec.success ? 1 : 0;
        times.push_back(rec.seconds);
        errors.push_back(rec.corner_error);
        char line[512];
        const auto& e = rec.estimate.transform;
        std::snprintf(line, sizeof line, "%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%d,%.6f\n", t,
                      static_cast<unsigned long long>(seed), rec.truth.angle, rec.truth.translation.x,
                      rec.truth.translation.y, e.angle, e.translation.x, e.translation.y, rec.estimate.mi,
                      to_string(rec.estimate.stage), rec.corner_error, rec.success ? 1 : 0, rec.seconds);
        csv << line;
        std::fprintf(stderr, "trial %d: corner error %.3f px %s (%.1f s)\n", t, rec.corner_error,
                     rec.success ? "ok" : "FAILED", rec.seconds);
        trials.push_back({{"trial", t},
                          {"seed", seed},
                          {"truth", to_json(rec.truth)},
                          {"estimate", to_json(rec.estimate, cfg)},
                          {"corner_error_px", rec.corner_error},
                          {"success", rec.success},
                          {"wall_time_s", rec.seconds}});
    }
    double mean_err = 0.0;
    for (double e : errors) mean_err += e;
    if (!errors.empty()) mean_err /= static_cast<double>(errors.size());
    nlohmann::json report = {
        {"format_version", kJsonFormatVersion},
        {"trials", args.trials},
        {"successes", success},
        {"success_rate", args.trials ? static_cast<double>(success) / args.trials : 0.0},
        {"mean_corner_error_px", mean_err},
        {"success_threshold_px", 0.02 * spec.shape.width},
        {"wall_time_s", {{"p50", percentile(times, 0.5)}, {"p90", percentile(times, 0.9)},
                         {"max", times.empty() ? 0.0 : *std::max_element(times.begin(), times.end())}}},
        {"config", {{"size", args.size},
                    {"modality", args.modality},
                    {"label_noise", args.noise},
                    {"angle_range_deg", args.angle_range_deg},
                    {"seed", args.seed},
                    {"alignment", to_json(cfg)},
                    {"threads", args.threads}}},
        {"per_trial", trials}};
    write_text(args.out + ".csv", csv.str());
    write_text(args.out + ".json", report.dump(2) + "\n");
    std::printf("success %d/%d (%.1f%%), mean corner error %.3f px\n", success, args.trials,
                args.trials ? 100.0 * success / args.trials : 0.0, mean_err);
    return 0;
}

// Config files may hold bare key=value lines; those apply to the subcommand
// being run. [align]-style sections work as usual.
class SubcommandConfig : public CLI::ConfigTOML {
public:
    explicit SubcommandConfig(const CLI::App& app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        const auto active = app_.get_subcommands();
        if (active.empty()) return items;
        for (auto& item : items) {
            if (item.parents.empty() && item.name != "config") item.parents = {active.front()->get_name()};
        }
        return items;
    }

private:
    const CLI::App& app_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-mutual-information maps and MI-based rigid alignment"};
    app.require_subcommand(1);
    // Subcommands inherit fallthrough, so --config may also follow the subcommand.
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "key=value file (optionally in [align]-style sections); flags override it");
    app.config_formatter(std::make_shared<SubcommandConfig>(app));

    AlignArgs align_args;
    auto* align = app.add_subcommand("align", "Rigid alignment of a floating image onto a reference image");
    align->add_option("reference", align_args.ref, "Reference image")->required();
    align->add_option("floating", align_args.flt, "Floating image")->required();
    add_quantizer_options(align, align_args.q);
    align->add_option("--angles", align_args.angles, "Grid angles in [-pi, pi)")->check(CLI::PositiveNumber)->capture_default_str();
    align->add_option("--refine", align_args.refine, "Random refinement angles")->check(CLI::NonNegativeNumber)->capture_default_str();
    align->add_option("--gamma", align_args.gamma, "Required overlap fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    align->add_option("--mask", align_args.mask, "Masks when no mask file is given")->check(CLI::IsMember({"full", "circular"}))->capture_default_str();
    align->add_option("--ref-mask", align_args.ref_mask, "Reference mask image (nonzero = inside)");
    align->add_option("--flt-mask", align_args.flt_mask, "Floating mask image (nonzero = inside)");
    align->add_option("--timing", align_args.timing, "map: exclude quantization; pipeline: full alignment")->check(CLI::IsMember({"map", "pipeline"}))->capture_default_str();
    align->add_option("--threads", align_args.threads, "Worker cap (0 = runtime default)")->check(CLI::NonNegativeNumber);
    align->add_option("-o,--output", align_args.out, "Result JSON (stdout if omitted)");
    align->add_option("--overlay", align_args.overlay, "Write an RGB overlay of the aligned pair");

    MapArgs map_args;
    auto* cmap = app.add_subcommand("cmif-map", "CMIF map of two images at angle 0");
    cmap->add_option("reference", map_args.ref, "Reference image")->required();
    cmap->add_option("floating", map_args.flt, "Floating image")->required();
    add_quantizer_options(cmap, map_args.q);
    cmap->add_option("--method", map_args.method, "fft or direct")->check(CLI::IsMember({"fft", "direct"}))->capture_default_str();
    cmap->add_option("--mask", map_args.mask, "Masks when no mask file is given")->check(CLI::IsMember({"full", "circular"}))->capture_default_str();
    cmap->add_option("--ref-mask", map_args.ref_mask, "Reference mask image");
    cmap->add_option("--flt-mask", map_args.flt_mask, "Floating mask image");
    cmap->add_flag("--csv", map_args.csv, "Write CSV instead of the binary format");
    cmap->add_option("--threads", map_args.threads, "Worker cap")->check(CLI::NonNegativeNumber);
    cmap->add_option("-o,--output", map_args.out, "Output file")->required();

    std::string diff_a, diff_b;
    double diff_tol = 1e-10;
    auto* diff = app.add_subcommand("map-diff", "Compare two CMIF map files");
    diff->add_option("first", diff_a)->required();
    diff->add_option("second", diff_b)->required();
    diff->add_option("--tolerance", diff_tol, "Allowed MI difference")->capture_default_str();

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time fft and direct CMIF maps over sizes and label counts");
    bench->add_option("--sizes", bench_args.sizes, "LO..HI (powers of two) or a comma list")->capture_default_str();
    bench->add_option("--k", bench_args.ks, "Label counts")->delimiter(',')->capture_default_str();
    bench->add_option("--methods", bench_args.methods, "fft,direct")->delimiter(',')->check(CLI::IsMember({"fft", "direct"}))->capture_default_str();
    bench->add_option("--budget", bench_args.budget, "Seconds allowed per direct run")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--seed", bench_args.seed)->capture_default_str();
    bench->add_option("--threads", bench_args.threads, "Worker cap")->check(CLI::NonNegativeNumber);
    bench->add_option("-o,--output", bench_args.out, "CSV output (stdout if omitted)");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Success rate on synthetic pairs with known ground truth");
    eval->add_option("--trials", eval_args.trials)->check(CLI::NonNegativeNumber)->capture_default_str();
    eval->add_option("--size", eval_args.size, "HxW")->capture_default_str();
    eval->add_option("--angle-range", eval_args.angle_range_deg, "Rotation drawn from [-r, r) degrees")->capture_default_str();
    eval->add_option("--noise", eval_args.noise, "Fraction of floating pixels replaced by noise")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    eval->add_option("--modality-sim", eval_args.modality, "Intensity remap of the floating image")
        ->check(CLI::IsMember({"identity", "gamma-remap", "inversion", "channel-mix"}))->capture_default_str();
    add_quantizer_options(eval, eval_args.q);
    eval->add_option("--angles", eval_args.angles)->check(CLI::PositiveNumber)->capture_default_str();
    eval->add_option("--refine", eval_args.refine)->check(CLI::NonNegativeNumber)->capture_default_str();
    eval->add_option("--gamma", eval_args.gamma)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    eval->add_option("--trial-seed", eval_args.seed, "Seed of the first synthetic pair")->capture_default_str();
    eval->add_option("--threads", eval_args.threads, "Worker cap")->check(CLI::NonNegativeNumber);
    eval->add_option("-o,--output", eval_args.out, "Report prefix (writes PREFIX.csv and PREFIX.json)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitDegenerate;
    }

    try {
        if (*align) return run_align(align_args);
        if (*cmap) return run_cmif_map(map_args);
        if (*diff) return run_map_diff(diff_a, diff_b, diff_tol);
        if (*bench) return run_bench(bench_args);
        if (*eval) return run_eval(eval_args);
    } catch (const tools::io_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const map_format_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const numerical_health_error& e) {
        std::fprintf(stderr, "numerical health failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const degenerate_input_error& e) {
        std::fprintf(stderr, "degenerate input: %s\n", e.what());
        return kExitDegenerate;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitDegenerate;
    }
    return 0;
}
