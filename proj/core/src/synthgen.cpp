#include "lanerisk/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "lanerisk/png_io.hpp"
#include "lanerisk/tensor_io.hpp"

namespace lanerisk {

namespace {

// Counter-based randomness: every value is a pure function of
// (seed, stream, index), so per-clip generation order never matters.
std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    const std::uint64_t h = splitmix(seed ^ splitmix(a ^ splitmix(b ^ splitmix(c))));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
}

double hash_gauss(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    const double u1 = std::max(hash_unit(seed, a, b, c * 2 + 1), 1e-12);
    const double u2 = hash_unit(seed, a, b, c * 2 + 2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

constexpr double kGapFloor = 0.6;
constexpr double kGapMax = 2.8;
constexpr double kCloseScale = 2.2;  // maximum total gap shrinkage

double proximity(double gap) {
    const double p = (1.0 / gap - 1.0 / kGapMax) / (1.0 / kGapFloor - 1.0 / kGapMax);
    return std::clamp(p, 0.0, 1.0);
}

std::string clip_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%04zu", index);
    return buf;
}

}  // namespace

void SceneParams::validate() const {
    if (n_clips < 20) throw ConfigError("synthgen: need at least 20 clips");
    if (height < 16 || width < 16) throw ConfigError("synthgen: frame size must be >= 16x16");
    if (frames < 2) throw ConfigError("synthgen: need at least 2 frames per clip");
    if (risk_fraction <= 0.0 || risk_fraction >= 0.5) {
        throw ConfigError("synthgen: risk fraction must be in (0, 0.5)");
    }
    if (annotators < 1) throw ConfigError("synthgen: need at least one annotator");
}

ClipSim simulate_clip(const SceneParams& params, std::size_t clip_index, bool is_risky) {
    const std::size_t H = params.height, W = params.width, N = params.frames;
    const std::uint64_t cs = splitmix(params.seed ^ (0xC11F000ULL + clip_index));

    // Risky clips close in fast and late. Safe clips are a mixture of
    // receding, steady-close and slow-closing trajectories, so single
    // frames overlap heavily between the classes and only the growth
    // dynamics separate them.
    double closing_frac = 0.0;  // fraction of the maximum closing sweep
    double d0, delta;
    if (is_risky) {
        closing_frac = 0.78 + 0.22 * hash_unit(cs, 1, 0);
        d0 = 1.8 + 1.0 * hash_unit(cs, 2, 0);
        delta = -closing_frac * kCloseScale;
    } else {
        const double mode = hash_unit(cs, 6, 0);
        if (mode < 0.25) {
            // Receding: starts at or below the closest gap, opens up.
            d0 = 0.3 + 0.7 * hash_unit(cs, 2, 0);
            delta = (0.5 + 0.5 * hash_unit(cs, 1, 0)) * kCloseScale;
        } else if (mode < 0.5) {
            // Steady follow: stays close the whole clip.
            d0 = 0.3 + 1.0 * hash_unit(cs, 2, 0);
            delta = 0.0;
        } else if (mode < 0.7) {
            // Distant cruise: the lead stays far away throughout.
            d0 = 1.6 + 1.2 * hash_unit(cs, 2, 0);
            delta = 0.0;
        } else {
            // Moderate approach; far starts stay small, near starts can
            // reach the gap floor, but the sweep never covers the whole
            // range in one clip.
            closing_frac = 0.3 + 0.2 * hash_unit(cs, 1, 0);
            d0 = 0.9 + 1.9 * hash_unit(cs, 2, 0);
            delta = -closing_frac * kCloseScale;
        }
    }

    // Bell-shaped closing-rate profile around the lane-change moment.
    std::vector<double> bump(N), closed(N);
    double total = 0.0;
    for (std::size_t t = 0; t < N; ++t) {
        const double tt = static_cast<double>(t) / static_cast<double>(N - 1);
        bump[t] = std::exp(-std::pow((tt - 0.5) / 0.18, 2.0));
        total += bump[t];
        closed[t] = total;
    }
    for (std::size_t t = 0; t < N; ++t) closed[t] /= total;

    double min_gap = kGapMax;
    std::vector<double> gaps(N);
    for (std::size_t t = 0; t < N; ++t) {
        gaps[t] = std::clamp(d0 + delta * closed[t], kGapFloor, kGapMax);
        min_gap = std::min(min_gap, gaps[t]);
    }
    const double latent = (1.0 - params.appearance_weight) * closing_frac +
                          params.appearance_weight * proximity(min_gap);

    const std::size_t horizon = static_cast<std::size_t>(round_half_up(0.35 * H));
    const long tint = static_cast<long>(hash_unit(cs, 3, 0) * 12.0);
    // The lateral drift moment varies per clip, so a single frame's lane
    // position does not reveal where in the clip it sits.
    const double drift_mid = 0.25 + 0.5 * hash_unit(cs, 10, 0);

    ClipSim sim;
    sim.latent_risk = latent;
    sim.peak_closing = closing_frac * kCloseScale;
    sim.min_gap = min_gap;
    sim.frames.reserve(N);
    for (std::size_t t = 0; t < N; ++t) {
        const double tt = static_cast<double>(t) / static_cast<double>(N - 1);
        const double drift = std::clamp((tt - (drift_mid - 0.25)) / 0.5, 0.0, 1.0);
        const double drift_s = drift * drift * (3.0 - 2.0 * drift);  // smoothstep
        const double prox = proximity(gaps[t]);

        Image frame(H, W);
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                long r, g, b;
                if (y < horizon) {
                    r = 128 + tint;
                    g = 138 + tint;
                    b = 158;
                } else {
                    const long noise =
                        static_cast<long>(hash_unit(cs, 4, y * W + x, t / 8) * 24.0) - 12;
                    r = g = b = 90 + noise;
                }
                frame.at(y, x, 0) = static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
                frame.at(y, x, 1) = static_cast<std::uint8_t>(std::clamp(g, 0L, 255L));
                frame.at(y, x, 2) = static_cast<std::uint8_t>(std::clamp(b, 0L, 255L));
            }
        }

        // Dashed ego lane mark drifting across during the change.
        const long lane_x = round_half_up(W * (0.30 + 0.40 * drift_s));
        for (std::size_t y = horizon; y < H; ++y) {
            if ((y + 2 * t) % 6 < 3 && lane_x >= 0 && lane_x < static_cast<long>(W)) {
                for (std::size_t c = 0; c < 3; ++c) {
                    frame.at(y, static_cast<std::size_t>(lane_x), c) = 205;
                }
            }
        }

        // Static roadside clutter in the same paint as the vehicle. It is
        // never annotated, so the detection masks are what disambiguate
        // the lead vehicle from it.
        for (std::size_t d = 0; d < 2; ++d) {
            const long dw = 3 + static_cast<long>(hash_unit(cs, 7, d) * 7.0);
            const long dh = std::max<long>(2, round_half_up(0.75 * static_cast<double>(dw)));
            const long dx = static_cast<long>(hash_unit(cs, 8, d) *
                                              static_cast<double>(static_cast<long>(W) - dw));
            const long span = std::max<long>(1, static_cast<long>(H - horizon) - dh - 1);
            const long dy = static_cast<long>(horizon) + 1 +
                            static_cast<long>(hash_unit(cs, 8, d + 16) *
                                              static_cast<double>(span));
            for (long y = dy; y < dy + dh; ++y) {
                for (long x = dx; x < dx + dw; ++x) {
                    frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0) =
                        static_cast<std::uint8_t>(38 + tint);
                    frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 1) = 40;
                    frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 2) = 54;
                }
            }
        }

        // Lead vehicle rectangle; apparent size tracks proximity.
        const long wv = std::clamp<long>(
            3 + round_half_up(prox * (0.45 * static_cast<double>(W) - 3.0)), 3,
            static_cast<long>(W) - 2);
        const long hv = std::max<long>(2, round_half_up(0.75 * static_cast<double>(wv)));
        long y_bottom = static_cast<long>(horizon) + 2 +
                        round_half_up(prox * static_cast<double>(H - horizon - 4));
        y_bottom = std::clamp<long>(y_bottom, static_cast<long>(horizon) + hv,
                                    static_cast<long>(H) - 1);
        const long xc = round_half_up(W * (0.38 + 0.24 * (1.0 - drift_s)));
        long x0 = std::clamp<long>(xc - wv / 2, 0, static_cast<long>(W) - wv);
        const long y0 = y_bottom - hv + 1;
        for (long y = y0; y <= y_bottom; ++y) {
            for (long x = x0; x < x0 + wv; ++x) {
                frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0) =
                    static_cast<std::uint8_t>(38 + tint);
                frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 1) = 40;
                frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 2) = 54;
            }
        }
        sim.frames.push_back(std::move(frame));

        SegmentationRecord rec;
        rec.frame = t;
        rec.cls = clip_index % 2 == 0 ? "car" : "truck";
        rec.x = x0;
        rec.y = y0;
        rec.w = wv;
        rec.h = hv;
        rec.confidence = 0.85 + 0.1 * hash_unit(cs, 5, t);
        sim.records.push_back(rec);
    }
    return sim;
}

AnnotationSet simulate_annotations(const std::vector<std::string>& clip_ids,
                                   const std::vector<double>& latent_risks,
                                   std::size_t annotators, double noise_sigma,
                                   std::uint64_t seed) {
    if (clip_ids.size() != latent_risks.size()) {
        throw DataError("simulate_annotations: id/risk count mismatch");
    }
    AnnotationSet set;
    set.clip_ids = clip_ids;
    set.ratings.assign(annotators, std::vector<int>(clip_ids.size(), 0));
    const std::uint64_t as = splitmix(seed ^ 0xA22A0777ULL);
    for (std::size_t a = 0; a < annotators; ++a) {
        const double scale = 0.7 + 0.6 * hash_unit(as, a, 1);
        const double bias = -0.15 + 0.3 * hash_unit(as, a, 2);
        for (std::size_t c = 0; c < clip_ids.size(); ++c) {
            const double noise = noise_sigma * hash_gauss(as, a, 100 + c);
            const double v = 1.0 + 4.0 * (scale * latent_risks[c] + bias + noise);
            set.ratings[a][c] = static_cast<int>(std::clamp<long>(round_half_up(v), 1, 5));
        }
    }
    return set;
}

std::vector<ClipTruth> generate(const SceneParams& params, const std::filesystem::path& out_dir) {
    params.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    for (const char* sub : {"clips", "masks", "features"}) {
        fs::create_directories(out_dir / sub, ec);
        if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
    }

    // Exactly floor(risk_fraction * n) clips are drawn risky, so the
    // top risk-fraction quantile of the latent score is the risky set.
    const std::size_t n = params.n_clips;
    const std::size_t n_risky =
        static_cast<std::size_t>(std::floor(params.risk_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 pick_rng(splitmix(params.seed ^ 0x515C7ULL));
    std::shuffle(order.begin(), order.end(), pick_rng);
    std::vector<bool> risky(n, false);
    for (std::size_t i = 0; i < n_risky; ++i) risky[order[i]] = true;

    std::vector<ClipTruth> truths(n);
    std::vector<double> latents(n);
    std::vector<std::string> ids(n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::string id = clip_name(c);
        ids[c] = id;
        ClipSim sim = simulate_clip(params, c, risky[c]);
        latents[c] = sim.latent_risk;
        truths[c] = ClipTruth{id, sim.latent_risk, risky[c]};

        const fs::path clip_dir = out_dir / "clips" / id;
        fs::create_directories(clip_dir, ec);
        if (ec) throw IoError("cannot create " + clip_dir.string() + ": " + ec.message());
        char name[32];
        for (std::size_t t = 0; t < sim.frames.size(); ++t) {
            std::snprintf(name, sizeof(name), "frame_%06zu.png", t);
            write_png(clip_dir / name, sim.frames[t]);
        }

        std::ofstream ms(out_dir / "masks" / (id + ".jsonl"));
        if (!ms) throw IoError("cannot write masks for " + id);
        char line[256];
        for (const auto& r : sim.records) {
            std::snprintf(line, sizeof(line),
                          "{\"frame\": %zu, \"class\": \"%s\", \"bbox\": [%ld, %ld, %ld, %ld], "
                          "\"confidence\": %.6f}\n",
                          r.frame, r.cls.c_str(), r.x, r.y, r.w, r.h, r.confidence);
            ms << line;
        }

        if (params.write_features) {
            const std::size_t N = sim.frames.size();
            Tensor feats({N, 8});
            const double Wd = static_cast<double>(params.width);
            const double Hd = static_cast<double>(params.height);
            for (std::size_t t = 0; t < N; ++t) {
                const auto& r = sim.records[t];
                const double jitter = 0.01 * hash_gauss(splitmix(params.seed ^ c), 9, t);
                feats[t * 8 + 0] = r.w / Wd + jitter;
                feats[t * 8 + 1] = r.h / Hd;
                feats[t * 8 + 2] = r.x / Wd;
                feats[t * 8 + 3] = r.y / Hd;
                feats[t * 8 + 4] = (r.w * r.h) / (Wd * Hd);
                feats[t * 8 + 5] = (r.x + 0.5 * r.w) / Wd;
                feats[t * 8 + 6] = static_cast<double>(t) / static_cast<double>(N - 1);
                feats[t * 8 + 7] = r.confidence;
            }
            write_tensor(out_dir / "features" / (id + ".tnsr"), feats);
        }
    }

    const AnnotationSet annotations = simulate_annotations(
        ids, latents, params.annotators, params.annotator_noise, params.seed);
    {
        std::ofstream os(out_dir / "annotations.csv");
        if (!os) throw IoError("cannot write " + (out_dir / "annotations.csv").string());
        os << "clip_id,annotator_id,rating\n";
        char buf[96];
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t a = 0; a < params.annotators; ++a) {
                std::snprintf(buf, sizeof(buf), "%s,a%02zu,%d\n", ids[c].c_str(), a,
                              annotations.ratings[a][c]);
                os << buf;
            }
        }
    }
    {
        std::ofstream os(out_dir / "ground_truth.csv");
        if (!os) throw IoError("cannot write " + (out_dir / "ground_truth.csv").string());
        os << "clip_id,latent_risk,is_risky\n";
        char buf[96];
        for (const auto& t : truths) {
            std::snprintf(buf, sizeof(buf), "%s,%.9f,%d\n", t.clip_id.c_str(), t.latent_risk,
                          t.is_risky ? 1 : 0);
            os << buf;
        }
    }
    return truths;
}

}  // namespace lanerisk
