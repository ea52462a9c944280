#pragma once

#include <filesystem>

#include "lanerisk/datapipe.hpp"
#include "lanerisk/image.hpp"

namespace lanerisk {

/// Parameters of the synthetic lane-change clip generator.
///
/// Each clip shows a textured road, a drifting ego lane mark, and one
/// lead-vehicle rectangle whose apparent size grows as the ego closes in.
/// Risk lives in the temporal dynamics: the latent score weights peak
/// closing rate at (1 - appearance_weight) and proximity (inverse minimum
/// gap) at appearance_weight, so per-frame appearance overlaps between
/// classes while growth rate separates them.
struct SceneParams {
    std::size_t n_clips = 200;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t frames = 60;  // N per clip
    std::uint64_t seed = 1;
    double risk_fraction = 0.05;
    std::size_t annotators = 10;
    double annotator_noise = 0.05;  // sigma_a on the 0..1 risk scale
    double appearance_weight = 0.1;
    double fps = 29.4;
    bool write_features = true;  // per-frame geometry features, [N x 8]

    void validate() const;
};

struct ClipTruth {
    std::string clip_id;
    double latent_risk;
    bool is_risky;
};

/// Per-clip simulation output, exposed for tests.
struct ClipSim {
    std::vector<Image> frames;
    std::vector<SegmentationRecord> records;
    double latent_risk;
    double peak_closing;
    double min_gap;
};

/// Deterministic per-clip simulation; streams derive from (seed, clip).
ClipSim simulate_clip(const SceneParams& params, std::size_t clip_index, bool is_risky);

/// Simulated ratings for given latent risks: per-annotator bias and scale,
/// rating = clamp(round(1 + 4*(scale*r + bias + noise)), 1, 5).
AnnotationSet simulate_annotations(const std::vector<std::string>& clip_ids,
                                   const std::vector<double>& latent_risks,
                                   std::size_t annotators, double noise_sigma,
                                   std::uint64_t seed);

/// Writes the full datapipe directory layout plus ground_truth.csv
/// (clip_id, latent_risk, is_risky). Bit-identical trees for equal seeds.
std::vector<ClipTruth> generate(const SceneParams& params,
                                const std::filesystem::path& out_dir);

}  // namespace lanerisk
