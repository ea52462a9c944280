#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lanerisk/architectures.hpp"
#include "lanerisk/image.hpp"
#include "lanerisk/sample.hpp"

namespace lanerisk {

/// One precomputed segmentation output for one frame: an axis-aligned
/// box, optionally refined by a polygon (used instead of the box when
/// present).
struct SegmentationRecord {
    std::size_t frame = 0;
    std::string cls;  // "car", "truck", ...
    long x = 0, y = 0;
    long w = 0, h = 0;
    std::vector<std::array<double, 2>> polygon;
    double confidence = 1.0;
};

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::map<std::string, Rgb>;

/// Cars cyan, trucks magenta, remaining classes from a fixed
/// high-contrast table.
Palette default_palette();

/// Uniform temporal subsampling: idx_j = round(j*(N-1)/(T-1)) with round
/// half up; T=1 picks the middle frame floor(N/2). Endpoints are always
/// included for T >= 2.
std::vector<std::size_t> subsample_uniform(std::size_t n_frames, std::size_t t);

/// Alpha-composite class-colored regions onto the frame:
/// out = round(alpha*palette + (1-alpha)*in) per channel, round half up.
/// Records are drawn in descending confidence order, later draws
/// compositing over earlier results.
void overlay_masks(Image& frame, std::vector<SegmentationRecord> records, const Palette& palette,
                   double alpha = 0.7);

/// Raw ratings, every annotator rates every clip. ratings[a][c] in 1..5,
/// clips indexed in ascending clip-id order.
struct AnnotationSet {
    std::vector<std::string> clip_ids;
    std::vector<std::vector<int>> ratings;  // [annotator][clip]
};

struct LabelResult {
    std::vector<double> scores;  // averaged per-annotator z-scores
    std::vector<bool> risky;     // top floor(fraction*n), id-ascending tie break
};

/// Ground-truth construction: per-annotator z-normalization (population
/// standard deviation), average across annotators, mark the riskiest
/// floor(fraction*n) clips positive.
LabelResult build_labels(const AnnotationSet& annotations, double fraction = 0.05);

/// safe -> (1,0), risky -> (0,1)
Tensor one_hot(bool is_risky);

/// Reads a rank-2 [N x d] feature tensor in the raw tensor format.
Tensor load_features(const std::filesystem::path& path);

/// Bilinear resize each frame to (height, width) and scale channels to
/// [0,1]; result is [T x H x W x 3].
Tensor prepare_frames(const std::vector<Image>& frames, std::size_t height, std::size_t width);

// --- dataset directory layout ---
// clips/<id>/frame_<%06d>.png
// masks/<id>.jsonl        one record per line: frame, class, bbox
//                         [x,y,w,h], optional polygon [[x,y]...], confidence
// annotations.csv         header clip_id,annotator_id,rating
// features/<id>.tnsr      raw tensor format, [N x d]
// ground_truth.csv        clip_id,latent_risk,is_risky (synthetic data only)

std::vector<std::string> list_clip_ids(const std::filesystem::path& dataset_root);
std::vector<Image> load_clip_frames(const std::filesystem::path& dataset_root,
                                    const std::string& clip_id);
std::vector<SegmentationRecord> load_mask_records(const std::filesystem::path& dataset_root,
                                                  const std::string& clip_id);
AnnotationSet load_annotations(const std::filesystem::path& dataset_root);

void validate_records(const std::vector<SegmentationRecord>& records, std::size_t n_frames,
                      std::size_t height, std::size_t width);

struct PipelineOptions {
    InputMode mode = InputMode::Raw;
    std::size_t frames = 10;  // T
    std::size_t height = 32;
    std::size_t width = 32;
    double alpha = 0.7;
    Palette palette = default_palette();
};

/// Loads, subsamples and preprocesses every clip in ascending id order,
/// pairing each with its one-hot label from build_labels.
std::vector<Sample> make_samples(const std::filesystem::path& dataset_root,
                                 const PipelineOptions& options);

}  // namespace lanerisk
