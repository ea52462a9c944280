#include "lanerisk/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lanerisk/png_io.hpp"
#include "lanerisk/tensor_io.hpp"

namespace lanerisk {

namespace {

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

bool point_in_polygon(const std::vector<std::array<double, 2>>& poly, double px, double py) {
    // even-odd rule over pixel centers
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly[i][0], yi = poly[i][1];
        const double xj = poly[j][0], yj = poly[j][1];
        if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
            inside = !inside;
        }
    }
    return inside;
}

}  // namespace

Palette default_palette() {
    return Palette{
        {"car", {0, 255, 255}},      // cyan
        {"truck", {255, 0, 255}},    // magenta
        {"bus", {255, 255, 0}},      // yellow
        {"person", {0, 255, 0}},     // green
        {"bicycle", {255, 128, 0}},  // orange
        {"motorcycle", {128, 0, 255}},
        {"other", {255, 0, 0}},
    };
}

std::vector<std::size_t> subsample_uniform(std::size_t n_frames, std::size_t t) {
    if (t < 1) throw DataError("subsample: T must be >= 1");
    if (t > n_frames) {
        throw DataError("subsample: T=" + std::to_string(t) + " exceeds clip length N=" +
                        std::to_string(n_frames));
    }
    if (t == 1) return {n_frames / 2};
    std::vector<std::size_t> idx(t);
    for (std::size_t j = 0; j < t; ++j) {
        idx[j] = static_cast<std::size_t>(round_half_up(
            static_cast<double>(j) * static_cast<double>(n_frames - 1) /
            static_cast<double>(t - 1)));
    }
    return idx;
}

void overlay_masks(Image& frame, std::vector<SegmentationRecord> records, const Palette& palette,
                   double alpha) {
    std::stable_sort(records.begin(), records.end(),
                     [](const SegmentationRecord& a, const SegmentationRecord& b) {
                         return a.confidence > b.confidence;
                     });
    for (const auto& rec : records) {
        auto it = palette.find(rec.cls);
        if (it == palette.end()) {
            throw ConfigError("no palette entry for class '" + rec.cls + "'");
        }
        const Rgb& color = it->second;
        long y0, y1, x0, x1;
        if (!rec.polygon.empty()) {
            double miny = rec.polygon[0][1], maxy = miny, minx = rec.polygon[0][0], maxx = minx;
            for (const auto& p : rec.polygon) {
                minx = std::min(minx, p[0]);
                maxx = std::max(maxx, p[0]);
                miny = std::min(miny, p[1]);
                maxy = std::max(maxy, p[1]);
            }
            x0 = static_cast<long>(std::floor(minx));
            x1 = static_cast<long>(std::ceil(maxx));
            y0 = static_cast<long>(std::floor(miny));
            y1 = static_cast<long>(std::ceil(maxy));
        } else {
            x0 = rec.x;
            x1 = rec.x + rec.w;
            y0 = rec.y;
            y1 = rec.y + rec.h;
        }
        y0 = std::max(y0, 0L);
        x0 = std::max(x0, 0L);
        y1 = std::min(y1, static_cast<long>(frame.height));
        x1 = std::min(x1, static_cast<long>(frame.width));
        for (long y = y0; y < y1; ++y) {
            for (long x = x0; x < x1; ++x) {
                if (!rec.polygon.empty() &&
                    !point_in_polygon(rec.polygon, static_cast<double>(x) + 0.5,
                                      static_cast<double>(y) + 0.5)) {
                    continue;
                }
                for (std::size_t c = 0; c < 3; ++c) {
                    const double in = frame.at(static_cast<std::size_t>(y),
                                               static_cast<std::size_t>(x), c);
                    const double out = alpha * static_cast<double>(color[c]) + (1.0 - alpha) * in;
                    frame.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
                        static_cast<std::uint8_t>(std::clamp<long>(round_half_up(out), 0, 255));
                }
            }
        }
    }
}

LabelResult build_labels(const AnnotationSet& annotations, double fraction) {
    const std::size_t n_annot = annotations.ratings.size();
    const std::size_t n_clips = annotations.clip_ids.size();
    if (n_annot < 1) throw DataError("build_labels: need at least one annotator");
    if (n_clips < 2) throw DataError("build_labels: need at least two clips");

    std::vector<double> avg(n_clips, 0.0);
    for (std::size_t a = 0; a < n_annot; ++a) {
        const auto& row = annotations.ratings[a];
        if (row.size() != n_clips) {
            throw DataError("build_labels: annotator " + std::to_string(a) + " rated " +
                            std::to_string(row.size()) + " of " + std::to_string(n_clips) +
                            " clips");
        }
        double mean = 0.0;
        for (int r : row) {
            if (r < 1 || r > 5) {
                throw DataError("build_labels: annotator " + std::to_string(a) +
                                " has rating outside 1..5");
            }
            mean += r;
        }
        mean /= static_cast<double>(n_clips);
        double var = 0.0;
        for (int r : row) var += (r - mean) * (r - mean);
        var /= static_cast<double>(n_clips);  // population variance
        if (var == 0.0) {
            throw DataError("build_labels: annotator " + std::to_string(a) +
                            " has zero rating variance");
        }
        const double sd = std::sqrt(var);
        for (std::size_t c = 0; c < n_clips; ++c) {
            avg[c] += (annotations.ratings[a][c] - mean) / sd;
        }
    }
    for (double& v : avg) v /= static_cast<double>(n_annot);

    std::vector<std::size_t> order(n_clips);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (avg[a] != avg[b]) return avg[a] > avg[b];
        return annotations.clip_ids[a] < annotations.clip_ids[b];
    });
    const std::size_t n_pos =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_clips)));
    LabelResult result;
    result.scores = avg;
    result.risky.assign(n_clips, false);
    for (std::size_t i = 0; i < n_pos; ++i) result.risky[order[i]] = true;
    return result;
}

Tensor one_hot(bool is_risky) {
    Tensor y({2});
    y[is_risky ? 1 : 0] = 1.0;
    return y;
}

Tensor load_features(const std::filesystem::path& path) {
    Tensor t = read_tensor(path);
    if (t.rank() != 2) {
        throw FormatError("feature file " + path.string() + ": expected rank 2, got rank " +
                          std::to_string(t.rank()) + " (header byte offset 6)");
    }
    return t;
}

Tensor prepare_frames(const std::vector<Image>& frames, std::size_t height, std::size_t width) {
    if (frames.empty()) throw DataError("prepare_frames: empty frame list");
    Tensor out({frames.size(), height, width, 3});
    const std::size_t stride = height * width * 3;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Tensor resized = bilinear_resize(image_to_tensor(frames[t]), height, width);
        for (std::size_t i = 0; i < stride; ++i) out[t * stride + i] = resized[i] / 255.0;
    }
    return out;
}

std::vector<std::string> list_clip_ids(const std::filesystem::path& dataset_root) {
    const auto clips_dir = dataset_root / "clips";
    if (!std::filesystem::is_directory(clips_dir)) {
        throw IoError("no clips/ directory under " + dataset_root.string());
    }
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(clips_dir)) {
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<Image> load_clip_frames(const std::filesystem::path& dataset_root,
                                    const std::string& clip_id) {
    const auto dir = dataset_root / "clips" / clip_id;
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("no such clip directory: " + dir.string());
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".png") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw DataError("clip " + clip_id + " has no frames");
    std::vector<Image> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths) frames.push_back(read_png(p));
    for (const auto& f : frames) {
        if (f.height != frames[0].height || f.width != frames[0].width) {
            throw DataError("clip " + clip_id + " has frames of mixed dimensions");
        }
    }
    return frames;
}

std::vector<SegmentationRecord> load_mask_records(const std::filesystem::path& dataset_root,
                                                  const std::string& clip_id) {
    const auto path = dataset_root / "masks" / (clip_id + ".jsonl");
    std::ifstream is(path);
    if (!is) throw IoError("cannot open mask records: " + path.string());
    std::vector<SegmentationRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        SegmentationRecord rec;
        try {
            rec.frame = j.at("frame").get<std::size_t>();
            rec.cls = j.at("class").get<std::string>();
            if (j.contains("bbox")) {
                const auto& b = j.at("bbox");
                rec.x = b.at(0).get<long>();
                rec.y = b.at(1).get<long>();
                rec.w = b.at(2).get<long>();
                rec.h = b.at(3).get<long>();
            }
            if (j.contains("polygon")) {
                for (const auto& p : j.at("polygon")) {
                    rec.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                }
            }
            rec.confidence = j.value("confidence", 1.0);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void validate_records(const std::vector<SegmentationRecord>& records, std::size_t n_frames,
                      std::size_t height, std::size_t width) {
    for (const auto& rec : records) {
        if (rec.frame >= n_frames) {
            throw DataError("mask record frame index " + std::to_string(rec.frame) +
                            " >= clip length " + std::to_string(n_frames));
        }
        if (rec.confidence < 0.0 || rec.confidence > 1.0) {
            throw DataError("mask record confidence outside [0,1]");
        }
        if (rec.polygon.empty()) {
            if (rec.x < 0 || rec.y < 0 || rec.w < 0 || rec.h < 0 ||
                rec.x + rec.w > static_cast<long>(width) ||
                rec.y + rec.h > static_cast<long>(height)) {
                throw DataError("mask record box outside frame bounds");
            }
        } else {
            for (const auto& p : rec.polygon) {
                if (p[0] < 0 || p[1] < 0 || p[0] > static_cast<double>(width) ||
                    p[1] > static_cast<double>(height)) {
                    throw DataError("mask record polygon vertex outside frame bounds");
                }
            }
        }
    }
}

AnnotationSet load_annotations(const std::filesystem::path& dataset_root) {
    const auto path = dataset_root / "annotations.csv";
    std::ifstream is(path);
    if (!is) throw IoError("cannot open annotations: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "clip_id,annotator_id,rating") {
        throw FormatError(path.string() + ": expected header clip_id,annotator_id,rating");
    }
    std::map<std::string, std::map<std::string, int>> table;  // clip -> annotator -> rating
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string clip, annot, rating;
        if (!std::getline(ss, clip, ',') || !std::getline(ss, annot, ',') ||
            !std::getline(ss, rating)) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        table[clip][annot] = std::stoi(rating);
    }
    if (table.empty()) throw DataError(path.string() + ": no ratings");

    AnnotationSet set;
    for (const auto& [clip, _] : table) set.clip_ids.push_back(clip);
    std::vector<std::string> annotators;
    for (const auto& [annot, _] : table.begin()->second) annotators.push_back(annot);
    set.ratings.assign(annotators.size(), std::vector<int>(set.clip_ids.size(), 0));
    for (std::size_t c = 0; c < set.clip_ids.size(); ++c) {
        const auto& by_annot = table[set.clip_ids[c]];
        if (by_annot.size() != annotators.size()) {
            throw DataError("clip " + set.clip_ids[c] + " is not rated by every annotator");
        }
        for (std::size_t a = 0; a < annotators.size(); ++a) {
            auto it = by_annot.find(annotators[a]);
            if (it == by_annot.end()) {
                throw DataError("clip " + set.clip_ids[c] + " missing annotator " + annotators[a]);
            }
            set.ratings[a][c] = it->second;
        }
    }
    return set;
}

std::vector<Sample> make_samples(const std::filesystem::path& dataset_root,
                                 const PipelineOptions& options) {
    const auto ids = list_clip_ids(dataset_root);
    const AnnotationSet annotations = load_annotations(dataset_root);
    if (annotations.clip_ids != ids) {
        throw DataError("annotations.csv clip ids do not match clips/ directory contents");
    }
    const LabelResult labels = build_labels(annotations);

    std::vector<Sample> samples;
    samples.reserve(ids.size());
    for (std::size_t c = 0; c < ids.size(); ++c) {
        const std::string& id = ids[c];
        Tensor x;
        if (options.mode == InputMode::Features) {
            Tensor feats = load_features(dataset_root / "features" / (id + ".tnsr"));
            const std::size_t n = feats.extent(0), d = feats.extent(1);
            const auto idx = subsample_uniform(n, options.frames);
            x = Tensor({options.frames, d});
            for (std::size_t j = 0; j < idx.size(); ++j) {
                for (std::size_t k = 0; k < d; ++k) x[j * d + k] = feats[idx[j] * d + k];
            }
        } else {
            std::vector<Image> frames = load_clip_frames(dataset_root, id);
            const auto idx = subsample_uniform(frames.size(), options.frames);
            std::vector<Image> selected;
            selected.reserve(idx.size());
            for (std::size_t i : idx) selected.push_back(frames[i]);
            if (options.mode == InputMode::Masked) {
                const auto records = load_mask_records(dataset_root, id);
                validate_records(records, frames.size(), frames[0].height, frames[0].width);
                for (std::size_t j = 0; j < idx.size(); ++j) {
                    std::vector<SegmentationRecord> frame_records;
                    for (const auto& r : records) {
                        if (r.frame == idx[j]) frame_records.push_back(r);
                    }
                    overlay_masks(selected[j], std::move(frame_records), options.palette,
                                  options.alpha);
                }
            }
            x = prepare_frames(selected, options.height, options.width);
        }
        samples.push_back(Sample{std::move(x), one_hot(labels.risky[c]), id});
    }
    return samples;
}

}  // namespace lanerisk
