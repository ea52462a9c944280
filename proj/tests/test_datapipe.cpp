#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "lanerisk/datapipe.hpp"
#include "lanerisk/png_io.hpp"
#include "lanerisk/tensor_io.hpp"
#include "testutil.hpp"

using namespace lanerisk;
namespace fs = std::filesystem;

TEST_CASE("uniform subsampling hand example") {
    const auto idx = subsample_uniform(300, 5);
    CHECK(idx == std::vector<std::size_t>{0, 75, 150, 224, 299});
}

TEST_CASE("uniform subsampling edge cases") {
    CHECK(subsample_uniform(300, 1) == std::vector<std::size_t>{150});
    CHECK(subsample_uniform(7, 7) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK(subsample_uniform(2, 2) == std::vector<std::size_t>{0, 1});
    CHECK_THROWS_AS(subsample_uniform(5, 6), DataError);
    CHECK_THROWS_AS(subsample_uniform(5, 0), DataError);
}

TEST_CASE("uniform subsampling anchors endpoints and stays sorted") {
    for (std::size_t n : {10u, 33u, 60u, 117u, 300u}) {
        for (std::size_t t = 2; t <= std::min<std::size_t>(n, 24); ++t) {
            const auto idx = subsample_uniform(n, t);
            REQUIRE(idx.size() == t);
            CHECK(idx.front() == 0);
            CHECK(idx.back() == n - 1);
            CHECK(std::is_sorted(idx.begin(), idx.end()));
            CHECK(idx.back() < n);
        }
    }
}

TEST_CASE("default palette fixes car and truck colors") {
    const Palette p = default_palette();
    CHECK(p.at("car") == Rgb{0, 255, 255});
    CHECK(p.at("truck") == Rgb{255, 0, 255});
}

TEST_CASE("overlay compositing hand example") {
    Image img(4, 4);
    std::fill(img.px.begin(), img.px.end(), 100);
    SegmentationRecord rec;
    rec.frame = 0;
    rec.cls = "car";
    rec.x = 1;
    rec.y = 1;
    rec.w = 2;
    rec.h = 2;
    overlay_masks(img, {rec}, default_palette(), 0.7);
    // 0.7*0 + 0.3*100 = 30; 0.7*255 + 0.3*100 = 208.5, round half up
    CHECK(img.at(1, 1, 0) == 30);
    CHECK(img.at(1, 1, 1) == 209);
    CHECK(img.at(1, 1, 2) == 209);
    CHECK(img.at(2, 2, 0) == 30);
    // outside the box untouched
    CHECK(img.at(0, 0, 0) == 100);
    CHECK(img.at(3, 3, 1) == 100);
}

TEST_CASE("overlay rounds half up and saturates alpha") {
    Image img(1, 1);
    img.px = {100, 100, 100};
    SegmentationRecord rec;
    rec.cls = "truck";  // (255, 0, 255)
    rec.x = 0;
    rec.y = 0;
    rec.w = 1;
    rec.h = 1;
    Image half = img;
    overlay_masks(half, {rec}, default_palette(), 0.5);
    CHECK(half.at(0, 0, 0) == 178);  // 177.5 rounds up
    CHECK(half.at(0, 0, 1) == 50);
    Image full = img;
    overlay_masks(full, {rec}, default_palette(), 1.0);
    CHECK(full.at(0, 0, 0) == 255);
    CHECK(full.at(0, 0, 1) == 0);
    Image none = img;
    overlay_masks(none, {rec}, default_palette(), 0.0);
    CHECK(none.at(0, 0, 0) == 100);
}

TEST_CASE("overlapping records draw in descending confidence order") {
    Image img(2, 2);
    std::fill(img.px.begin(), img.px.end(), 100);
    SegmentationRecord hi;
    hi.cls = "car";
    hi.x = 0;
    hi.y = 0;
    hi.w = 2;
    hi.h = 2;
    hi.confidence = 0.9;
    SegmentationRecord lo = hi;
    lo.cls = "truck";
    lo.confidence = 0.5;
    // Pass in ascending order; the sort must put the car first anyway.
    overlay_masks(img, {lo, hi}, default_palette(), 0.7);
    // car first: (30, 209, 209); truck over that:
    // r = 0.7*255 + 0.3*30 = 187.5 -> 188, g = 0.3*209 = 62.7 -> 63,
    // b = 0.7*255 + 0.3*209 = 241.2 -> 241
    CHECK(img.at(0, 0, 0) == 188);
    CHECK(img.at(0, 0, 1) == 63);
    CHECK(img.at(0, 0, 2) == 241);
}

TEST_CASE("polygon records fill by pixel centers, even-odd rule") {
    Image img(4, 4);
    SegmentationRecord rec;
    rec.cls = "car";
    rec.polygon = {{0.0, 0.0}, {2.0, 0.0}, {2.0, 2.0}, {0.0, 2.0}};
    overlay_masks(img, {rec}, default_palette(), 1.0);
    CHECK(img.at(0, 0, 1) == 255);
    CHECK(img.at(1, 1, 1) == 255);
    CHECK(img.at(2, 2, 1) == 0);  // center (2.5, 2.5) outside
    CHECK(img.at(0, 2, 1) == 0);
}

TEST_CASE("overlay rejects unknown classes") {
    Image img(2, 2);
    SegmentationRecord rec;
    rec.cls = "unicycle";
    rec.w = 1;
    rec.h = 1;
    CHECK_THROWS_AS(overlay_masks(img, {rec}, default_palette()), ConfigError);
}

namespace {

AnnotationSet random_annotations(std::size_t annotators, std::size_t clips, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(1, 5);
    AnnotationSet set;
    for (std::size_t c = 0; c < clips; ++c) {
        set.clip_ids.push_back("clip_" + std::to_string(1000 + c));
    }
    set.ratings.assign(annotators, {});
    for (auto& row : set.ratings) {
        bool varied = false;
        do {
            row.clear();
            for (std::size_t c = 0; c < clips; ++c) row.push_back(dist(rng));
            varied = *std::max_element(row.begin(), row.end()) >
                     *std::min_element(row.begin(), row.end());
        } while (!varied);
    }
    return set;
}

}  // namespace

TEST_CASE("build_labels matches a brute-force oracle") {
    const auto set = random_annotations(5, 40, 123);
    const auto result = build_labels(set, 0.1);

    // Oracle: z-normalize each annotator with the population sigma,
    // average, then pick the 4 best with id-ascending tie break.
    const std::size_t n = 40;
    std::vector<double> scores(n, 0.0);
    for (const auto& row : set.ratings) {
        const double mean = std::accumulate(row.begin(), row.end(), 0.0) / n;
        double var = 0.0;
        for (int r : row) var += (r - mean) * (r - mean);
        const double sd = std::sqrt(var / n);
        for (std::size_t c = 0; c < n; ++c) scores[c] += (row[c] - mean) / sd;
    }
    for (double& s : scores) s /= 5.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return set.clip_ids[a] < set.clip_ids[b];
    });
    std::vector<bool> expected(n, false);
    for (std::size_t i = 0; i < 4; ++i) expected[order[i]] = true;

    CHECK(std::count(result.risky.begin(), result.risky.end(), true) == 4);
    for (std::size_t c = 0; c < n; ++c) {
        CHECK(result.scores[c] == doctest::Approx(scores[c]).epsilon(1e-12));
        CHECK(result.risky[c] == expected[c]);
    }
}

TEST_CASE("build_labels is invariant to per-annotator affine rating maps") {
    // Ratings drawn from {1, 2, 3} so the positive affine map r -> 2r - 1
    // stays inside the 1..5 range. z-normalization cancels per-annotator
    // scale and shift, so scores and rankings must agree.
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dist(1, 3);
    AnnotationSet set;
    const std::size_t n = 30;
    for (std::size_t c = 0; c < n; ++c) set.clip_ids.push_back("c" + std::to_string(100 + c));
    set.ratings.assign(4, std::vector<int>(n));
    for (auto& row : set.ratings) {
        do {
            for (std::size_t c = 0; c < n; ++c) row[c] = dist(rng);
        } while (*std::max_element(row.begin(), row.end()) ==
                 *std::min_element(row.begin(), row.end()));
    }
    const auto base = build_labels(set, 0.1);

    AnnotationSet mapped = set;
    for (std::size_t a = 0; a < mapped.ratings.size(); a += 2) {
        for (int& r : mapped.ratings[a]) r = 2 * r - 1;
    }
    const auto transformed = build_labels(mapped, 0.1);
    for (std::size_t c = 0; c < n; ++c) {
        CHECK(transformed.scores[c] == doctest::Approx(base.scores[c]).epsilon(1e-12));
        CHECK(transformed.risky[c] == base.risky[c]);
    }
}

TEST_CASE("build_labels error cases") {
    AnnotationSet flat;
    flat.clip_ids = {"a", "b", "c"};
    flat.ratings = {{3, 3, 3}};
    CHECK_THROWS_AS(build_labels(flat), DataError);

    AnnotationSet out_of_range;
    out_of_range.clip_ids = {"a", "b"};
    out_of_range.ratings = {{0, 5}};
    CHECK_THROWS_AS(build_labels(out_of_range), DataError);

    AnnotationSet ragged;
    ragged.clip_ids = {"a", "b", "c"};
    ragged.ratings = {{1, 5, 3}, {1, 5}};
    CHECK_THROWS_AS(build_labels(ragged), DataError);
}

TEST_CASE("one hot encoding") {
    Tensor safe = one_hot(false);
    CHECK(safe[0] == 1.0);
    CHECK(safe[1] == 0.0);
    Tensor risky = one_hot(true);
    CHECK(risky[0] == 0.0);
    CHECK(risky[1] == 1.0);
}

TEST_CASE("bilinear resize reproduces a plane exactly") {
    // v(y, x) = 20y + 10x is bilinear, so resampling is exact up to clamping.
    Tensor src({2, 2, 3});
    for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t x = 0; x < 2; ++x) {
            for (std::size_t c = 0; c < 3; ++c) src.at({y, x, c}) = 20.0 * y + 10.0 * x;
        }
    }
    Tensor dst = bilinear_resize(src, 4, 4);
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) {
            const double sy = std::clamp((y + 0.5) * 0.5 - 0.5, 0.0, 1.0);
            const double sx = std::clamp((x + 0.5) * 0.5 - 0.5, 0.0, 1.0);
            CHECK(dst.at({y, x, 0}) == doctest::Approx(20.0 * sy + 10.0 * sx).epsilon(1e-12));
        }
    }
}

TEST_CASE("bilinear resize at the same size is the identity") {
    std::mt19937_64 rng(5);
    Tensor src = testutil::random_tensor({5, 7, 3}, rng, 0.0, 255.0);
    Tensor dst = bilinear_resize(src, 5, 7);
    for (std::size_t i = 0; i < src.size(); ++i) CHECK(dst[i] == doctest::Approx(src[i]).epsilon(1e-12));
}

TEST_CASE("feature loading enforces rank 2") {
    const fs::path dir = fs::temp_directory_path() / "lanerisk_feat_test";
    fs::create_directories(dir);
    write_tensor(dir / "good.tnsr", Tensor({3, 4}));
    CHECK(load_features(dir / "good.tnsr").extent(1) == 4);
    write_tensor(dir / "bad.tnsr", Tensor({12}));
    CHECK_THROWS_AS(load_features(dir / "bad.tnsr"), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("prepare_frames stacks resized unit-scaled frames") {
    Image a(4, 6);
    std::fill(a.px.begin(), a.px.end(), 255);
    Image b(4, 6);
    std::fill(b.px.begin(), b.px.end(), 51);
    Tensor t = prepare_frames({a, b}, 8, 8);
    CHECK(t.shape() == std::vector<std::size_t>{2, 8, 8, 3});
    CHECK(t.at({0, 3, 3, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.at({1, 3, 3, 2}) == doctest::Approx(0.2).epsilon(1e-12));
}

namespace {

// Two-clip handmade dataset exercising every loader.
struct MiniDataset {
    fs::path root;

    MiniDataset() {
        root = fs::temp_directory_path() /
               ("lanerisk_mini_" + std::to_string(std::random_device{}()));
        for (const char* clip : {"a", "b"}) {
            fs::create_directories(root / "clips" / clip);
        }
        fs::create_directories(root / "masks");
        fs::create_directories(root / "features");
        for (const char* clip : {"a", "b"}) {
            for (int f = 0; f < 3; ++f) {
                Image img(8, 8);
                std::fill(img.px.begin(), img.px.end(),
                          static_cast<std::uint8_t>(clip[0] == 'a' ? 100 : 40));
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%06d.png", f);
                write_png(root / "clips" / clip / name, img);
            }
            write_tensor(root / "features" / (std::string(clip) + ".tnsr"),
                         Tensor({3, 4}, std::vector<double>(12, clip[0] == 'a' ? 1.0 : -1.0)));
        }
        std::ofstream masks_a(root / "masks" / "a.jsonl");
        masks_a << R"({"frame": 0, "class": "car", "bbox": [2, 2, 3, 3], "confidence": 0.9})"
                << "\n";
        masks_a << R"({"frame": 2, "class": "truck", "bbox": [0, 0, 2, 2]})" << "\n";
        std::ofstream masks_b(root / "masks" / "b.jsonl");
        std::ofstream ann(root / "annotations.csv");
        ann << "clip_id,annotator_id,rating\n";
        for (const char* annot : {"u1", "u2"}) {
            ann << "a," << annot << ",5\n";
            ann << "b," << annot << ",1\n";
        }
    }
    ~MiniDataset() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("dataset loaders round trip the on-disk layout") {
    MiniDataset ds;
    CHECK(list_clip_ids(ds.root) == std::vector<std::string>{"a", "b"});

    const auto frames = load_clip_frames(ds.root, "a");
    REQUIRE(frames.size() == 3);
    CHECK(frames[0].height == 8);
    CHECK(frames[0].width == 8);
    CHECK(frames[0].at(4, 4, 1) == 100);

    const auto records = load_mask_records(ds.root, "a");
    REQUIRE(records.size() == 2);
    CHECK(records[0].frame == 0);
    CHECK(records[0].cls == "car");
    CHECK(records[0].x == 2);
    CHECK(records[0].h == 3);
    CHECK(records[0].confidence == 0.9);
    CHECK(records[1].confidence == 1.0);  // default
    CHECK_NOTHROW(validate_records(records, 3, 8, 8));
    CHECK_THROWS_AS(validate_records(records, 2, 8, 8), DataError);
    CHECK_THROWS_AS(validate_records(records, 3, 4, 4), DataError);

    const auto ann = load_annotations(ds.root);
    CHECK(ann.clip_ids == std::vector<std::string>{"a", "b"});
    REQUIRE(ann.ratings.size() == 2);
    CHECK(ann.ratings[0] == std::vector<int>{5, 1});
}

TEST_CASE("loader error reporting") {
    MiniDataset ds;
    {
        std::ofstream bad(ds.root / "masks" / "a.jsonl", std::ios::app);
        bad << "{not json\n";
    }
    CHECK_THROWS_WITH_AS(load_mask_records(ds.root, "a"), doctest::Contains(":3:"),
                         FormatError);

    {
        std::ofstream ann(ds.root / "annotations.csv");
        ann << "clip,annotator,score\n";
    }
    CHECK_THROWS_AS(load_annotations(ds.root), FormatError);

    CHECK_THROWS_AS(list_clip_ids(ds.root / "nowhere"), IoError);
    CHECK_THROWS_AS(load_clip_frames(ds.root, "zzz"), IoError);
}

TEST_CASE("make_samples produces aligned tensors per input mode") {
    MiniDataset ds;
    PipelineOptions opt;
    opt.frames = 2;
    opt.height = 8;
    opt.width = 8;

    opt.mode = InputMode::Raw;
    auto raw = make_samples(ds.root, opt);
    REQUIRE(raw.size() == 2);
    CHECK(raw[0].clip_id == "a");
    CHECK(raw[1].clip_id == "b");
    CHECK(raw[0].x.shape() == std::vector<std::size_t>{2, 8, 8, 3});
    CHECK(raw[0].x.at({0, 4, 4, 0}) == doctest::Approx(100.0 / 255.0).epsilon(1e-12));

    opt.mode = InputMode::Masked;
    auto masked = make_samples(ds.root, opt);
    // Subsampled frames of clip a are {0, 2}; frame 0 carries the car
    // box at (2,2): 0.7*0 + 0.3*100 = 30 in the red channel.
    CHECK(masked[0].x.at({0, 2, 2, 0}) == doctest::Approx(30.0 / 255.0).epsilon(1e-12));
    CHECK(masked[0].x.at({0, 2, 2, 1}) == doctest::Approx(209.0 / 255.0).epsilon(1e-12));
    // Pixels outside every region match the raw pipeline.
    CHECK(masked[0].x.at({0, 7, 7, 0}) == raw[0].x.at({0, 7, 7, 0}));
    // Clip b has no mask records at all.
    CHECK(masked[1].x.at({0, 2, 2, 0}) == raw[1].x.at({0, 2, 2, 0}));

    opt.mode = InputMode::Features;
    auto feats = make_samples(ds.root, opt);
    CHECK(feats[0].x.shape() == std::vector<std::size_t>{2, 4});
    CHECK(feats[0].x.at({0, 0}) == 1.0);
    CHECK(feats[1].x.at({1, 3}) == -1.0);

    // n=2 at fraction 0.05 floors to zero risky clips.
    CHECK(!feats[0].risky());
    CHECK(!feats[1].risky());
}
