// Acceptance harness: one pass/fail line per criterion, exit code 0 only
// when every criterion holds. Expects the path of the lanerisk CLI binary
// as argv[1] (used by the determinism criterion).

#include <algorithm>
#include <array>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lanerisk/datapipe.hpp"
#include "lanerisk/eval.hpp"
#include "lanerisk/lstm.hpp"
#include "lanerisk/png_io.hpp"
#include "lanerisk/synthgen.hpp"
#include "lanerisk/training.hpp"

using namespace lanerisk;
namespace fs = std::filesystem;

namespace {

// Training lengths for the desk-scale qualitative reproduction. Frame-level
// families train on T times more samples per epoch and get fewer passes.
// Mirrors the CLI --desk profile. Frame-level families see T times more
// training samples per epoch, so they get epochs/T for the same number of
// optimizer updates. The low learning rate matters: large steps saturate
// the sigmoid trunk into a constant-output collapse on 5%-positive data.
constexpr std::size_t kSeqEpochs = 150;
constexpr std::size_t kFbfEpochs = 15;
constexpr double kDeskLr = 0.0003;

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double fd(Tensor& t, std::size_t i, const std::function<double()>& f) {
    const double eps = 1e-5;
    const double saved = t[i];
    t[i] = saved + eps;
    const double hi = f();
    t[i] = saved - eps;
    const double lo = f();
    t[i] = saved;
    return (hi - lo) / (2.0 * eps);
}

double rel(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Tensor rand_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                   double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

void check_gradients(Check& c, Layer& layer, Tensor x, std::mt19937_64& rng,
                     const std::string& tag) {
    layer.clear_cache();
    Tensor probe = layer.forward(x, false, nullptr);
    layer.clear_cache();
    Tensor w = rand_tensor(probe.shape(), rng);
    auto loss = [&] {
        Tensor y = layer.forward(x, false, nullptr);
        layer.clear_cache();
        return dot(y, w);
    };
    layer.zero_grads();
    layer.forward(x, false, nullptr);
    Tensor grad_in = layer.backward(w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        c.require(rel(grad_in[i], fd(x, i, loss)) < 1e-4, tag + " input grad");
        if (!c.ok) return;
    }
    std::vector<ParamRef> params;
    layer.collect_params(params);
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            c.require(rel((*p.grad)[i], fd(*p.value, i, loss)) < 1e-4, tag + " " + p.name);
            if (!c.ok) return;
        }
    }
}

Check criterion_gradients() {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(1000 + seed);

        Conv2D conv("conv", 1 + seed % 2, 1 + seed % 3, seed % 2 ? 3 : 5, 1 + seed % 2, rng);
        check_gradients(c, conv, rand_tensor({5, 6, 1 + seed % 2}, rng), rng, "conv2d");

        Dense dense("fc", 3 + seed % 4, 1 + seed % 3,
                    std::array{Activation::Sigmoid, Activation::Tanh,
                               Activation::Identity}[seed % 3],
                    rng);
        check_gradients(c, dense, rand_tensor({3 + seed % 4}, rng), rng, "dense");

        MaxPool pool("pool");
        check_gradients(c, pool, rand_tensor({4, 6, 2}, rng), rng, "maxpool");

        // p = 0 path: train mode is the identity, so gradients are exact.
        Dropout drop("drop", 0.0);
        {
            Tensor x = rand_tensor({8}, rng);
            Tensor w = rand_tensor({8}, rng);
            std::mt19937_64 drop_rng(seed);
            drop.forward(x, true, &drop_rng);
            Tensor gin = drop.backward(w);
            for (std::size_t i = 0; i < x.size(); ++i) {
                c.require(gin[i] == w[i], "dropout p=0 grad");
            }
        }

        const std::size_t q = 1 + seed % 10;
        LstmLayer lstm("lstm", q, 2 + seed % 2, 2 + seed % 3, rng);
        check_gradients(c, lstm, rand_tensor({q, 2 + seed % 2}, rng), rng, "lstm");
        if (!c.ok) break;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.require(secs < 60.0, "gradient checks took " + std::to_string(secs) + "s");
    return c;
}

Check criterion_lstm_analytic() {
    Check c;
    std::mt19937_64 rng(2);
    LstmLayer zero("lstm", 2, 2, 3, rng);
    for (Tensor* t : {&zero.Wg, &zero.Ug, &zero.bg, &zero.Wi, &zero.Ui, &zero.bi, &zero.Wo,
                      &zero.Uo, &zero.bo, &zero.Wc, &zero.Uc, &zero.bc}) {
        t->fill(0.0);
    }
    Tensor h0({3}), c0({3});
    auto [h, cc] = zero.step(rand_tensor({2}, rng), h0, c0);
    for (std::size_t i = 0; i < 3; ++i) {
        c.require(h[i] == 0.0 && cc[i] == 0.0, "zero-weight state not exactly zero");
    }
    // All gates are sigmoid(0) = 0.5 exactly; with c_prev = 1 the cell
    // update g*c_prev + i*tanh(0) exposes the forget gate value.
    Tensor ones({3});
    ones.fill(1.0);
    auto [h1, c1] = zero.step(rand_tensor({2}, rng), h0, ones);
    for (std::size_t i = 0; i < 3; ++i) {
        c.require(c1[i] == 0.5, "forget gate not exactly 0.5");
        c.require(h1[i] == 0.5 * std::tanh(0.5), "output gate not exactly 0.5");
    }

    // Scalar hand case: W = U = 1, b = 0, z = 1, h_prev = 0, c_prev = 1.
    LstmLayer scalar("lstm", 1, 1, 1, rng);
    for (Tensor* t : {&scalar.Wg, &scalar.Ug, &scalar.Wi, &scalar.Ui, &scalar.Wo, &scalar.Uo,
                      &scalar.Wc, &scalar.Uc}) {
        t->fill(1.0);
    }
    for (Tensor* t : {&scalar.bg, &scalar.bi, &scalar.bo, &scalar.bc}) t->fill(0.0);
    Tensor z({1}, {1.0}), hp({1}, {0.0}), cp({1}, {1.0});
    auto [hs, cs] = scalar.step(z, hp, cp);
    const double gate = 1.0 / (1.0 + std::exp(-1.0));
    const double c_ref = gate + gate * std::tanh(1.0);
    const double h_ref = gate * std::tanh(c_ref);
    c.require(std::fabs(gate - 0.731059) < 1e-6, "gate value");
    c.require(std::fabs(c_ref - 1.287829) < 1e-6, "cell hand value");
    c.require(std::fabs(h_ref - 0.627655) < 1e-6, "hidden hand value");
    c.require(std::fabs(cs[0] - c_ref) < 1e-6, "cell state mismatch");
    c.require(std::fabs(hs[0] - h_ref) < 1e-6, "hidden state mismatch");
    return c;
}

Check criterion_auc() {
    Check c;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> quant(0, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng() % 196;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = quant(rng) / 10.0;
            labels[i] = static_cast<int>(rng() % 2);
        }
        labels[0] = 1;
        if (n > 1) labels[1] = 0;

        double wins = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!labels[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j]) continue;
                ++pairs;
                wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
            }
        }
        const double brute = wins / static_cast<double>(pairs);
        c.require(std::fabs(auc(scores, labels) - brute) < 1e-12, "pair-count mismatch");

        std::vector<double> mono(n);
        for (std::size_t i = 0; i < n; ++i) mono[i] = std::exp(2.0 * scores[i]) - 5.0;
        c.require(auc(mono, labels) == auc(scores, labels), "monotone invariance");
        if (!c.ok) break;
    }
    return c;
}

Check criterion_labels() {
    Check c;
    // 860 clips as in the target corpus; simulated raters with scale,
    // bias, and noise.
    const std::size_t n = 860;
    std::vector<std::string> ids(n);
    std::vector<double> risks(n);
    std::mt19937_64 rng(4);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "clip_%04zu", i);
        ids[i] = buf;
        risks[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    const AnnotationSet set = simulate_annotations(ids, risks, 10, 0.05, 99);
    const LabelResult labels = build_labels(set, 0.05);
    const auto n_pos = std::count(labels.risky.begin(), labels.risky.end(), true);
    c.require(n_pos == 43, "expected 43 positives, got " + std::to_string(n_pos));

    // Positive affine rating maps must not change scores or rankings:
    // draw ratings in 1..3 so r -> 2r - 1 stays in range.
    AnnotationSet base;
    const std::size_t m = 120;
    for (std::size_t i = 0; i < m; ++i) base.clip_ids.push_back("c" + std::to_string(100 + i));
    base.ratings.assign(6, std::vector<int>(m));
    std::uniform_int_distribution<int> small(1, 3);
    for (auto& row : base.ratings) {
        do {
            for (auto& r : row) r = small(rng);
        } while (*std::max_element(row.begin(), row.end()) ==
                 *std::min_element(row.begin(), row.end()));
    }
    AnnotationSet mapped = base;
    for (std::size_t a = 0; a < mapped.ratings.size(); a += 2) {
        for (int& r : mapped.ratings[a]) r = 2 * r - 1;
    }
    const LabelResult lb = build_labels(base, 0.05);
    const LabelResult lm = build_labels(mapped, 0.05);
    auto ranking = [&](const LabelResult& l) {
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            if (l.scores[x] != l.scores[y]) return l.scores[x] > l.scores[y];
            return base.clip_ids[x] < base.clip_ids[y];
        });
        return order;
    };
    c.require(ranking(lb) == ranking(lm), "affine map changed the ranking");
    c.require(lb.risky == lm.risky, "affine map changed the labels");
    return c;
}

Check criterion_subsampling() {
    Check c;
    c.require(subsample_uniform(300, 5) == std::vector<std::size_t>{0, 75, 150, 224, 299},
              "N=300 T=5 indices");
    for (std::size_t n : {2u, 10u, 31u, 60u, 117u, 300u}) {
        for (std::size_t t = 2; t <= std::min<std::size_t>(n, 20); ++t) {
            const auto idx = subsample_uniform(n, t);
            c.require(idx.size() == t && idx.front() == 0 && idx.back() == n - 1 &&
                          std::is_sorted(idx.begin(), idx.end()),
                      "endpoint property at N=" + std::to_string(n) + " T=" + std::to_string(t));
        }
    }
    return c;
}

Check criterion_compositing(const fs::path& work) {
    Check c;
    Image img(4, 4);
    std::fill(img.px.begin(), img.px.end(), 100);
    SegmentationRecord rec;
    rec.cls = "car";
    rec.x = 0;
    rec.y = 0;
    rec.w = 4;
    rec.h = 4;
    overlay_masks(img, {rec}, default_palette());  // default alpha 0.7
    c.require(img.at(1, 1, 0) == 30 && img.at(1, 1, 1) == 209 && img.at(1, 1, 2) == 209,
              "cyan composite example");

    // Golden image: overlaying the same synthetic frame twice must give
    // byte-identical PNGs.
    SceneParams params;
    params.n_clips = 20;
    params.height = 32;
    params.width = 32;
    params.frames = 8;
    const ClipSim sim = simulate_clip(params, 1, true);
    auto render = [&](const fs::path& path) {
        Image frame = sim.frames[4];
        std::vector<SegmentationRecord> records;
        for (const auto& r : sim.records) {
            if (r.frame == 4) records.push_back(r);
        }
        overlay_masks(frame, records, default_palette());
        write_png(path, frame);
    };
    render(work / "golden_a.png");
    render(work / "golden_b.png");
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    };
    const std::string a = slurp(work / "golden_a.png");
    c.require(!a.empty() && a == slurp(work / "golden_b.png"), "golden image not byte-stable");
    return c;
}

TrainConfig desk_config(Family family, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.batch = 32;
    cfg.epochs = (family == Family::FbfCnn || family == Family::FtSoftmax) ? kFbfEpochs
                                                                           : kSeqEpochs;
    cfg.seed = seed;
    cfg.adam.lr = kDeskLr;
    cfg.adam.decay = 0.01;
    return cfg;
}

double run_cv(const fs::path& dataset, Family family, InputMode mode) {
    ModelSpec spec;
    spec.family = family;
    spec.input = mode;
    spec.frames = 10;
    spec.height = 32;
    spec.width = 32;
    SampleProvider provider = [&](std::size_t frames) {
        PipelineOptions opt;
        opt.mode = mode;
        opt.frames = frames;
        opt.height = 32;
        opt.width = 32;
        return make_samples(dataset, opt);
    };
    const ReportRow row =
        cross_validate(spec, provider, 10, {10}, desk_config(family, 11), 1);
    return row.mean_auc;
}

Check criterion_table_ordering(const fs::path& dataset) {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    const double seq_raw = run_cv(dataset, Family::CnnLstm, InputMode::Raw);
    const double fbf_raw = run_cv(dataset, Family::FbfCnn, InputMode::Raw);
    const double seq_masked = run_cv(dataset, Family::CnnLstm, InputMode::Masked);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "cnn-lstm raw %.3f, fbf-cnn raw %.3f, cnn-lstm masked %.3f (%.0fs)", seq_raw,
                  fbf_raw, seq_masked, secs);
    c.detail = buf;
    c.ok = true;
    if (seq_raw < 0.85) {
        c.ok = false;
        c.detail += "; cnn-lstm below 0.85";
    }
    if (seq_raw - fbf_raw < 0.05) {
        c.ok = false;
        c.detail += "; lstm margin over fbf below 0.05";
    }
    if (seq_masked < seq_raw - 0.02) {
        c.ok = false;
        c.detail += "; masked input regressed past 0.02";
    }
    return c;
}

Check criterion_cli_determinism(const std::string& tool, const fs::path& work,
                                const fs::path& dataset) {
    Check c;
    auto run = [&](const fs::path& out) {
        std::ostringstream cmd;
        cmd << "\"" << tool << "\" crossval --dataset \"" << dataset.string() << "\""
            << " --arch ft-lstm --input features --k 5 --t-sweep 3 5 --epochs 2"
            << " --lr 0.001 --seed 21 --jobs 2 --out \"" << out.string() << "\""
            << " > /dev/null";
        return std::system(cmd.str().c_str());
    };
    const fs::path out1 = work / "cv_run1", out2 = work / "cv_run2";
    c.require(run(out1) == 0 && run(out2) == 0, "cli crossval failed");
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    };
    const std::string r1 = slurp(out1 / "report.csv");
    c.require(!r1.empty(), "missing report.csv");
    c.require(r1 == slurp(out2 / "report.csv"), "report csvs differ between runs");
    c.require(slurp(out1 / "sweep.csv") == slurp(out2 / "sweep.csv"),
              "sweep csvs differ between runs");
    return c;
}

Check criterion_training_sanity() {
    Check c;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    std::vector<Sample> samples;
    for (std::size_t cls = 0; cls < 2; ++cls) {
        for (std::size_t i = 0; i < 20; ++i) {
            Tensor x({4, 2});
            for (std::size_t j = 0; j < x.size(); ++j) {
                x[j] = (cls ? 1.0 : -1.0) + jitter(rng);
            }
            samples.push_back(Sample{x, one_hot(cls == 1),
                                     (cls ? "r" : "s") + std::to_string(i)});
        }
    }
    auto model = build_ft_softmax(2, 5);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch = 16;
    cfg.seed = 2;
    cfg.adam.lr = 0.001;  // base 0.0001 scaled x10 for the toy
    const auto history = train(*model, samples, cfg);

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < 10; ++w) {
        double mean = 0.0;
        for (std::size_t e = 0; e < 20; ++e) mean += history[w * 20 + e].train_loss;
        mean /= 20.0;
        c.require(mean < prev, "window-averaged loss not monotone at window " +
                                   std::to_string(w));
        prev = mean;
    }
    for (const auto& s : samples) {
        c.require((predict_clip(*model, s.x) > 0.5) == s.risky(), "misclassified " + s.clip_id);
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-lanerisk-cli>\n";
        return 2;
    }
    const std::string tool = argv[1];

    const fs::path work =
        fs::temp_directory_path() / ("lanerisk_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(work);

    // Shared synthetic datasets: the defaults for the qualitative
    // reproduction, a small one for the CLI determinism check.
    const fs::path dataset = work / "dataset_default";
    const fs::path dataset_small = work / "dataset_small";
    {
        SceneParams params;  // 200 clips, 32x32, N=60, seed 1
        generate(params, dataset);
        SceneParams small;
        small.n_clips = 60;
        small.height = 16;
        small.width = 16;
        small.frames = 10;
        small.seed = 3;
        small.risk_fraction = 0.1;
        generate(small, dataset_small);
    }

    struct Criterion {
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria{
        {"1 gradient correctness vs finite differences", [] { return criterion_gradients(); }},
        {"2 lstm analytic cases", [] { return criterion_lstm_analytic(); }},
        {"3 auc oracle equivalence", [] { return criterion_auc(); }},
        {"4 label pipeline fidelity", [] { return criterion_labels(); }},
        {"5 subsampling contract", [] { return criterion_subsampling(); }},
        {"6 compositing contract", [&] { return criterion_compositing(work); }},
        {"7 qualitative architecture ordering", [&] { return criterion_table_ordering(dataset); }},
        {"8 crossval determinism via cli", [&] {
             return criterion_cli_determinism(tool, work, dataset_small);
         }},
        {"9 training sanity on the separable toy", [] { return criterion_training_sanity(); }},
    };

    bool all_ok = true;
    for (const auto& criterion : criteria) {
        Check result;
        try {
            result = criterion.run();
        } catch (const std::exception& e) {
            result.ok = false;
            result.detail = std::string("exception: ") + e.what();
        }
        all_ok = all_ok && result.ok;
        std::cout << (result.ok ? "PASS" : "FAIL") << " criterion " << criterion.name;
        if (!result.detail.empty()) std::cout << " [" << result.detail << "]";
        std::cout << "\n" << std::flush;
    }

    fs::remove_all(work);
    return all_ok ? 0 : 1;
}
