#include "lanerisk/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace lanerisk {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw MetricError("auc: " + std::to_string(scores.size()) + " scores vs " +
                          std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += (l != 0);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw MetricError("auc needs both classes present (got " + std::to_string(n_pos) +
                          " positives, " + std::to_string(n_neg) + " negatives)");
    }
    // Midrank formulation: AUC = (R_pos - P(P+1)/2) / (P*N), exact for
    // ties because midranks are integers or half-integers.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t m = i; m < j; ++m) {
            if (labels[order[m]] != 0) rank_sum_pos += midrank;
        }
        i = j;
    }
    const double p = static_cast<double>(n_pos), q = static_cast<double>(n_neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<std::vector<std::size_t>> kfold_split(const std::vector<int>& labels, std::size_t k,
                                                  std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (k < 2) throw ConfigError("kfold: k must be >= 2");
    if (n < k) throw ConfigError("kfold: fewer samples than folds");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] != 0 ? pos : neg).push_back(i);
    if (pos.size() < k) {
        throw ConfigError("kfold: only " + std::to_string(pos.size()) +
                          " positives for k=" + std::to_string(k) +
                          " stratified folds; use a smaller k");
    }
    std::mt19937_64 rng(seed);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t next = 0;
    for (const auto* cls : {&pos, &neg}) {
        for (std::size_t i = 0; i < cls->size(); ++i) {
            folds[next % k].push_back((*cls)[i]);
            ++next;
        }
    }
    return folds;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the combined words
    std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xBF58476D1CE4E5B9ULL);
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

struct FoldTask {
    std::size_t t_index;
    std::size_t fold;
};

}  // namespace

ReportRow cross_validate(const ModelSpec& spec, const SampleProvider& provider, std::size_t k,
                         const std::vector<std::size_t>& t_sweep, const TrainConfig& config,
                         std::size_t jobs, std::vector<SweepEntry>* sweep_out) {
    spec.validate();
    if (t_sweep.empty()) throw ConfigError("cross_validate: empty T sweep");

    std::vector<std::vector<Sample>> per_t;
    per_t.reserve(t_sweep.size());
    for (std::size_t t : t_sweep) per_t.push_back(provider(t));

    std::vector<int> labels;
    for (const auto& s : per_t[0]) labels.push_back(s.risky() ? 1 : 0);
    const auto folds = kfold_split(labels, k, config.seed);

    // (T, fold) units are independent: fresh model, fold-indexed seed.
    std::vector<FoldTask> tasks;
    for (std::size_t ti = 0; ti < t_sweep.size(); ++ti) {
        for (std::size_t f = 0; f < k; ++f) tasks.push_back({ti, f});
    }
    std::vector<std::vector<double>> fold_aucs(t_sweep.size(), std::vector<double>(k, 0.0));
    std::vector<std::vector<double>> fold_frame_aucs(t_sweep.size(), std::vector<double>(k, 0.0));

    auto run_task = [&](const FoldTask& task) {
        const std::size_t ti = task.t_index, f = task.fold;
        const std::vector<Sample>& samples = per_t[ti];

        std::vector<Sample> train_set;
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            for (std::size_t i : folds[g]) train_set.push_back(samples[i]);
        }
        ModelSpec fold_spec = spec;
        fold_spec.frames = t_sweep[ti];
        const std::uint64_t unit_seed = mix_seed(config.seed, t_sweep[ti], f + 1);
        auto model = build_model(fold_spec, unit_seed);
        TrainConfig fold_config = config;
        fold_config.seed = unit_seed;
        train(*model, train_set, fold_config);

        std::vector<double> scores;
        std::vector<int> held_labels;
        std::vector<double> frame_scores;
        std::vector<int> frame_labels;
        for (std::size_t i : folds[f]) {
            const Sample& s = samples[i];
            scores.push_back(predict_clip(*model, s.x));
            held_labels.push_back(s.risky() ? 1 : 0);
            if (model->frame_level()) {
                const std::size_t T = s.x.extent(0);
                for (std::size_t t = 0; t < T; ++t) {
                    Tensor probs = model->forward(slice_frame(s.x, t), false, nullptr);
                    frame_scores.push_back(probs[1]);
                    frame_labels.push_back(s.risky() ? 1 : 0);
                }
                model->clear_caches();
            }
        }
        fold_aucs[ti][f] = auc(scores, held_labels);
        fold_frame_aucs[ti][f] = model->frame_level()
                                     ? auc(frame_scores, frame_labels)
                                     : std::numeric_limits<double>::quiet_NaN();
    };

    if (jobs <= 1) {
        for (const auto& task : tasks) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(jobs);
        const std::size_t n_workers = std::min(jobs, tasks.size());
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= tasks.size()) break;
                        run_task(tasks[i]);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<SweepEntry> sweep;
    for (std::size_t ti = 0; ti < t_sweep.size(); ++ti) {
        double mean = 0.0;
        for (double a : fold_aucs[ti]) mean += a;
        mean /= static_cast<double>(k);
        double frame_mean = 0.0;
        bool has_frame = !std::isnan(fold_frame_aucs[ti][0]);
        if (has_frame) {
            for (double a : fold_frame_aucs[ti]) frame_mean += a;
            frame_mean /= static_cast<double>(k);
        } else {
            frame_mean = std::numeric_limits<double>::quiet_NaN();
        }
        sweep.push_back(SweepEntry{t_sweep[ti], mean, frame_mean, fold_aucs[ti]});
    }

    std::size_t best = 0;
    for (std::size_t ti = 1; ti < sweep.size(); ++ti) {
        const bool better = sweep[ti].mean_auc > sweep[best].mean_auc ||
                            (sweep[ti].mean_auc == sweep[best].mean_auc &&
                             sweep[ti].frames < sweep[best].frames);
        if (better) best = ti;
    }
    if (sweep_out) *sweep_out = sweep;

    auto probe = build_model(spec, 0);
    return ReportRow{spec.describe(), input_mode_name(spec.input), count_params(*probe),
                     sweep[best].frames, sweep[best].mean_auc, sweep[best].fold_aucs};
}

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

void sort_rows(std::vector<ReportRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return a.mean_auc < b.mean_auc;
    });
}

}  // namespace

std::string render_report(std::vector<ReportRow> rows) {
    sort_rows(rows);
    std::ostringstream os;
    os << "Architecture | Input mode | #Params | Best T | AUC\n";
    os << "-------------+------------+---------+--------+------\n";
    for (const auto& r : rows) {
        os << r.architecture << " | " << r.input_mode << " | " << r.params << " | " << r.best_t
           << " | " << fmt("%.3f", r.mean_auc) << "\n";
    }
    return os.str();
}

void write_report_csv(const std::filesystem::path& path, std::vector<ReportRow> rows) {
    sort_rows(rows);
    std::ofstream os(path);
    if (!os) throw IoError("cannot open report csv for writing: " + path.string());
    os << "architecture,input_mode,params,best_T,auc,fold_aucs\n";
    for (const auto& r : rows) {
        os << r.architecture << "," << r.input_mode << "," << r.params << "," << r.best_t << ","
           << fmt("%.6f", r.mean_auc) << ",";
        for (std::size_t i = 0; i < r.fold_aucs.size(); ++i) {
            if (i) os << ";";
            os << fmt("%.6f", r.fold_aucs[i]);
        }
        os << "\n";
    }
    if (!os) throw IoError("report csv write failed: " + path.string());
}

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open report csv: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "architecture,input_mode,params,best_T,auc,fold_aucs") {
        throw FormatError(path.string() + ": bad report csv header");
    }
    std::vector<ReportRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ReportRow r;
        std::string params, best_t, auc_s, folds;
        if (!std::getline(ss, r.architecture, ',') || !std::getline(ss, r.input_mode, ',') ||
            !std::getline(ss, params, ',') || !std::getline(ss, best_t, ',') ||
            !std::getline(ss, auc_s, ',') || !std::getline(ss, folds)) {
            throw FormatError(path.string() + ": malformed report row: " + line);
        }
        r.params = std::stoull(params);
        r.best_t = std::stoull(best_t);
        r.mean_auc = std::stod(auc_s);
        std::istringstream fs(folds);
        std::string tok;
        while (std::getline(fs, tok, ';')) r.fold_aucs.push_back(std::stod(tok));
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace lanerisk
