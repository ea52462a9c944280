#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lanerisk/architectures.hpp"
#include "lanerisk/sample.hpp"
#include "lanerisk/training.hpp"

namespace lanerisk {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counted 0.5. Risky (label 1) is positive.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Stratified k folds: seeded shuffle within each class, then round-robin
/// assignment (the offset carries across classes so overall fold sizes
/// differ by at most 1). Returns index lists, disjoint and exhaustive.
std::vector<std::vector<std::size_t>> kfold_split(const std::vector<int>& labels, std::size_t k,
                                                  std::uint64_t seed);

struct SweepEntry {
    std::size_t frames;  // T
    double mean_auc;
    double frame_auc;  // per-frame AUC for FbF families, NaN otherwise
    std::vector<double> fold_aucs;
};

struct ReportRow {
    std::string architecture;
    std::string input_mode;
    std::size_t params;
    std::size_t best_t;
    double mean_auc;
    std::vector<double> fold_aucs;  // folds of the best T
};

using SampleProvider = std::function<std::vector<Sample>(std::size_t frames)>;

/// Full T-sweep x k-fold evaluation. For each T and fold the model is
/// trained from fresh, fold-indexed initialization on the other k-1
/// folds (with the inner 0.9 split) and scores the held-out fold.
/// Best T is the argmax of mean AUC, ties toward smaller T.
/// Work units run on up to `jobs` threads; results are deterministic
/// and independent of scheduling.
ReportRow cross_validate(const ModelSpec& spec, const SampleProvider& provider, std::size_t k,
                         const std::vector<std::size_t>& t_sweep, const TrainConfig& config,
                         std::size_t jobs = 1, std::vector<SweepEntry>* sweep_out = nullptr);

/// Text table: Architecture | Input mode | #Params | Best T | AUC,
/// sorted by AUC ascending, AUC to 3 decimals.
std::string render_report(std::vector<ReportRow> rows);

void write_report_csv(const std::filesystem::path& path, std::vector<ReportRow> rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

/// Deterministic seed derivation for independent work units.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace lanerisk
