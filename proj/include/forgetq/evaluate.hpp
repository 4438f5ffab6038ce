#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forgetq/cohort.hpp"
#include "forgetq/featurize.hpp"
#include "forgetq/gbt.hpp"
#include "forgetq/snapshot_store.hpp"

namespace forgetq::evaluate {

struct FeatureSet {
    std::string name;
    FeatureSelection selection;
};

/// The 13 incremental feature sets, in report order.
const std::vector<FeatureSet>& standard_feature_sets();
const FeatureSet& feature_set(std::string_view name);  // ConfigError for unknown names

/// One labeled dataset to run: a (last, current, next) triple in a store.
struct DatasetSpec {
    std::string name;
    std::filesystem::path store;
    Timestamp t_last;
    Timestamp t_current;
    Timestamp t_next;
    int gap_months = 6;
};

struct ExperimentPlan {
    std::vector<DatasetSpec> datasets;
    std::vector<std::string> feature_sets;  // empty = all 13
    int n_runs = 5;
    double train_fraction = 0.9;
    std::uint64_t seed = 1;
    int n_bins = 10;
    bool run_bins = true;
    bool bin_global_model = false;  // score bins with the whole-dataset model instead of per-bin models
    std::string bin_feature_set = "All";
    std::size_t top_k = 10;
    int max_redraws = 10;
    bool shuffle_labels = false;  // null control: permute labels before splitting
    unsigned jobs = 1;
    CohortConfig cohort;  // gap_months is taken from each dataset
    TextCaps text_caps;
    gbt::BoostConfig boost;

    void validate() const;  // ConfigError
    [[nodiscard]] std::vector<std::string> resolved_feature_sets() const;
};

ExperimentPlan plan_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
std::string plan_to_json(const ExperimentPlan& plan);

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    [[nodiscard]] std::size_t total() const { return tp + fp + fn + tn; }
    /// F1 of the positive (being forgotten) class; 0 when tp == 0.
    [[nodiscard]] double f1() const;
    [[nodiscard]] double accuracy() const;
};

/// Predicted positive when probability >= 0.5.
Confusion confusion(std::span<const double> probabilities, std::span<const int> labels);

struct Split {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
    int redraws = 0;
};

/// Uniform random split with both classes in each part; redraws up to
/// `max_redraws` times, then DataError.
Split draw_split(std::span<const int> labels, double train_fraction, std::uint64_t seed, int max_redraws);

/// Seed of one (dataset, run, bin) split, independent of everything else in the plan.
std::uint64_t split_seed(std::uint64_t plan_seed, std::string_view dataset, int run, int bin = 0);

/// A dataset with its cached features, ready for repeated runs.
struct PreparedDataset {
    DatasetSpec spec;
    CohortDataset dataset;
    FeatureCache cache;
    std::vector<int> labels;  // possibly shuffled
};

PreparedDataset prepare_dataset(const SnapshotStore& store, const DatasetSpec& spec, const ExperimentPlan& plan);

struct RunResult {
    int run = 0;
    std::uint64_t seed = 0;
    int redraws = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    Confusion confusion;
    std::vector<std::pair<std::string, double>> importance;  // feature -> split gain
};

/// Fits the text model and GBT on `rows_train` and scores `rows_test`.
RunResult train_and_score(const PreparedDataset& data, const FeatureSet& set, const ExperimentPlan& plan,
                          std::span<const std::size_t> rows_train, std::span<const std::size_t> rows_test);

struct CellResult {
    std::string dataset;
    int gap_months = 0;
    std::string feature_set;
    std::vector<RunResult> runs;
    double mean_f1 = 0.0;
    double mean_accuracy = 0.0;
    double seconds = 0.0;  // wall time, excluded from deterministic outputs
};

struct Aggregate {
    std::string feature_set;
    int gap_months = 0;
    std::size_t n_datasets = 0;
    double f1_min = 0, f1_max = 0, f1_avg = 0;
    double acc_min = 0, acc_max = 0, acc_avg = 0;
};

struct BinResult {
    std::string dataset;
    int gap_months = 0;
    int bin = 0;  // 1-based, ascending current views
    std::size_t rows = 0;
    std::int64_t min_views = 0;
    std::int64_t max_views = 0;
    double forgotten_fraction = 0.0;
    double mean_f1 = 0.0;
    double mean_accuracy = 0.0;
    int scored_runs = 0;
    bool degenerate = false;
};

/// Row indices of each bin: rows ordered by current views (ties by position)
/// and cut into `n_bins` equal-count parts; each part listed in dataset order.
std::vector<std::vector<std::size_t>> view_bins(const CohortDataset& dataset, int n_bins);

std::vector<BinResult> bin_analysis(const PreparedDataset& data, const ExperimentPlan& plan);

struct RankedFeature {
    std::string feature;
    double percent = 0.0;
};

/// Normalizes each map by its total, averages across maps (absent = 0),
/// rescales to percentages and sorts descending (ties by name).
std::vector<RankedFeature> rank_features(std::span<const std::map<std::string, double>> per_dataset);

struct ExperimentReport {
    ExperimentPlan plan;
    std::vector<CohortCounts> dataset_counts;  // per plan dataset
    std::vector<CellResult> cells;             // dataset-major, then feature-set order
    std::vector<Aggregate> table;              // feature-set order, then ascending gap
    std::vector<BinResult> bins;
    std::vector<std::map<std::string, double>> importance_by_dataset;  // mean gain over runs, All set
    std::vector<RankedFeature> ranking;
    double total_seconds = 0.0;
};

/// Aggregates cells into min/max/avg of per-dataset run means per (feature set, gap).
std::vector<Aggregate> aggregate(std::span<const CellResult> cells, std::span<const std::string> feature_order);

/// Opens every store and builds every dataset before any training.
ExperimentReport run_experiment(const ExperimentPlan& plan);
ExperimentReport run_experiment(const ExperimentPlan& plan, std::span<const PreparedDataset> datasets);

/// table2.csv, datasets.csv, runs.csv, bins.csv, importance.csv,
/// importance_top.csv, manifest.json and runtimes.json. CSV files start with
/// `header_comment` when it is non-empty.
void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir,
                  const std::string& header_comment = {});

}  // namespace forgetq::evaluate
