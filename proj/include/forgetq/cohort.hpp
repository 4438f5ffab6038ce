#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "forgetq/snapshot_store.hpp"
#include "forgetq/timestamp.hpp"

namespace forgetq {

struct CohortConfig {
    int gap_months = 6;
    double highly_viewed_fraction = 0.15;
    double forgotten_growth_threshold = -0.05;
    std::vector<double> top_n_grid{0.10, 0.20, 0.30, 0.40, 0.50};
    std::int64_t stale_view_ceiling = 50;
    /// Allowed deviation of each period from gap_months * 30.44 days.
    double gap_tolerance_days = 20.0;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Number of items in the top `fraction` of `n`, i.e. ceil(fraction * n),
/// robust to products like 0.15 * 100 landing just above an integer.
std::size_t top_count(double fraction, std::size_t n);

/// Indices of the ceil(fraction * n) largest values, plus every value tied
/// with the smallest one kept. Returned in ascending index order.
std::vector<std::size_t> select_top(std::span<const std::int64_t> values, double fraction);

struct LabeledQuestion {
    std::int64_t question_id = 0;
    std::int64_t current_views = 0;
    std::int64_t future_views = 0;
    double views_growth = 0.0;
    bool being_forgotten = false;

    bool operator==(const LabeledQuestion&) const = default;
};

double views_growth(std::int64_t current_views, std::int64_t future_views);

struct CohortCounts {
    std::size_t total = 0;
    std::size_t being_forgotten = 0;
    std::size_t unforgotten = 0;
};

struct CohortDataset {
    Timestamp t_last;
    Timestamp t_current;  // prediction time
    Timestamp t_next;
    CohortConfig config;
    std::vector<LabeledQuestion> questions;  // ascending question id
    std::size_t population = 0;      // questions present at t_current
    std::size_t selected = 0;        // before dropping absentees
    std::size_t absent_at_next = 0;  // selected but missing from the next dump

    [[nodiscard]] Timestamp prediction_time() const { return t_current; }
    [[nodiscard]] CohortCounts counts() const;
};

/// Builds the labeled dataset of one (last, current, next) triple.
CohortDataset build_dataset(const SnapshotStore& store, Timestamp t_last, Timestamp t_current,
                            Timestamp t_next, const CohortConfig& config);

/// CSV: question_id,current_views,future_views,views_growth,label,prediction_time
void write_dataset_csv(const CohortDataset& dataset, std::ostream& out);
/// JSON sidecar with triple, config and counts.
std::string dataset_sidecar_json(const CohortDataset& dataset);
/// Writes `path` (CSV) and `path` + ".json".
void save_dataset(const CohortDataset& dataset, const std::filesystem::path& path);
/// Reads a dataset written by save_dataset (sidecar required).
CohortDataset load_dataset(const std::filesystem::path& path);

// Descriptive analyses ------------------------------------------------------

struct ForgottenSignalTable {
    std::vector<Timestamp> dump_times;
    std::vector<double> top_n_grid;
    /// fraction[d][g]: share of the top grid[g] questions at dump d whose views
    /// in the reference window are below the stale ceiling.
    std::vector<std::vector<double>> fraction;
    /// Top questions with no view delta in the window (absent at its end).
    std::vector<std::vector<std::size_t>> excluded;
};

ForgottenSignalTable forgotten_signal(const SnapshotStore& store, std::span<const Timestamp> dump_times,
                                      Timestamp window_start, Timestamp window_end, const CohortConfig& config);

struct ConcentrationRow {
    double top_fraction = 0.0;
    std::size_t top_count = 0;
    double share = 0.0;
};

/// Share of all period views taken by the top-K% questions of the period.
std::vector<ConcentrationRow> view_concentration(const SnapshotStore& store, Timestamp t1, Timestamp t2,
                                                 std::span<const double> top_grid);
/// Same, from already computed per-question period views.
std::vector<ConcentrationRow> view_concentration(std::span<const std::int64_t> period_views,
                                                 std::span<const double> top_grid);

struct Period {
    Timestamp start;
    Timestamp end;
};

struct OverlapRow {
    Period first;
    Period second;
    std::size_t top_questions = 0;
    std::size_t persisting_questions = 0;
    double question_overlap = 0.0;
    std::size_t top_tags = 0;
    std::size_t persisting_tags = 0;
    double tag_overlap = 0.0;
};

/// Highly viewed questions and most popular tags of one period.
struct PeriodTops {
    std::vector<std::int64_t> question_ids;  // ascending
    std::vector<std::string> tags;           // ascending
};

PeriodTops period_tops(const SnapshotStore& store, Period period, double fraction);

std::vector<OverlapRow> persistence_overlap(const SnapshotStore& store,
                                            std::span<const std::pair<Period, Period>> period_pairs,
                                            const CohortConfig& config);

struct Histogram {
    std::vector<double> edges;  // bins are [edges[i], edges[i+1])
    std::vector<std::size_t> counts;
    std::size_t below = 0;  // values < edges.front()
    std::size_t above = 0;  // values >= edges.back()

    [[nodiscard]] std::size_t total() const;
};

/// Default edges: -1.0 to 3.0 in steps of 0.1.
std::vector<double> default_growth_edges();
Histogram views_growth_histogram(const CohortDataset& dataset, std::span<const double> edges);

struct Summary {
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

/// Linear-interpolation quantiles (type 7); zero summary for empty input.
Summary summarize(std::vector<double> values);

struct ClosedComparison {
    std::size_t dataset_questions = 0;
    std::size_t dataset_closed = 0;
    double closed_fraction = 0.0;
    std::size_t store_closed = 0;
    // indicator order: answers, comments, score, views
    static constexpr const char* kIndicators[4] = {"answers", "comments", "score", "views"};
    Summary closed[4];
    Summary dataset[4];
};

/// Closed means closed_date <= t_current. The closed group is every closed
/// question in the t_current dump; the dataset group is the cohort itself.
ClosedComparison closed_comparison(const SnapshotStore& store, const CohortDataset& dataset, Timestamp t_current);

}  // namespace forgetq
