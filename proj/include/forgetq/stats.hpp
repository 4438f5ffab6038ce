#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "forgetq/cohort.hpp"
#include "forgetq/featurize.hpp"

namespace forgetq::stats {

/// 1-based mid-ranks (ties share the average rank).
std::vector<double> mid_ranks(std::span<const double> values);

struct MannWhitney {
    double u = 0.0;  // for sample_a
    double p = 1.0;  // two-sided
    bool exact = false;
};

/// Exact conditional distribution when n_a * n_b <= kExactLimit, normal
/// approximation with tie and continuity corrections otherwise.
inline constexpr std::size_t kExactLimit = 64;
MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b);
/// The two branches on their own.
MannWhitney mann_whitney_exact(std::span<const double> a, std::span<const double> b);
MannWhitney mann_whitney_normal(std::span<const double> a, std::span<const double> b);

struct Spearman {
    double rho = 0.0;
    bool degenerate = false;  // a rank vector had zero variance
};

Spearman spearman(std::span<const double> x, std::span<const double> y);

/// P(value_pos > value_neg) + P(equal) / 2, without orientation correction.
double rank_auc(std::span<const double> values, std::span<const int> labels);
/// max(auc, 1 - auc).
double single_feature_auc(std::span<const double> values, std::span<const int> labels);

struct FeatureReportRow {
    std::string feature;
    FeatureGroup group = FeatureGroup::kQuestion;
    double u = 0.0;
    double p = 1.0;
    double rho = 0.0;
    double auc = 0.5;
    std::size_t n_forgotten = 0;
    std::size_t n_unforgotten = 0;
    std::size_t missing = 0;
    bool degenerate = false;  // a class empty after dropping missing rows, or constant ranks
};

/// One row per dense feature, sorted by auc descending (schema order on ties).
std::vector<FeatureReportRow> predictiveness_report(const FeatureMatrix& matrix, const CohortDataset& dataset);
/// Same, from raw labels aligned to the matrix rows (1 = being forgotten).
std::vector<FeatureReportRow> predictiveness_report(const FeatureMatrix& matrix, std::span<const int> labels);

void write_report_csv(std::span<const FeatureReportRow> rows, std::ostream& out);

}  // namespace forgetq::stats
