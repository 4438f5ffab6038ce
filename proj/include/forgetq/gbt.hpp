#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "forgetq/featurize.hpp"

namespace forgetq::gbt {

struct BoostConfig {
    int n_rounds = 200;
    double learning_rate = 0.1;
    int max_depth = 6;
    int min_samples_leaf = 20;
    int histogram_bins = 256;
    double l2_leaf_regularization = 1.0;  // lambda
    double subsample = 1.0;
    std::uint64_t seed = 1;
    unsigned jobs = 1;  // worker threads for histogram builds and split search

    void validate() const;  // ConfigError
    bool operator==(const BoostConfig&) const = default;
};

/// Gradient and hessian of the logistic loss with respect to the raw score.
std::pair<double, double> logistic_grad_hess(double score, int label);
double logistic_loss(double score, int label);
double sigmoid(double x);

/// Column-major numeric matrix, NaN = missing.
struct ColumnData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // values[c * rows + r]
    std::vector<std::string> names;

    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return values[c * rows + r]; }
    static ColumnData from(const FeatureMatrix& m);
};

struct Node {
    std::int32_t feature = -1;  // -1 for a leaf
    double threshold = 0.0;     // x <= threshold goes left
    bool default_left = false;  // where missing values go
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // leaf output, already scaled by the learning rate
    double gain = 0.0;

    [[nodiscard]] bool is_leaf() const { return feature < 0; }
    bool operator==(const Node&) const = default;
};

struct RegressionTree {
    std::vector<Node> nodes;  // nodes[0] is the root

    [[nodiscard]] double predict(const ColumnData& x, std::size_t row) const;
    [[nodiscard]] std::size_t leaf_count() const;
    bool operator==(const RegressionTree&) const = default;
};

struct BoostedEnsemble {
    BoostConfig config;
    double base_score = 0.0;  // log-odds of training prevalence
    std::vector<std::string> feature_names;
    std::vector<RegressionTree> trees;
    std::vector<double> importance;       // total split gain per feature
    std::vector<double> loss_trajectory;  // mean training log-loss after each round

    void save(const std::filesystem::path& path) const;
    static BoostedEnsemble load(const std::filesystem::path& path);
    bool operator==(const BoostedEnsemble&) const = default;
};

/// Global equal-frequency cut points of one column (midpoints between
/// distinct values); every distinct value gets its own bin when there are at
/// most `max_bins` of them.
std::vector<double> bin_cuts(std::span<const double> column, int max_bins);

BoostedEnsemble fit(const ColumnData& x, std::span<const int> labels, const BoostConfig& config);
BoostedEnsemble fit(const FeatureMatrix& m, std::span<const int> labels, const BoostConfig& config);

std::vector<double> predict_raw(const BoostedEnsemble& model, const ColumnData& x);
std::vector<double> predict_proba(const BoostedEnsemble& model, const ColumnData& x);
std::vector<double> predict_proba(const BoostedEnsemble& model, const FeatureMatrix& m);

/// Feature name -> total split gain (0 for features never split on).
std::vector<std::pair<std::string, double>> feature_importance(const BoostedEnsemble& model);

}  // namespace forgetq::gbt
