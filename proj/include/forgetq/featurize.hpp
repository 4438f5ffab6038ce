#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "forgetq/cohort.hpp"
#include "forgetq/snapshot_store.hpp"

namespace forgetq {

enum class FeatureGroup { kQuestion, kUser, kAnswer, kTag, kText };
enum class TextField { kBody, kTitle, kTags };

std::string_view group_name(FeatureGroup g);
std::string_view field_name(TextField f);

/// Missing numeric values are quiet NaN; sparse text weights are never missing.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

using NamedValues = std::vector<std::pair<std::string, double>>;

struct FeatureSpec {
    std::string name;
    FeatureGroup group;
    bool sparse = false;  // tf-idf weight column

    bool operator==(const FeatureSpec&) const = default;
};

struct FeatureSchema {
    std::vector<FeatureSpec> features;  // dense columns first, then sparse

    [[nodiscard]] std::size_t size() const { return features.size(); }
    [[nodiscard]] std::size_t index_of(std::string_view name) const;  // throws std::out_of_range
    bool operator==(const FeatureSchema&) const = default;
};

/// Fixed names of each numeric group, in column order.
const std::vector<std::string>& question_feature_names();  // 12
const std::vector<std::string>& answer_feature_names();    // 15
const std::vector<std::string>& user_feature_names();      // 4
const std::vector<std::string>& tag_feature_names();       // 35

/// Tokens of one question's three text fields.
struct TextDocument {
    std::vector<std::string> body;  // prose only, code excluded
    std::vector<std::string> title;
    std::vector<std::string> tags;

    [[nodiscard]] const std::vector<std::string>& field(TextField f) const;
};

TextDocument make_document(std::string_view title, std::string_view body_html, std::string_view tags);

struct SparseVector {
    std::vector<std::uint32_t> index;  // ascending
    std::vector<double> value;
};

struct TextFieldModel {
    TextField field = TextField::kBody;
    std::size_t n_docs = 0;
    std::vector<std::string> vocabulary;  // column order: df descending, then lexicographic
    std::vector<std::uint32_t> df;
    std::vector<double> idf;
    std::unordered_map<std::string, std::uint32_t> column;

    [[nodiscard]] SparseVector transform(std::span<const std::string> tokens) const;
};

struct TextCaps {
    std::size_t body = 500;
    std::size_t title = 300;
    std::size_t tags = 200;

    [[nodiscard]] std::size_t of(TextField f) const;
};

struct TextModel {
    std::vector<TextFieldModel> fields;

    [[nodiscard]] const TextFieldModel* find(TextField f) const;
};

/// Fits the per-field vocabularies and idf on training documents only.
/// idf(t) = ln((1 + N) / (1 + df(t))) + 1.
TextModel fit_text_model(std::span<const TextDocument* const> training, std::span<const TextField> fields,
                         const TextCaps& caps = {});

/// Raw-count tf times idf, L2-normalised; empty or out-of-vocabulary -> zero vector.
SparseVector transform_text(const TextFieldModel& model, std::span<const std::string> tokens);

/// Reads only the snapshot at the prediction time. Every feature is computed
/// from that one dump, so nothing after the prediction time can leak in.
class FeatureExtractor {
public:
    FeatureExtractor(const SnapshotStore& store, Timestamp prediction_time, int gap_months);

    [[nodiscard]] Timestamp prediction_time() const { return t_; }

    /// Loads the question text itself when the store kept it.
    NamedValues question_features(std::int64_t question_id) const;
    /// POS counts come from `text`; missing when it is empty.
    NamedValues question_features(std::int64_t question_id, const std::optional<QuestionText>& text) const;
    /// `anomalies` is incremented for answers created before the question.
    NamedValues answer_features(std::int64_t question_id, std::uint64_t* anomalies = nullptr) const;
    NamedValues user_features(std::int64_t question_id) const;
    NamedValues tag_features(std::int64_t question_id) const;
    /// Stored tags joined by spaces, in slot order.
    std::string tags_text(std::int64_t question_id) const;

    [[nodiscard]] bool has_text() const { return has_text_; }
    /// Raw text of each question (nullopt throughout when the store has none).
    std::vector<std::optional<QuestionText>> texts(std::span<const std::int64_t> question_ids) const;

private:
    std::size_t row_of(std::int64_t question_id) const;

    const SnapshotStore& store_;
    Timestamp t_;
    std::int64_t gap_millis_;
    QuestionTable questions_;
    AnswerTable answers_;
    UserTable users_;
    std::vector<std::uint32_t> answer_rows_;       // answer rows ordered by (parent id, row)
    std::vector<std::int64_t> answer_parents_;     // parent id of each entry above
    std::unordered_map<std::string, std::vector<std::int64_t>> tag_dates_;  // sorted creation dates
    bool has_text_ = false;
};

// Single-question conveniences matching the extractor methods.
NamedValues extract_question_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time);
NamedValues extract_answer_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time);
NamedValues extract_user_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time);
NamedValues extract_tag_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time,
                                 int gap_months);

/// Which groups (and which text fields) a matrix holds.
struct FeatureSelection {
    bool question = false;
    bool user = false;
    bool answer = false;
    bool tag = false;
    std::vector<TextField> text;

    [[nodiscard]] bool has(FeatureGroup g) const;
    static FeatureSelection all();
};

struct FeatureMatrix {
    FeatureSchema schema;
    std::vector<std::int64_t> question_ids;  // row order == dataset order
    std::size_t n_dense = 0;
    std::vector<double> dense;  // row-major, rows x n_dense
    // Sparse tf-idf block, CSR with schema column indices >= n_dense.
    std::vector<std::uint64_t> sparse_row_ptr{0};
    std::vector<std::uint32_t> sparse_col;
    std::vector<double> sparse_val;

    [[nodiscard]] std::size_t rows() const { return question_ids.size(); }
    [[nodiscard]] std::size_t cols() const { return schema.size(); }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const;
    /// Column-major dense copy of the selected columns (all when empty).
    [[nodiscard]] std::vector<double> column_major(std::span<const std::size_t> columns = {}) const;
    /// Rows at the given indices, in that order.
    [[nodiscard]] FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

    /// <prefix>.schema.json, <prefix>.dense.bin, <prefix>.sparse.bin
    void save(const std::filesystem::path& prefix) const;
    static FeatureMatrix load(const std::filesystem::path& prefix);
    void write_csv(std::ostream& out) const;

    bool operator==(const FeatureMatrix&) const;
};

/// Numeric features and documents of a whole dataset, extracted once so that
/// feature sets and per-split text models can be assembled cheaply.
struct FeatureCache {
    std::vector<std::int64_t> question_ids;
    std::map<FeatureGroup, std::vector<double>> numeric;  // row-major per group
    std::vector<TextDocument> documents;
    std::uint64_t answer_time_anomalies = 0;

    static FeatureCache build(const SnapshotStore& store, const CohortDataset& dataset, unsigned jobs = 1);
};

FeatureMatrix build_feature_matrix(const FeatureCache& cache, const FeatureSelection& selection,
                                   const TextModel* text_model);
FeatureMatrix build_feature_matrix(const SnapshotStore& store, const CohortDataset& dataset,
                                   const FeatureSelection& selection, const TextModel* text_model);

}  // namespace forgetq
