#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forgetq/column_file.hpp"
#include "forgetq/errors.hpp"
#include "forgetq/records.hpp"
#include "forgetq/timestamp.hpp"

namespace forgetq {

using columns::StringColumn;

/// Per-question columns of one dump, sorted by strictly increasing id.
/// Optional ids use 0 for "absent"; closed_date uses columns::kNoTime.
struct QuestionTable {
    std::vector<std::int64_t> id;
    std::vector<std::int64_t> view_count;
    std::vector<std::int64_t> score;
    std::vector<std::int64_t> answer_count;
    std::vector<std::int64_t> comment_count;
    std::vector<std::int64_t> favorite_count;
    std::vector<std::int64_t> creation_date;  // epoch millis
    std::vector<std::int64_t> last_activity_date;
    std::vector<std::int64_t> owner_user_id;
    std::vector<std::int64_t> accepted_answer_id;
    std::vector<std::int64_t> closed_date;
    std::vector<std::int64_t> title_len;  // code points
    std::vector<std::int64_t> body_len;   // code points after HTML stripping
    std::vector<std::int64_t> code_len;   // code points inside <code>
    StringColumn tags;                    // space-separated, in stored order

    [[nodiscard]] std::size_t size() const { return id.size(); }
    /// Row of `question_id`, if present.
    [[nodiscard]] std::optional<std::size_t> find(std::int64_t question_id) const;
    [[nodiscard]] std::vector<std::string_view> tags_of(std::size_t row) const;

    bool operator==(const QuestionTable&) const = default;
};

struct AnswerTable {
    std::vector<std::int64_t> id;
    std::vector<std::int64_t> parent_id;
    std::vector<std::int64_t> score;
    std::vector<std::int64_t> comment_count;
    std::vector<std::int64_t> creation_date;
    std::vector<std::int64_t> last_activity_date;
    std::vector<std::int64_t> body_len;
    std::vector<std::int64_t> owner_user_id;

    [[nodiscard]] std::size_t size() const { return id.size(); }
    bool operator==(const AnswerTable&) const = default;
};

struct UserTable {
    std::vector<std::int64_t> id;
    std::vector<std::int64_t> reputation;
    std::vector<std::int64_t> profile_views;
    std::vector<std::int64_t> up_votes;
    std::vector<std::int64_t> down_votes;
    std::vector<std::int64_t> creation_date;

    [[nodiscard]] std::size_t size() const { return id.size(); }
    [[nodiscard]] std::optional<std::size_t> find(std::int64_t user_id) const;
    bool operator==(const UserTable&) const = default;
};

struct TagTable {
    StringColumn name;  // sorted
    std::vector<std::int64_t> question_count;

    [[nodiscard]] std::size_t size() const { return question_count.size(); }
    bool operator==(const TagTable&) const = default;
};

/// Title and body of one question, as stored in the text blob.
struct QuestionText {
    std::string title;
    std::string body_html;
};

/// Fully loaded snapshot tables.
struct SnapshotTables {
    Timestamp dump_time;
    QuestionTable questions;
    AnswerTable answers;
    UserTable users;
    TagTable tags;
};

struct SnapshotInfo {
    Timestamp dump_time;
    std::string directory;  // relative to the store root
    std::uint64_t questions = 0;
    std::uint64_t answers = 0;
    std::uint64_t users = 0;
    std::uint64_t tags = 0;
    bool has_text = false;
    std::map<std::string, std::uint32_t> file_crc;  // relative path -> crc32 of the file
};

struct WriteOptions {
    /// Store raw title/body text in the blob file.
    bool store_text = true;
};

/// Accumulates records for one dump in columnar form. Record bodies are
/// reduced to lengths immediately; raw question text is kept only if
/// requested. Records may arrive in any id order.
class SnapshotBuilder {
public:
    explicit SnapshotBuilder(Timestamp dump_time, WriteOptions options = {});

    void add(const QuestionRecord& q);
    void add(const AnswerRecord& a);
    void add(const UserRecord& u);
    void add(const TagRecord& t);

    /// Sorts by id and validates. Duplicate ids throw DataError.
    SnapshotTables finish(std::vector<QuestionText>* texts_by_row = nullptr);

    [[nodiscard]] Timestamp dump_time() const { return dump_time_; }
    [[nodiscard]] const WriteOptions& options() const { return options_; }

private:
    Timestamp dump_time_;
    WriteOptions options_;
    SnapshotTables tables_;
    std::vector<QuestionText> texts_;
};

/// Result of a views-gained query between two dumps.
struct ViewDeltas {
    std::vector<std::int64_t> ids;    // ascending
    std::vector<std::int64_t> views;  // same length as ids
    std::uint64_t absent_at_end = 0;  // requested (or earlier-present) ids missing at t2
    std::uint64_t negative_clamped = 0;

    [[nodiscard]] std::size_t size() const { return ids.size(); }
    [[nodiscard]] std::optional<std::int64_t> find(std::int64_t id) const;
};

/// Directory of per-dump columnar snapshots plus a manifest. One writer at a
/// time (advisory file lock); readers only ever see committed snapshots.
class SnapshotStore {
public:
    /// Opens an existing store, or creates an empty one when `create` is set.
    static SnapshotStore open(const std::filesystem::path& root, bool create = false);

    [[nodiscard]] const std::filesystem::path& root() const { return root_; }
    [[nodiscard]] std::vector<Timestamp> dump_times() const;
    [[nodiscard]] bool has(Timestamp t) const;
    [[nodiscard]] const SnapshotInfo& info(Timestamp t) const;

    /// Writes (or atomically replaces) the snapshot for `tables.dump_time`.
    void write(const SnapshotTables& tables, const std::vector<QuestionText>* texts = nullptr);

    [[nodiscard]] SnapshotTables load(Timestamp t) const;
    [[nodiscard]] QuestionTable load_questions(Timestamp t) const;
    [[nodiscard]] AnswerTable load_answers(Timestamp t) const;
    [[nodiscard]] UserTable load_users(Timestamp t) const;
    [[nodiscard]] TagTable load_tags(Timestamp t) const;
    /// Ids and cumulative view counts only.
    [[nodiscard]] std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> load_views(Timestamp t) const;
    /// Raw text for each requested question (any order); nullopt entries for
    /// questions that are absent. Throws DataError when text was elided.
    [[nodiscard]] std::vector<std::optional<QuestionText>> load_texts(
        Timestamp t, std::span<const std::int64_t> question_ids) const;

    /// Checks every file of a snapshot against the manifest checksums.
    void verify(Timestamp t) const;

    /// Views gained per question between two dumps. Questions created inside
    /// the period count from zero; questions missing at t2 are omitted and
    /// counted. Negative deltas are clamped to zero and counted, or throw
    /// DataError in strict mode.
    [[nodiscard]] ViewDeltas views_between(Timestamp t1, Timestamp t2, bool strict = false) const;
    [[nodiscard]] ViewDeltas views_between(std::span<const std::int64_t> question_ids, Timestamp t1,
                                           Timestamp t2, bool strict = false) const;

    columns::IoCounters& io() const { return *io_; }

private:
    SnapshotStore(std::filesystem::path root, std::vector<SnapshotInfo> snapshots);
    void reload_manifest();
    [[nodiscard]] std::filesystem::path dir_of(Timestamp t) const;

    std::filesystem::path root_;
    std::vector<SnapshotInfo> snapshots_;  // ascending dump_time
    std::unique_ptr<columns::IoCounters> io_;
};

/// Builds and writes one snapshot from fully parsed records.
void write_snapshot(const DumpSnapshot& snapshot, SnapshotStore& store, WriteOptions options = {});

/// Reconstructs records from a stored snapshot (text fields filled when stored).
/// Mainly for round-trip checks.
DumpSnapshot read_snapshot(const SnapshotStore& store, Timestamp t);

}  // namespace forgetq
