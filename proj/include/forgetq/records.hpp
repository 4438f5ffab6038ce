#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "forgetq/timestamp.hpp"

namespace forgetq {

using PostId = std::uint64_t;
using UserId = std::uint64_t;

struct QuestionRecord {
    PostId id = 0;
    Timestamp creation_date;
    std::int64_t score = 0;
    std::int64_t view_count = 0;
    std::string body_html;
    std::string title;
    std::vector<std::string> tags;
    std::int64_t answer_count = 0;
    std::int64_t comment_count = 0;
    std::int64_t favorite_count = 0;
    std::optional<PostId> accepted_answer_id;
    std::optional<UserId> owner_user_id;
    Timestamp last_activity_date;
    std::optional<Timestamp> closed_date;

    bool operator==(const QuestionRecord&) const = default;
};

struct AnswerRecord {
    PostId id = 0;
    PostId parent_question_id = 0;
    Timestamp creation_date;
    std::int64_t score = 0;
    std::int64_t comment_count = 0;
    std::string body_html;
    Timestamp last_activity_date;
    std::optional<UserId> owner_user_id;

    bool operator==(const AnswerRecord&) const = default;
};

struct UserRecord {
    UserId id = 0;
    std::int64_t reputation = 0;
    std::int64_t profile_views = 0;
    std::int64_t up_votes = 0;
    std::int64_t down_votes = 0;
    Timestamp creation_date;

    bool operator==(const UserRecord&) const = default;
};

struct TagRecord {
    std::string name;
    std::int64_t question_count = 0;

    bool operator==(const TagRecord&) const = default;
};

using PostRecord = std::variant<QuestionRecord, AnswerRecord>;

/// Type invariants. Readers only emit records for which these hold.
bool is_valid(const QuestionRecord& q);
bool is_valid(const AnswerRecord& a);
bool is_valid(const UserRecord& u);
bool is_valid(const TagRecord& t);

/// Everything extracted from one dump, stamped with its publication time.
struct DumpSnapshot {
    Timestamp dump_time;
    std::vector<QuestionRecord> questions;
    std::vector<AnswerRecord> answers;
    std::vector<UserRecord> users;
    std::vector<TagRecord> tags;
};

}  // namespace forgetq
