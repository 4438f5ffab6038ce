#include "forgetq/dump_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "forgetq/log.hpp"

namespace forgetq {

bool is_valid(const QuestionRecord& q) {
    return q.id > 0 && !q.tags.empty() && q.tags.size() <= 5 &&
           q.last_activity_date >= q.creation_date && q.view_count >= 0 && q.answer_count >= 0 &&
           q.comment_count >= 0 && q.favorite_count >= 0;
}

bool is_valid(const AnswerRecord& a) {
    return a.id > 0 && a.parent_question_id > 0 && a.last_activity_date >= a.creation_date &&
           a.comment_count >= 0;
}

bool is_valid(const UserRecord& u) {
    return u.id > 0 && u.reputation >= 0 && u.profile_views >= 0 && u.up_votes >= 0 &&
           u.down_votes >= 0;
}

bool is_valid(const TagRecord& t) {
    return !t.name.empty() && t.question_count >= 0 &&
           t.name.find_first_of("<>") == std::string::npos;
}

ParseError::ParseError(std::uint64_t offset, const std::string& message)
    : DataError("byte " + std::to_string(offset) + ": " + message), offset_(offset) {}

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Field extraction helpers. Each returns false when the attribute is present
// but unusable; absence is reported through the optional.
bool get_int(const xml::Row& row, std::string_view name, std::optional<std::int64_t>& out) {
    out.reset();
    const std::string* v = row.find(name);
    if (!v) return true;
    std::int64_t x = 0;
    const auto res = std::from_chars(v->data(), v->data() + v->size(), x);
    if (res.ec != std::errc{} || res.ptr != v->data() + v->size()) return false;
    out = x;
    return true;
}

bool get_time(const xml::Row& row, std::string_view name, std::optional<Timestamp>& out) {
    out.reset();
    const std::string* v = row.find(name);
    if (!v) return true;
    out = Timestamp::parse(*v);
    return out.has_value();
}

class Fields {
public:
    explicit Fields(const xml::Row& row) : row_(row) {}

    std::int64_t required_int(std::string_view name) {
        std::optional<std::int64_t> v;
        if (!get_int(row_, name, v)) fail("unparseable integer attribute ", name);
        if (!v) fail("missing mandatory attribute ", name);
        return v.value_or(0);
    }
    std::int64_t int_or(std::string_view name, std::int64_t fallback) {
        std::optional<std::int64_t> v;
        if (!get_int(row_, name, v)) fail("unparseable integer attribute ", name);
        return v.value_or(fallback);
    }
    std::optional<std::uint64_t> optional_id(std::string_view name) {
        std::optional<std::int64_t> v;
        if (!get_int(row_, name, v)) fail("unparseable integer attribute ", name);
        if (v && *v > 0) return static_cast<std::uint64_t>(*v);
        return std::nullopt;
    }
    Timestamp required_time(std::string_view name) {
        std::optional<Timestamp> v;
        const bool present = row_.find(name) != nullptr;
        if (!present) fail("missing mandatory attribute ", name);
        if (!get_time(row_, name, v)) fail("unparseable timestamp in ", name);
        return v.value_or(Timestamp{});
    }
    std::optional<Timestamp> optional_time(std::string_view name) {
        std::optional<Timestamp> v;
        if (!get_time(row_, name, v)) fail("unparseable timestamp in ", name);
        return v;
    }
    std::string text(std::string_view name) {
        const std::string* v = row_.find(name);
        return v ? *v : std::string{};
    }
    [[nodiscard]] bool has(std::string_view name) const { return row_.find(name) != nullptr; }

    [[nodiscard]] bool failed() const { return error_.has_value(); }
    [[nodiscard]] const std::string& error() const { return *error_; }

private:
    void fail(std::string_view what, std::string_view name) {
        if (!error_) error_ = std::string(what) + std::string(name);
    }

    const xml::Row& row_;
    std::optional<std::string> error_;
};

}  // namespace

std::vector<std::string> split_tags(std::string_view text) {
    std::vector<std::string> tags;
    auto push = [&](std::string_view t) {
        if (!t.empty()) tags.push_back(to_lower(t));
    };
    if (text.find('<') != std::string_view::npos) {
        std::size_t i = 0;
        while ((i = text.find('<', i)) != std::string_view::npos) {
            const std::size_t close = text.find('>', i);
            if (close == std::string_view::npos) break;
            push(text.substr(i + 1, close - i - 1));
            i = close + 1;
        }
    } else {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= text.size(); ++i) {
            if (i == text.size() || text[i] == '|') {
                push(text.substr(start, i - start));
                start = i + 1;
            }
        }
    }
    return tags;
}

namespace detail {

ReaderBase::ReaderBase(std::istream& in, ParseOptions options)
    : rows_(in, options.chunk_bytes), options_(options) {}

void ReaderBase::warn(std::uint64_t offset, std::string message) {
    if (options_.strict) throw ParseError(offset, message);
    ++stats_.warning_count;
    if (stats_.warnings.size() < options_.max_kept_warnings) {
        log::warn("dump_ingest", "skipped row at byte " + std::to_string(offset) + ": " + message);
        stats_.warnings.push_back({offset, std::move(message)});
    }
}

const xml::Row* ReaderBase::next_row() {
    for (;;) {
        switch (rows_.next(row_)) {
            case xml::RowReader::Status::kEnd:
                return nullptr;
            case xml::RowReader::Status::kMalformed:
                ++stats_.rows;
                warn(rows_.issue().offset, rows_.issue().message);
                continue;
            case xml::RowReader::Status::kRow:
                ++stats_.rows;
                return &row_;
        }
    }
}

}  // namespace detail

PostReader::PostReader(std::istream& in, std::optional<Timestamp> dump_time, ParseOptions options)
    : ReaderBase(in, options), dump_time_(dump_time) {}

std::optional<PostRecord> PostReader::next() {
    while (const xml::Row* row = next_row()) {
        Fields f(*row);
        const std::int64_t id = f.required_int("Id");
        const std::int64_t type = f.required_int("PostTypeId");
        const Timestamp created = f.required_time("CreationDate");
        if (f.failed()) {
            warn(row->offset, f.error());
            continue;
        }
        if (type != 1 && type != 2) {
            ++stats_.skipped_other_type;
            continue;
        }
        if (id <= 0) {
            warn(row->offset, "non-positive Id");
            continue;
        }
        if (dump_time_ && created > *dump_time_) {
            warn(row->offset, "CreationDate after dump time");
            continue;
        }
        const Timestamp last_activity = f.optional_time("LastActivityDate").value_or(created);
        if (type == 1) {
            QuestionRecord q;
            q.id = static_cast<PostId>(id);
            q.creation_date = created;
            q.score = f.int_or("Score", 0);
            q.view_count = f.int_or("ViewCount", 0);
            q.body_html = f.text("Body");
            q.title = f.text("Title");
            q.tags = split_tags(f.text("Tags"));
            q.answer_count = f.int_or("AnswerCount", 0);
            q.comment_count = f.int_or("CommentCount", 0);
            q.favorite_count = f.int_or("FavoriteCount", 0);
            q.accepted_answer_id = f.optional_id("AcceptedAnswerId");
            q.owner_user_id = f.optional_id("OwnerUserId");
            q.last_activity_date = last_activity;
            q.closed_date = f.optional_time("ClosedDate");
            if (f.failed()) {
                warn(row->offset, f.error());
                continue;
            }
            if (q.last_activity_date < q.creation_date) {
                warn(row->offset, "LastActivityDate before CreationDate (clamped)");
                q.last_activity_date = q.creation_date;
            }
            if (!is_valid(q)) {
                warn(row->offset, "question violates record invariants (tags/counters)");
                continue;
            }
            ++stats_.records;
            return PostRecord{std::move(q)};
        }
        AnswerRecord a;
        a.id = static_cast<PostId>(id);
        a.parent_question_id = f.optional_id("ParentId").value_or(0);
        a.creation_date = created;
        a.score = f.int_or("Score", 0);
        a.comment_count = f.int_or("CommentCount", 0);
        a.body_html = f.text("Body");
        a.last_activity_date = last_activity;
        a.owner_user_id = f.optional_id("OwnerUserId");
        if (f.failed()) {
            warn(row->offset, f.error());
            continue;
        }
        if (a.last_activity_date < a.creation_date) {
            warn(row->offset, "LastActivityDate before CreationDate (clamped)");
            a.last_activity_date = a.creation_date;
        }
        if (!is_valid(a)) {
            warn(row->offset, "answer violates record invariants (ParentId/counters)");
            continue;
        }
        ++stats_.records;
        return PostRecord{std::move(a)};
    }
    return std::nullopt;
}

UserReader::UserReader(std::istream& in, ParseOptions options) : ReaderBase(in, options) {}

std::optional<UserRecord> UserReader::next() {
    while (const xml::Row* row = next_row()) {
        Fields f(*row);
        UserRecord u;
        const std::int64_t id = f.required_int("Id");
        u.reputation = f.int_or("Reputation", 0);
        u.profile_views = f.int_or("Views", 0);
        u.up_votes = f.int_or("UpVotes", 0);
        u.down_votes = f.int_or("DownVotes", 0);
        u.creation_date = f.optional_time("CreationDate").value_or(Timestamp{});
        if (f.failed()) {
            warn(row->offset, f.error());
            continue;
        }
        // The community bot carries Id -1 in real dumps.
        if (id <= 0) {
            warn(row->offset, "non-positive user Id");
            continue;
        }
        u.id = static_cast<UserId>(id);
        if (!is_valid(u)) {
            warn(row->offset, "negative user counter");
            continue;
        }
        ++stats_.records;
        return u;
    }
    return std::nullopt;
}

TagReader::TagReader(std::istream& in, ParseOptions options) : ReaderBase(in, options) {}

std::optional<TagRecord> TagReader::next() {
    while (const xml::Row* row = next_row()) {
        Fields f(*row);
        TagRecord t;
        if (!f.has("TagName")) {
            warn(row->offset, "missing mandatory attribute TagName");
            continue;
        }
        t.name = to_lower(f.text("TagName"));
        t.question_count = f.int_or("Count", 0);
        if (f.failed()) {
            warn(row->offset, f.error());
            continue;
        }
        if (!is_valid(t)) {
            warn(row->offset, "invalid tag record");
            continue;
        }
        ++stats_.records;
        return t;
    }
    return std::nullopt;
}

std::vector<PostRecord> parse_posts(std::istream& in, std::optional<Timestamp> dump_time,
                                    ParseStats* stats, ParseOptions options) {
    PostReader reader(in, dump_time, options);
    std::vector<PostRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    if (stats) *stats = reader.stats();
    return out;
}

std::vector<UserRecord> parse_users(std::istream& in, ParseStats* stats, ParseOptions options) {
    UserReader reader(in, options);
    std::vector<UserRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    if (stats) *stats = reader.stats();
    return out;
}

std::vector<TagRecord> parse_tags(std::istream& in, ParseStats* stats, ParseOptions options) {
    TagReader reader(in, options);
    std::vector<TagRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    if (stats) *stats = reader.stats();
    return out;
}

}  // namespace forgetq
