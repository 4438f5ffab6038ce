#include "forgetq/snapshot_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "forgetq/log.hpp"
#include "forgetq/text.hpp"
#include "json.hpp"

namespace forgetq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kManifestName = "manifest.json";
constexpr std::string_view kStoreFormat = "forgetq-snapshot-store";
constexpr int kStoreVersion = 1;

template <typename T>
void permute(std::vector<T>& v, const std::vector<std::size_t>& order) {
    std::vector<T> out;
    out.reserve(v.size());
    for (std::size_t i : order) out.push_back(std::move(v[i]));
    v = std::move(out);
}

StringColumn permute(const StringColumn& col, const std::vector<std::size_t>& order) {
    StringColumn out;
    out.bytes.reserve(col.bytes.size());
    out.offsets.reserve(col.offsets.size());
    for (std::size_t i : order) out.push_back(col.at(i));
    return out;
}

std::vector<std::size_t> sort_order(const std::vector<std::int64_t>& ids) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    return order;
}

void require_unique(const std::vector<std::int64_t>& sorted_ids, const char* what) {
    const auto dup = std::adjacent_find(sorted_ids.begin(), sorted_ids.end());
    if (dup != sorted_ids.end()) {
        throw DataError(std::string("duplicate ") + what + " id " + std::to_string(*dup));
    }
}

std::string join_tags(const std::vector<std::string>& tags) {
    std::string out;
    for (const auto& t : tags) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

void fsync_path(const fs::path& p) {
    const int fd = ::open(p.c_str(), O_RDONLY);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

class StoreLock {
public:
    explicit StoreLock(const fs::path& root) {
        fd_ = ::open((root / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw DataError("cannot create lock file in " + root.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw DataError("cannot lock store " + root.string());
        }
    }
    ~StoreLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    int fd_;
};

json info_to_json(const SnapshotInfo& s) {
    json files = json::object();
    for (const auto& [name, crc] : s.file_crc) files[name] = crc;
    return json{{"dump_time", s.dump_time.iso()},
                {"dump_time_millis", s.dump_time.millis()},
                {"directory", s.directory},
                {"questions", s.questions},
                {"answers", s.answers},
                {"users", s.users},
                {"tags", s.tags},
                {"has_text", s.has_text},
                {"files", files}};
}

SnapshotInfo info_from_json(const json& j) {
    SnapshotInfo s;
    s.dump_time = Timestamp{j.at("dump_time_millis").get<std::int64_t>()};
    s.directory = j.at("directory").get<std::string>();
    s.questions = j.at("questions").get<std::uint64_t>();
    s.answers = j.at("answers").get<std::uint64_t>();
    s.users = j.at("users").get<std::uint64_t>();
    s.tags = j.at("tags").get<std::uint64_t>();
    s.has_text = j.at("has_text").get<bool>();
    for (const auto& [name, crc] : j.at("files").items()) s.file_crc[name] = crc.get<std::uint32_t>();
    return s;
}

std::vector<SnapshotInfo> read_manifest(const fs::path& root, std::uint64_t* next_generation = nullptr) {
    const fs::path path = root / kManifestName;
    std::ifstream in(path);
    if (!in) throw DataError("not a snapshot store (no manifest): " + root.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("corrupt store manifest " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != kStoreFormat || j.value("format_version", 0) != kStoreVersion) {
        throw DataError("unsupported store format in " + path.string());
    }
    std::vector<SnapshotInfo> out;
    for (const auto& s : j.at("snapshots")) out.push_back(info_from_json(s));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.dump_time < b.dump_time; });
    if (next_generation) *next_generation = j.value("next_generation", std::uint64_t{1});
    return out;
}

void write_manifest(const fs::path& root, const std::vector<SnapshotInfo>& snapshots,
                    std::uint64_t next_generation) {
    json list = json::array();
    for (const auto& s : snapshots) list.push_back(info_to_json(s));
    const json j{{"format", kStoreFormat},
                 {"format_version", kStoreVersion},
                 {"column_format_version", columns::kFormatVersion},
                 {"next_generation", next_generation},
                 {"snapshots", list}};
    const fs::path tmp = root / (std::string(kManifestName) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump(2) << '\n';
        out.flush();
        if (!out) throw DataError("cannot write manifest in " + root.string());
    }
    fsync_path(tmp);
    fs::rename(tmp, root / kManifestName);
    fsync_path(root);
}

struct ColumnSpec {
    const char* name;
    std::vector<std::int64_t> QuestionTable::*member;
};

constexpr ColumnSpec kQuestionColumns[] = {
    {"id", &QuestionTable::id},
    {"view_count", &QuestionTable::view_count},
    {"score", &QuestionTable::score},
    {"answer_count", &QuestionTable::answer_count},
    {"comment_count", &QuestionTable::comment_count},
    {"favorite_count", &QuestionTable::favorite_count},
    {"creation_date", &QuestionTable::creation_date},
    {"last_activity_date", &QuestionTable::last_activity_date},
    {"owner_user_id", &QuestionTable::owner_user_id},
    {"accepted_answer_id", &QuestionTable::accepted_answer_id},
    {"closed_date", &QuestionTable::closed_date},
    {"title_len", &QuestionTable::title_len},
    {"body_len", &QuestionTable::body_len},
    {"code_len", &QuestionTable::code_len},
};

struct AnswerColumnSpec {
    const char* name;
    std::vector<std::int64_t> AnswerTable::*member;
};

constexpr AnswerColumnSpec kAnswerColumns[] = {
    {"id", &AnswerTable::id},
    {"parent_id", &AnswerTable::parent_id},
    {"score", &AnswerTable::score},
    {"comment_count", &AnswerTable::comment_count},
    {"creation_date", &AnswerTable::creation_date},
    {"last_activity_date", &AnswerTable::last_activity_date},
    {"body_len", &AnswerTable::body_len},
    {"owner_user_id", &AnswerTable::owner_user_id},
};

struct UserColumnSpec {
    const char* name;
    std::vector<std::int64_t> UserTable::*member;
};

constexpr UserColumnSpec kUserColumns[] = {
    {"id", &UserTable::id},
    {"reputation", &UserTable::reputation},
    {"profile_views", &UserTable::profile_views},
    {"up_votes", &UserTable::up_votes},
    {"down_votes", &UserTable::down_votes},
    {"creation_date", &UserTable::creation_date},
};

std::int64_t opt_id(const std::optional<std::uint64_t>& v) {
    return v ? static_cast<std::int64_t>(*v) : columns::kNone;
}

}  // namespace

std::optional<std::size_t> QuestionTable::find(std::int64_t question_id) const {
    const auto it = std::lower_bound(id.begin(), id.end(), question_id);
    if (it == id.end() || *it != question_id) return std::nullopt;
    return static_cast<std::size_t>(it - id.begin());
}

std::vector<std::string_view> QuestionTable::tags_of(std::size_t row) const {
    std::vector<std::string_view> out;
    const std::string_view joined = tags.at(row);
    std::size_t start = 0;
    while (start < joined.size()) {
        std::size_t end = joined.find(' ', start);
        if (end == std::string_view::npos) end = joined.size();
        if (end > start) out.push_back(joined.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::optional<std::size_t> UserTable::find(std::int64_t user_id) const {
    const auto it = std::lower_bound(id.begin(), id.end(), user_id);
    if (it == id.end() || *it != user_id) return std::nullopt;
    return static_cast<std::size_t>(it - id.begin());
}

std::optional<std::int64_t> ViewDeltas::find(std::int64_t id) const {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) return std::nullopt;
    return views[static_cast<std::size_t>(it - ids.begin())];
}

// ---------------------------------------------------------------- builder

SnapshotBuilder::SnapshotBuilder(Timestamp dump_time, WriteOptions options)
    : dump_time_(dump_time), options_(options) {
    tables_.dump_time = dump_time;
}

void SnapshotBuilder::add(const QuestionRecord& q) {
    QuestionTable& t = tables_.questions;
    const text::StrippedHtml body = text::strip_html(q.body_html);
    t.id.push_back(static_cast<std::int64_t>(q.id));
    t.view_count.push_back(q.view_count);
    t.score.push_back(q.score);
    t.answer_count.push_back(q.answer_count);
    t.comment_count.push_back(q.comment_count);
    t.favorite_count.push_back(q.favorite_count);
    t.creation_date.push_back(q.creation_date.millis());
    t.last_activity_date.push_back(q.last_activity_date.millis());
    t.owner_user_id.push_back(opt_id(q.owner_user_id));
    t.accepted_answer_id.push_back(opt_id(q.accepted_answer_id));
    t.closed_date.push_back(q.closed_date ? q.closed_date->millis() : columns::kNoTime);
    t.title_len.push_back(static_cast<std::int64_t>(text::utf8_length(q.title)));
    t.body_len.push_back(static_cast<std::int64_t>(text::utf8_length(body.all)));
    t.code_len.push_back(static_cast<std::int64_t>(text::utf8_length(body.code)));
    t.tags.push_back(join_tags(q.tags));
    if (options_.store_text) texts_.push_back({q.title, q.body_html});
}

void SnapshotBuilder::add(const AnswerRecord& a) {
    AnswerTable& t = tables_.answers;
    t.id.push_back(static_cast<std::int64_t>(a.id));
    t.parent_id.push_back(static_cast<std::int64_t>(a.parent_question_id));
    t.score.push_back(a.score);
    t.comment_count.push_back(a.comment_count);
    t.creation_date.push_back(a.creation_date.millis());
    t.last_activity_date.push_back(a.last_activity_date.millis());
    t.body_len.push_back(static_cast<std::int64_t>(text::utf8_length(text::strip_html(a.body_html).all)));
    t.owner_user_id.push_back(opt_id(a.owner_user_id));
}

void SnapshotBuilder::add(const UserRecord& u) {
    UserTable& t = tables_.users;
    t.id.push_back(static_cast<std::int64_t>(u.id));
    t.reputation.push_back(u.reputation);
    t.profile_views.push_back(u.profile_views);
    t.up_votes.push_back(u.up_votes);
    t.down_votes.push_back(u.down_votes);
    t.creation_date.push_back(u.creation_date.millis());
}

void SnapshotBuilder::add(const TagRecord& t) {
    tables_.tags.name.push_back(t.name);
    tables_.tags.question_count.push_back(t.question_count);
}

SnapshotTables SnapshotBuilder::finish(std::vector<QuestionText>* texts_by_row) {
    SnapshotTables out = std::move(tables_);
    tables_ = SnapshotTables{};
    tables_.dump_time = dump_time_;

    {
        QuestionTable& q = out.questions;
        const auto order = sort_order(q.id);
        if (!std::is_sorted(q.id.begin(), q.id.end())) {
            for (const auto& spec : kQuestionColumns) permute(q.*spec.member, order);
            q.tags = permute(q.tags, order);
            if (!texts_.empty()) permute(texts_, order);
        }
        require_unique(q.id, "question");
    }
    {
        AnswerTable& a = out.answers;
        if (!std::is_sorted(a.id.begin(), a.id.end())) {
            const auto order = sort_order(a.id);
            for (const auto& spec : kAnswerColumns) permute(a.*spec.member, order);
        }
        require_unique(a.id, "answer");
    }
    {
        UserTable& u = out.users;
        if (!std::is_sorted(u.id.begin(), u.id.end())) {
            const auto order = sort_order(u.id);
            for (const auto& spec : kUserColumns) permute(u.*spec.member, order);
        }
        require_unique(u.id, "user");
    }
    {
        TagTable& t = out.tags;
        std::vector<std::size_t> order(t.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return t.name.at(a) < t.name.at(b); });
        t.name = permute(t.name, order);
        permute(t.question_count, order);
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (t.name.at(i) == t.name.at(i - 1)) {
                throw DataError("duplicate tag " + std::string(t.name.at(i)));
            }
        }
    }
    if (texts_by_row) *texts_by_row = std::move(texts_);
    texts_.clear();
    return out;
}

// ------------------------------------------------------------------ store

SnapshotStore::SnapshotStore(fs::path root, std::vector<SnapshotInfo> snapshots)
    : root_(std::move(root)), snapshots_(std::move(snapshots)), io_(std::make_unique<columns::IoCounters>()) {}

SnapshotStore SnapshotStore::open(const fs::path& root, bool create) {
    if (!fs::exists(root / kManifestName)) {
        if (!create) throw DataError("no snapshot store at " + root.string());
        fs::create_directories(root);
        const StoreLock lock(root);
        if (!fs::exists(root / kManifestName)) write_manifest(root, {}, 1);
    }
    return SnapshotStore(root, read_manifest(root));
}

void SnapshotStore::reload_manifest() { snapshots_ = read_manifest(root_); }

std::vector<Timestamp> SnapshotStore::dump_times() const {
    std::vector<Timestamp> out;
    for (const auto& s : snapshots_) out.push_back(s.dump_time);
    return out;
}

bool SnapshotStore::has(Timestamp t) const {
    return std::any_of(snapshots_.begin(), snapshots_.end(), [&](const auto& s) { return s.dump_time == t; });
}

const SnapshotInfo& SnapshotStore::info(Timestamp t) const {
    for (const auto& s : snapshots_) {
        if (s.dump_time == t) return s;
    }
    throw DataError("no snapshot for dump time " + t.iso() + " in " + root_.string());
}

fs::path SnapshotStore::dir_of(Timestamp t) const { return root_ / info(t).directory; }

void SnapshotStore::write(const SnapshotTables& tables, const std::vector<QuestionText>* texts) {
    if (texts && texts->size() != tables.questions.size()) {
        throw std::invalid_argument("text rows do not match question rows");
    }
    const StoreLock lock(root_);
    std::uint64_t generation = 1;
    std::vector<SnapshotInfo> current = read_manifest(root_, &generation);

    const std::string dir_name = tables.dump_time.compact() + ".g" + std::to_string(generation);
    const fs::path staging = root_ / (".staging-" + dir_name);
    fs::remove_all(staging);

    SnapshotInfo info;
    info.dump_time = tables.dump_time;
    info.directory = dir_name;
    info.questions = tables.questions.size();
    info.answers = tables.answers.size();
    info.users = tables.users.size();
    info.tags = tables.tags.size();
    info.has_text = texts != nullptr;

    try {
        for (const char* sub : {"questions", "answers", "users", "tags", "text"}) {
            fs::create_directories(staging / sub);
        }
        auto record = [&](const std::string& rel, std::uint32_t crc) {
            fsync_path(staging / rel);
            info.file_crc[rel] = crc;
        };
        for (const auto& spec : kQuestionColumns) {
            const std::string rel = std::string("questions/") + spec.name + ".col";
            record(rel, columns::write_int64(staging / rel, tables.questions.*spec.member));
        }
        record("questions/tags.col", columns::write_strings(staging / "questions/tags.col", tables.questions.tags));
        for (const auto& spec : kAnswerColumns) {
            const std::string rel = std::string("answers/") + spec.name + ".col";
            record(rel, columns::write_int64(staging / rel, tables.answers.*spec.member));
        }
        for (const auto& spec : kUserColumns) {
            const std::string rel = std::string("users/") + spec.name + ".col";
            record(rel, columns::write_int64(staging / rel, tables.users.*spec.member));
        }
        record("tags/name.col", columns::write_strings(staging / "tags/name.col", tables.tags.name));
        record("tags/question_count.col",
               columns::write_int64(staging / "tags/question_count.col", tables.tags.question_count));
        if (texts) {
            // Title of row i is [off[2i], off[2i+1]); body is [off[2i+1], off[2i+2]).
            std::string blob;
            std::vector<std::int64_t> offsets{0};
            offsets.reserve(texts->size() * 2 + 1);
            for (const auto& t : *texts) {
                blob += t.title;
                offsets.push_back(static_cast<std::int64_t>(blob.size()));
                blob += t.body_html;
                offsets.push_back(static_cast<std::int64_t>(blob.size()));
            }
            record("text/blob.col", columns::write_bytes(staging / "text/blob.col", blob));
            record("text/offsets.col", columns::write_int64(staging / "text/offsets.col", offsets));
        }
        fsync_path(staging);
        fs::rename(staging, root_ / dir_name);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }

    std::string replaced;
    auto it = std::find_if(current.begin(), current.end(), [&](const auto& s) { return s.dump_time == tables.dump_time; });
    if (it != current.end()) {
        replaced = it->directory;
        *it = info;
    } else {
        current.push_back(info);
    }
    std::sort(current.begin(), current.end(), [](const auto& a, const auto& b) { return a.dump_time < b.dump_time; });
    try {
        write_manifest(root_, current, generation + 1);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(root_ / dir_name, ec);
        throw;
    }
    if (!replaced.empty()) {
        std::error_code ec;
        fs::remove_all(root_ / replaced, ec);
    }
    snapshots_ = std::move(current);
    log::info("snapshot_store", "committed snapshot " + tables.dump_time.iso(),
              {{"questions", static_cast<std::int64_t>(info.questions)},
               {"answers", static_cast<std::int64_t>(info.answers)},
               {"users", static_cast<std::int64_t>(info.users)}});
}

QuestionTable SnapshotStore::load_questions(Timestamp t) const {
    const fs::path dir = dir_of(t) / "questions";
    QuestionTable q;
    for (const auto& spec : kQuestionColumns) {
        q.*spec.member = columns::ColumnReader(dir / (std::string(spec.name) + ".col"), io_.get()).read_int64();
    }
    q.tags = columns::ColumnReader(dir / "tags.col", io_.get()).read_strings();
    return q;
}

AnswerTable SnapshotStore::load_answers(Timestamp t) const {
    const fs::path dir = dir_of(t) / "answers";
    AnswerTable a;
    for (const auto& spec : kAnswerColumns) {
        a.*spec.member = columns::ColumnReader(dir / (std::string(spec.name) + ".col"), io_.get()).read_int64();
    }
    return a;
}

UserTable SnapshotStore::load_users(Timestamp t) const {
    const fs::path dir = dir_of(t) / "users";
    UserTable u;
    for (const auto& spec : kUserColumns) {
        u.*spec.member = columns::ColumnReader(dir / (std::string(spec.name) + ".col"), io_.get()).read_int64();
    }
    return u;
}

TagTable SnapshotStore::load_tags(Timestamp t) const {
    const fs::path dir = dir_of(t) / "tags";
    TagTable tags;
    tags.name = columns::ColumnReader(dir / "name.col", io_.get()).read_strings();
    tags.question_count = columns::ColumnReader(dir / "question_count.col", io_.get()).read_int64();
    return tags;
}

SnapshotTables SnapshotStore::load(Timestamp t) const {
    SnapshotTables s;
    s.dump_time = t;
    s.questions = load_questions(t);
    s.answers = load_answers(t);
    s.users = load_users(t);
    s.tags = load_tags(t);
    return s;
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> SnapshotStore::load_views(Timestamp t) const {
    const fs::path dir = dir_of(t) / "questions";
    auto ids = columns::ColumnReader(dir / "id.col", io_.get()).read_int64();
    auto views = columns::ColumnReader(dir / "view_count.col", io_.get()).read_int64();
    return {std::move(ids), std::move(views)};
}

std::vector<std::optional<QuestionText>> SnapshotStore::load_texts(Timestamp t,
                                                                   std::span<const std::int64_t> question_ids) const {
    const SnapshotInfo& si = info(t);
    if (!si.has_text) throw DataError("snapshot " + t.iso() + " was stored without text");
    const fs::path dir = root_ / si.directory;
    const auto ids = columns::ColumnReader(dir / "questions/id.col", io_.get()).read_int64();

    // Resolve rows, then read offsets in ascending row order.
    std::vector<std::pair<std::size_t, std::size_t>> wanted;  // (row, request index)
    for (std::size_t i = 0; i < question_ids.size(); ++i) {
        const auto it = std::lower_bound(ids.begin(), ids.end(), question_ids[i]);
        if (it != ids.end() && *it == question_ids[i]) wanted.emplace_back(static_cast<std::size_t>(it - ids.begin()), i);
    }
    std::sort(wanted.begin(), wanted.end());
    std::vector<std::size_t> offset_rows;
    for (const auto& [row, _] : wanted) {
        if (offset_rows.empty() || offset_rows.back() != 2 * row) offset_rows.push_back(2 * row);
        offset_rows.push_back(2 * row + 1);
        offset_rows.push_back(2 * row + 2);
    }
    offset_rows.erase(std::unique(offset_rows.begin(), offset_rows.end()), offset_rows.end());
    columns::ColumnReader offsets_col(dir / "text/offsets.col", io_.get());
    const auto offsets = offsets_col.read_int64_at(offset_rows);
    auto offset_of = [&](std::size_t k) {
        const auto it = std::lower_bound(offset_rows.begin(), offset_rows.end(), k);
        return offsets[static_cast<std::size_t>(it - offset_rows.begin())];
    };

    columns::ColumnReader blob(dir / "text/blob.col", io_.get());
    std::vector<std::optional<QuestionText>> out(question_ids.size());
    for (const auto& [row, index] : wanted) {
        const auto a = offset_of(2 * row);
        const auto b = offset_of(2 * row + 1);
        const auto c = offset_of(2 * row + 2);
        std::string both = blob.read_byte_range(static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(c - a));
        QuestionText qt;
        qt.title = both.substr(0, static_cast<std::size_t>(b - a));
        qt.body_html = both.substr(static_cast<std::size_t>(b - a));
        out[index] = std::move(qt);
    }
    return out;
}

void SnapshotStore::verify(Timestamp t) const {
    const SnapshotInfo& si = info(t);
    for (const auto& [rel, crc] : si.file_crc) {
        if (columns::file_crc32(root_ / si.directory / rel) != crc) {
            throw DataError("checksum mismatch for " + rel + " in snapshot " + t.iso());
        }
    }
}

namespace {

std::int64_t checked_delta(std::int64_t before, std::int64_t after, std::int64_t id, bool strict,
                           std::uint64_t& clamped) {
    const std::int64_t d = after - before;
    if (d >= 0) return d;
    if (strict) {
        throw DataError("view count decreased for question " + std::to_string(id) + " (" +
                        std::to_string(before) + " -> " + std::to_string(after) + ")");
    }
    ++clamped;
    return 0;
}

void require_order(Timestamp t1, Timestamp t2) {
    if (!(t1 < t2)) throw DataError("period end must be after period start");
}

}  // namespace

ViewDeltas SnapshotStore::views_between(Timestamp t1, Timestamp t2, bool strict) const {
    require_order(t1, t2);
    const auto [ids1, views1] = load_views(t1);
    const auto [ids2, views2] = load_views(t2);
    ViewDeltas out;
    out.ids.reserve(ids2.size());
    out.views.reserve(ids2.size());
    std::size_t i = 0;
    std::size_t matched = 0;
    for (std::size_t j = 0; j < ids2.size(); ++j) {
        while (i < ids1.size() && ids1[i] < ids2[j]) ++i;
        std::int64_t before = 0;
        if (i < ids1.size() && ids1[i] == ids2[j]) {
            before = views1[i];
            ++matched;
        }
        out.ids.push_back(ids2[j]);
        out.views.push_back(checked_delta(before, views2[j], ids2[j], strict, out.negative_clamped));
    }
    out.absent_at_end = ids1.size() - matched;
    return out;
}

ViewDeltas SnapshotStore::views_between(std::span<const std::int64_t> question_ids, Timestamp t1, Timestamp t2,
                                        bool strict) const {
    require_order(t1, t2);
    std::vector<std::int64_t> wanted(question_ids.begin(), question_ids.end());
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

    const fs::path d1 = dir_of(t1) / "questions";
    const fs::path d2 = dir_of(t2) / "questions";
    const auto ids1 = columns::ColumnReader(d1 / "id.col", io_.get()).read_int64();
    const auto ids2 = columns::ColumnReader(d2 / "id.col", io_.get()).read_int64();

    ViewDeltas out;
    std::vector<std::size_t> rows1, rows2;
    std::vector<std::int64_t> present_ids;
    std::vector<bool> in_first;
    for (const std::int64_t id : wanted) {
        const auto it2 = std::lower_bound(ids2.begin(), ids2.end(), id);
        if (it2 == ids2.end() || *it2 != id) {
            ++out.absent_at_end;
            continue;
        }
        present_ids.push_back(id);
        rows2.push_back(static_cast<std::size_t>(it2 - ids2.begin()));
        const auto it1 = std::lower_bound(ids1.begin(), ids1.end(), id);
        const bool found = it1 != ids1.end() && *it1 == id;
        in_first.push_back(found);
        if (found) rows1.push_back(static_cast<std::size_t>(it1 - ids1.begin()));
    }
    const auto v2 = columns::ColumnReader(d2 / "view_count.col", io_.get()).read_int64_at(rows2);
    const auto v1 = columns::ColumnReader(d1 / "view_count.col", io_.get()).read_int64_at(rows1);
    std::size_t k1 = 0;
    for (std::size_t k = 0; k < present_ids.size(); ++k) {
        const std::int64_t before = in_first[k] ? v1[k1++] : 0;
        out.ids.push_back(present_ids[k]);
        out.views.push_back(checked_delta(before, v2[k], present_ids[k], strict, out.negative_clamped));
    }
    return out;
}

void write_snapshot(const DumpSnapshot& snapshot, SnapshotStore& store, WriteOptions options) {
    SnapshotBuilder builder(snapshot.dump_time, options);
    for (const auto& q : snapshot.questions) builder.add(q);
    for (const auto& a : snapshot.answers) builder.add(a);
    for (const auto& u : snapshot.users) builder.add(u);
    for (const auto& t : snapshot.tags) builder.add(t);
    std::vector<QuestionText> texts;
    const SnapshotTables tables = builder.finish(&texts);
    store.write(tables, options.store_text ? &texts : nullptr);
}

DumpSnapshot read_snapshot(const SnapshotStore& store, Timestamp t) {
    const SnapshotTables tables = store.load(t);
    DumpSnapshot out;
    out.dump_time = t;
    const QuestionTable& q = tables.questions;
    std::vector<std::optional<QuestionText>> texts;
    if (store.info(t).has_text) texts = store.load_texts(t, q.id);
    auto opt_u = [](std::int64_t v) -> std::optional<std::uint64_t> {
        if (v == columns::kNone) return std::nullopt;
        return static_cast<std::uint64_t>(v);
    };
    for (std::size_t i = 0; i < q.size(); ++i) {
        QuestionRecord r;
        r.id = static_cast<PostId>(q.id[i]);
        r.creation_date = Timestamp{q.creation_date[i]};
        r.score = q.score[i];
        r.view_count = q.view_count[i];
        if (!texts.empty() && texts[i]) {
            r.title = texts[i]->title;
            r.body_html = texts[i]->body_html;
        }
        for (const auto tag : q.tags_of(i)) r.tags.emplace_back(tag);
        r.answer_count = q.answer_count[i];
        r.comment_count = q.comment_count[i];
        r.favorite_count = q.favorite_count[i];
        r.accepted_answer_id = opt_u(q.accepted_answer_id[i]);
        r.owner_user_id = opt_u(q.owner_user_id[i]);
        r.last_activity_date = Timestamp{q.last_activity_date[i]};
        if (q.closed_date[i] != columns::kNoTime) r.closed_date = Timestamp{q.closed_date[i]};
        out.questions.push_back(std::move(r));
    }
    const AnswerTable& a = tables.answers;
    for (std::size_t i = 0; i < a.size(); ++i) {
        AnswerRecord r;
        r.id = static_cast<PostId>(a.id[i]);
        r.parent_question_id = static_cast<PostId>(a.parent_id[i]);
        r.creation_date = Timestamp{a.creation_date[i]};
        r.score = a.score[i];
        r.comment_count = a.comment_count[i];
        r.last_activity_date = Timestamp{a.last_activity_date[i]};
        r.owner_user_id = opt_u(a.owner_user_id[i]);
        out.answers.push_back(std::move(r));
    }
    const UserTable& u = tables.users;
    for (std::size_t i = 0; i < u.size(); ++i) {
        out.users.push_back(UserRecord{static_cast<UserId>(u.id[i]), u.reputation[i], u.profile_views[i],
                                       u.up_votes[i], u.down_votes[i], Timestamp{u.creation_date[i]}});
    }
    for (std::size_t i = 0; i < tables.tags.size(); ++i) {
        out.tags.push_back(TagRecord{std::string(tables.tags.name.at(i)), tables.tags.question_count[i]});
    }
    return out;
}

}  // namespace forgetq
