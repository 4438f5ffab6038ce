#include "forgetq/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "forgetq/errors.hpp"
#include "forgetq/log.hpp"
#include "forgetq/text.hpp"
#include "json.hpp"

namespace forgetq {

using nlohmann::json;

namespace {

constexpr int kTagSlots = 5;
constexpr int kPrePopPeriods = 4;

std::vector<std::string> make_tag_names() {
    std::vector<std::string> n;
    for (const char* base : {"TagExistTime_", "TagPop_", "TagActiveTime_"}) {
        for (int q = 1; q <= kTagSlots; ++q) n.push_back(base + std::to_string(q));
    }
    for (int k = 1; k <= kPrePopPeriods; ++k) {
        for (int q = 1; q <= kTagSlots; ++q) n.push_back("TagPrePop_" + std::to_string(k) + "_" + std::to_string(q));
    }
    return n;
}

NamedValues zip(const std::vector<std::string>& names, const std::vector<double>& values) {
    NamedValues out;
    out.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) out.emplace_back(names[i], values[i]);
    return out;
}

double minutes(std::int64_t from, std::int64_t to) {
    return static_cast<double>(to - from) / static_cast<double>(kMillisPerMinute);
}

double days(std::int64_t from, std::int64_t to) {
    return static_cast<double>(to - from) / static_cast<double>(kMillisPerDay);
}

const char* group_key(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::kQuestion: return "question";
        case FeatureGroup::kUser: return "user";
        case FeatureGroup::kAnswer: return "answer";
        case FeatureGroup::kTag: return "tag";
        case FeatureGroup::kText: return "text";
    }
    return "?";
}

FeatureGroup group_from_key(std::string_view s) {
    for (const FeatureGroup g : {FeatureGroup::kQuestion, FeatureGroup::kUser, FeatureGroup::kAnswer,
                                 FeatureGroup::kTag, FeatureGroup::kText}) {
        if (s == group_key(g)) return g;
    }
    throw DataError("unknown feature group " + std::string(s));
}

}  // namespace

std::string_view group_name(FeatureGroup g) { return group_key(g); }

std::string_view field_name(TextField f) {
    switch (f) {
        case TextField::kBody: return "body";
        case TextField::kTitle: return "title";
        case TextField::kTags: return "tags";
    }
    return "?";
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].name == name) return i;
    }
    throw std::out_of_range("no feature named " + std::string(name));
}

const std::vector<std::string>& question_feature_names() {
    static const std::vector<std::string> n{"ageByCreDate", "ageByLastAct", "score",    "viewCount",
                                            "commentCount", "answerCount",  "bodyLen",  "codeLen",
                                            "titleLen",     "nOfVerbs",     "nOfPRP",   "nOfNouns"};
    return n;
}

const std::vector<std::string>& answer_feature_names() {
    static const std::vector<std::string> n{
        "FirstAnsScore",     "BestAnsScore",     "LastAnsScore",
        "FirstAnsComCount",  "BestAnsComCount",  "LastAnsComCount",
        "FirstAnsBodyLen",   "BestAnsBodyLen",   "LastAnsBodyLen",
        "TimeToGetFirstAns", "TimeToGetBestAns", "TimeToGetLastAns",
        "TimeToFirstAnsLastActDate", "TimeToBestAnsLastActDate", "TimeToLastAnsLastActDate"};
    return n;
}

const std::vector<std::string>& user_feature_names() {
    static const std::vector<std::string> n{"userRep", "UserViews", "UserUpVote", "UserDownVote"};
    return n;
}

const std::vector<std::string>& tag_feature_names() {
    static const std::vector<std::string> n = make_tag_names();
    return n;
}

// ------------------------------------------------------------------- text

const std::vector<std::string>& TextDocument::field(TextField f) const {
    switch (f) {
        case TextField::kBody: return body;
        case TextField::kTitle: return title;
        case TextField::kTags: return tags;
    }
    return body;
}

TextDocument make_document(std::string_view title, std::string_view body_html, std::string_view tags) {
    TextDocument d;
    d.body = text::tokenize(text::strip_html(body_html).prose);
    d.title = text::tokenize(title);
    d.tags = text::tokenize(tags);
    return d;
}

std::size_t TextCaps::of(TextField f) const {
    switch (f) {
        case TextField::kBody: return body;
        case TextField::kTitle: return title;
        case TextField::kTags: return tags;
    }
    return 0;
}

const TextFieldModel* TextModel::find(TextField f) const {
    for (const auto& m : fields) {
        if (m.field == f) return &m;
    }
    return nullptr;
}

TextModel fit_text_model(std::span<const TextDocument* const> training, std::span<const TextField> fields,
                         const TextCaps& caps) {
    if (training.empty()) throw DataError("cannot fit a text model on an empty training corpus");
    TextModel model;
    for (const TextField f : fields) {
        std::unordered_map<std::string, std::uint32_t> df;
        std::vector<std::string> seen;
        for (const TextDocument* doc : training) {
            seen = doc->field(f);
            std::sort(seen.begin(), seen.end());
            seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
            for (auto& term : seen) ++df[term];
        }
        std::vector<std::pair<std::string, std::uint32_t>> terms(df.begin(), df.end());
        std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (terms.size() > caps.of(f)) terms.resize(caps.of(f));
        TextFieldModel m;
        m.field = f;
        m.n_docs = training.size();
        const double n1 = 1.0 + static_cast<double>(m.n_docs);
        for (auto& [term, count] : terms) {
            m.column.emplace(term, static_cast<std::uint32_t>(m.vocabulary.size()));
            m.vocabulary.push_back(term);
            m.df.push_back(count);
            m.idf.push_back(std::log(n1 / (1.0 + count)) + 1.0);
        }
        model.fields.push_back(std::move(m));
    }
    return model;
}

SparseVector transform_text(const TextFieldModel& model, std::span<const std::string> tokens) {
    std::map<std::uint32_t, double> tf;
    for (const auto& t : tokens) {
        const auto it = model.column.find(t);
        if (it != model.column.end()) tf[it->second] += 1.0;
    }
    SparseVector v;
    double norm = 0.0;
    for (const auto& [col, count] : tf) {
        const double w = count * model.idf[col];
        v.index.push_back(col);
        v.value.push_back(w);
        norm += w * w;
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& w : v.value) w /= norm;
    }
    return v;
}

SparseVector TextFieldModel::transform(std::span<const std::string> tokens) const {
    return transform_text(*this, tokens);
}

// -------------------------------------------------------------- extractor

FeatureExtractor::FeatureExtractor(const SnapshotStore& store, Timestamp prediction_time, int gap_months)
    : store_(store),
      t_(prediction_time),
      gap_millis_(static_cast<std::int64_t>(std::llround(gap_months * kMillisPerMonth))) {
    if (!store.has(prediction_time)) throw DataError("no snapshot at prediction time " + prediction_time.iso());
    questions_ = store.load_questions(t_);
    answers_ = store.load_answers(t_);
    users_ = store.load_users(t_);
    has_text_ = store.info(t_).has_text;

    answer_rows_.resize(answers_.size());
    std::iota(answer_rows_.begin(), answer_rows_.end(), 0u);
    std::stable_sort(answer_rows_.begin(), answer_rows_.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return answers_.parent_id[a] < answers_.parent_id[b]; });
    answer_parents_.reserve(answer_rows_.size());
    for (const auto r : answer_rows_) answer_parents_.push_back(answers_.parent_id[r]);

    for (std::size_t r = 0; r < questions_.size(); ++r) {
        const std::int64_t created = questions_.creation_date[r];
        if (created > t_.millis()) continue;
        for (const auto tag : questions_.tags_of(r)) tag_dates_[std::string(tag)].push_back(created);
    }
    for (auto& [_, dates] : tag_dates_) std::sort(dates.begin(), dates.end());
}

std::size_t FeatureExtractor::row_of(std::int64_t question_id) const {
    const auto row = questions_.find(question_id);
    if (!row) throw DataError("question " + std::to_string(question_id) + " not present at " + t_.iso());
    return *row;
}

std::vector<std::optional<QuestionText>> FeatureExtractor::texts(std::span<const std::int64_t> question_ids) const {
    if (!has_text_) return std::vector<std::optional<QuestionText>>(question_ids.size());
    return store_.load_texts(t_, question_ids);
}

NamedValues FeatureExtractor::question_features(std::int64_t question_id) const {
    const std::int64_t id = question_id;
    return question_features(question_id, texts(std::span(&id, 1)).front());
}

NamedValues FeatureExtractor::question_features(std::int64_t question_id,
                                                const std::optional<QuestionText>& text) const {
    const std::size_t r = row_of(question_id);
    const auto& q = questions_;
    std::vector<double> v{
        months_between(Timestamp{q.creation_date[r]}, t_),
        std::max(0.0, months_between(Timestamp{q.last_activity_date[r]}, t_)),
        static_cast<double>(q.score[r]),
        static_cast<double>(q.view_count[r]),
        static_cast<double>(q.comment_count[r]),
        static_cast<double>(q.answer_count[r]),
        static_cast<double>(q.body_len[r]),
        static_cast<double>(q.code_len[r]),
        static_cast<double>(q.title_len[r]),
        kMissing, kMissing, kMissing};
    if (text) {
        text::PosCounts pos = text::count_pos(text->title);
        const text::PosCounts body = text::count_pos(text::strip_html(text->body_html).prose);
        pos.verbs += body.verbs;
        pos.pronouns += body.pronouns;
        pos.nouns += body.nouns;
        v[9] = static_cast<double>(pos.verbs);
        v[10] = static_cast<double>(pos.pronouns);
        v[11] = static_cast<double>(pos.nouns);
    }
    return zip(question_feature_names(), v);
}

NamedValues FeatureExtractor::answer_features(std::int64_t question_id, std::uint64_t* anomalies) const {
    const std::size_t qr = row_of(question_id);
    const auto lo = std::lower_bound(answer_parents_.begin(), answer_parents_.end(), question_id);
    const auto hi = std::upper_bound(lo, answer_parents_.end(), question_id);
    std::vector<std::uint32_t> rows;
    for (auto it = lo; it != hi; ++it) {
        const auto r = answer_rows_[static_cast<std::size_t>(it - answer_parents_.begin())];
        if (answers_.creation_date[r] <= t_.millis()) rows.push_back(r);
    }
    std::vector<double> v(15, kMissing);
    if (rows.empty()) return zip(answer_feature_names(), v);

    const auto& a = answers_;
    const auto earlier = [&](std::uint32_t x, std::uint32_t y) {
        return a.creation_date[x] != a.creation_date[y] ? a.creation_date[x] < a.creation_date[y] : a.id[x] < a.id[y];
    };
    const std::uint32_t first = *std::min_element(rows.begin(), rows.end(), earlier);
    const std::uint32_t last = *std::max_element(rows.begin(), rows.end(), earlier);
    std::optional<std::uint32_t> best;
    const std::int64_t accepted = questions_.accepted_answer_id[qr];
    if (accepted != columns::kNone) {
        for (const auto r : rows) {
            if (a.id[r] == accepted) best = r;
        }
    }
    if (!best) {
        best = rows.front();
        for (const auto r : rows) {
            if (a.score[r] > a.score[*best] || (a.score[r] == a.score[*best] && earlier(r, *best))) best = r;
        }
    }
    const std::int64_t q_created = questions_.creation_date[qr];
    const std::uint32_t picks[3] = {first, *best, last};
    for (int k = 0; k < 3; ++k) {
        const auto r = picks[k];
        v[0 + k] = static_cast<double>(a.score[r]);
        v[3 + k] = static_cast<double>(a.comment_count[r]);
        v[6 + k] = static_cast<double>(a.body_len[r]);
        double wait = minutes(q_created, a.creation_date[r]);
        if (wait < 0.0) {
            wait = 0.0;
            if (anomalies) ++*anomalies;
        }
        v[9 + k] = wait;
        v[12 + k] = std::max(0.0, minutes(a.creation_date[r], a.last_activity_date[r]));
    }
    return zip(answer_feature_names(), v);
}

std::string FeatureExtractor::tags_text(std::int64_t question_id) const {
    return std::string(questions_.tags.at(row_of(question_id)));
}

NamedValues FeatureExtractor::user_features(std::int64_t question_id) const {
    const std::size_t qr = row_of(question_id);
    std::vector<double> v(4, kMissing);
    const std::int64_t owner = questions_.owner_user_id[qr];
    if (owner != columns::kNone) {
        if (const auto ur = users_.find(owner)) {
            v = {static_cast<double>(users_.reputation[*ur]), static_cast<double>(users_.profile_views[*ur]),
                 static_cast<double>(users_.up_votes[*ur]), static_cast<double>(users_.down_votes[*ur])};
        }
    }
    return zip(user_feature_names(), v);
}

NamedValues FeatureExtractor::tag_features(std::int64_t question_id) const {
    const std::size_t qr = row_of(question_id);
    const auto tags = questions_.tags_of(qr);
    std::vector<double> v(kTagSlots * 3 + kTagSlots * kPrePopPeriods, kMissing);
    const std::int64_t now = t_.millis();
    for (int q = 0; q < kTagSlots && q < static_cast<int>(tags.size()); ++q) {
        const auto it = tag_dates_.find(std::string(tags[q]));
        if (it == tag_dates_.end() || it->second.empty()) {
            throw DataError("tag " + std::string(tags[q]) + " has no use before " + t_.iso());
        }
        const auto& dates = it->second;
        const std::int64_t first_use = dates.front();
        const std::int64_t last_use = dates.back();
        v[q] = days(first_use, now);
        v[kTagSlots + q] = static_cast<double>(dates.size());
        v[2 * kTagSlots + q] = days(first_use, last_use);
        for (int k = 1; k <= kPrePopPeriods; ++k) {
            const std::int64_t hi = now - (k - 1) * gap_millis_;
            const std::int64_t lo = now - k * gap_millis_;
            const auto n = std::upper_bound(dates.begin(), dates.end(), hi) -
                           std::upper_bound(dates.begin(), dates.end(), lo);
            v[3 * kTagSlots + (k - 1) * kTagSlots + q] = static_cast<double>(n);
        }
    }
    return zip(tag_feature_names(), v);
}

NamedValues extract_question_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time) {
    return FeatureExtractor(store, prediction_time, 6).question_features(question_id);
}

NamedValues extract_answer_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time) {
    return FeatureExtractor(store, prediction_time, 6).answer_features(question_id);
}

NamedValues extract_user_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time) {
    return FeatureExtractor(store, prediction_time, 6).user_features(question_id);
}

NamedValues extract_tag_features(const SnapshotStore& store, std::int64_t question_id, Timestamp prediction_time,
                                 int gap_months) {
    return FeatureExtractor(store, prediction_time, gap_months).tag_features(question_id);
}

// ----------------------------------------------------------------- matrix

bool FeatureSelection::has(FeatureGroup g) const {
    switch (g) {
        case FeatureGroup::kQuestion: return question;
        case FeatureGroup::kUser: return user;
        case FeatureGroup::kAnswer: return answer;
        case FeatureGroup::kTag: return tag;
        case FeatureGroup::kText: return !text.empty();
    }
    return false;
}

FeatureSelection FeatureSelection::all() {
    return {true, true, true, true, {TextField::kBody, TextField::kTitle, TextField::kTags}};
}

double FeatureMatrix::at(std::size_t row, std::size_t col) const {
    if (col < n_dense) return dense[row * n_dense + col];
    const auto b = sparse_col.begin() + static_cast<std::ptrdiff_t>(sparse_row_ptr[row]);
    const auto e = sparse_col.begin() + static_cast<std::ptrdiff_t>(sparse_row_ptr[row + 1]);
    const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(col));
    if (it == e || *it != col) return 0.0;
    return sparse_val[static_cast<std::size_t>(it - sparse_col.begin())];
}

std::vector<double> FeatureMatrix::column_major(std::span<const std::size_t> columns) const {
    std::vector<std::size_t> all;
    if (columns.empty()) {
        all.resize(cols());
        std::iota(all.begin(), all.end(), 0u);
        columns = all;
    }
    const std::size_t n = rows();
    std::vector<double> out(columns.size() * n, 0.0);
    std::vector<std::int64_t> pos(cols(), -1);
    for (std::size_t k = 0; k < columns.size(); ++k) pos.at(columns[k]) = static_cast<std::int64_t>(k);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n_dense; ++c) {
            if (pos[c] >= 0) out[static_cast<std::size_t>(pos[c]) * n + r] = dense[r * n_dense + c];
        }
        for (auto i = sparse_row_ptr[r]; i < sparse_row_ptr[r + 1]; ++i) {
            const auto p = pos[sparse_col[i]];
            if (p >= 0) out[static_cast<std::size_t>(p) * n + r] = sparse_val[i];
        }
    }
    return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix m;
    m.schema = schema;
    m.n_dense = n_dense;
    for (const std::size_t r : rows) {
        m.question_ids.push_back(question_ids.at(r));
        m.dense.insert(m.dense.end(), dense.begin() + static_cast<std::ptrdiff_t>(r * n_dense),
                       dense.begin() + static_cast<std::ptrdiff_t>((r + 1) * n_dense));
        for (auto i = sparse_row_ptr[r]; i < sparse_row_ptr[r + 1]; ++i) {
            m.sparse_col.push_back(sparse_col[i]);
            m.sparse_val.push_back(sparse_val[i]);
        }
        m.sparse_row_ptr.push_back(m.sparse_col.size());
    }
    return m;
}

bool FeatureMatrix::operator==(const FeatureMatrix& o) const {
    // Bitwise on doubles so that NaN markers compare equal.
    const auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
        return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    };
    return schema == o.schema && question_ids == o.question_ids && n_dense == o.n_dense && same(dense, o.dense) &&
           sparse_row_ptr == o.sparse_row_ptr && sparse_col == o.sparse_col && same(sparse_val, o.sparse_val);
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const std::vector<T>& v) {
    const std::uint64_t n = v.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
std::vector<T> read_raw(std::ifstream& in, const std::filesystem::path& p) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || n > (1ULL << 34)) throw DataError("corrupt matrix block " + p.string());
    std::vector<T> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in) throw DataError("truncated matrix block " + p.string());
    return v;
}

constexpr char kDenseMagic[8] = {'F', 'Q', 'D', 'E', 'N', 'S', '0', '1'};
constexpr char kSparseMagic[8] = {'F', 'Q', 'S', 'P', 'R', 'S', '0', '1'};

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
    return prefix.string() + suffix;
}

}  // namespace

void FeatureMatrix::save(const std::filesystem::path& prefix) const {
    json features = json::array();
    for (const auto& f : schema.features) {
        features.push_back({{"name", f.name}, {"group", group_key(f.group)}, {"sparse", f.sparse}});
    }
    json j{{"format", "forgetq-feature-matrix"}, {"version", 1}, {"rows", rows()},
           {"n_dense", n_dense}, {"features", features}, {"question_ids", question_ids}};
    {
        std::ofstream out(with_suffix(prefix, ".schema.json"), std::ios::binary | std::ios::trunc);
        out << j.dump(1) << "\n";
        if (!out) throw DataError("cannot write matrix schema for " + prefix.string());
    }
    {
        std::ofstream out(with_suffix(prefix, ".dense.bin"), std::ios::binary | std::ios::trunc);
        out.write(kDenseMagic, sizeof kDenseMagic);
        write_raw(out, dense);
        if (!out) throw DataError("cannot write dense block for " + prefix.string());
    }
    std::ofstream out(with_suffix(prefix, ".sparse.bin"), std::ios::binary | std::ios::trunc);
    out.write(kSparseMagic, sizeof kSparseMagic);
    // coordinate triplets
    std::vector<std::uint64_t> row_idx;
    for (std::size_t r = 0; r < rows(); ++r) {
        for (auto i = sparse_row_ptr[r]; i < sparse_row_ptr[r + 1]; ++i) row_idx.push_back(r);
    }
    write_raw(out, row_idx);
    write_raw(out, sparse_col);
    write_raw(out, sparse_val);
    if (!out) throw DataError("cannot write sparse block for " + prefix.string());
}

FeatureMatrix FeatureMatrix::load(const std::filesystem::path& prefix) {
    FeatureMatrix m;
    std::ifstream sj(with_suffix(prefix, ".schema.json"));
    if (!sj) throw DataError("missing matrix schema for " + prefix.string());
    try {
        const json j = json::parse(sj);
        if (j.at("format") != "forgetq-feature-matrix" || j.at("version") != 1) {
            throw DataError("unsupported matrix schema " + prefix.string());
        }
        m.n_dense = j.at("n_dense").get<std::size_t>();
        for (const auto& f : j.at("features")) {
            m.schema.features.push_back(
                {f.at("name").get<std::string>(), group_from_key(f.at("group").get<std::string>()), f.at("sparse").get<bool>()});
        }
        m.question_ids = j.at("question_ids").get<std::vector<std::int64_t>>();
    } catch (const json::exception& e) {
        throw DataError("bad matrix schema " + prefix.string() + ": " + e.what());
    }
    char magic[8];
    {
        const auto p = with_suffix(prefix, ".dense.bin");
        std::ifstream in(p, std::ios::binary);
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, kDenseMagic, sizeof magic) != 0) throw DataError("bad dense block " + p.string());
        m.dense = read_raw<double>(in, p);
    }
    const auto p = with_suffix(prefix, ".sparse.bin");
    std::ifstream in(p, std::ios::binary);
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kSparseMagic, sizeof magic) != 0) throw DataError("bad sparse block " + p.string());
    const auto row_idx = read_raw<std::uint64_t>(in, p);
    m.sparse_col = read_raw<std::uint32_t>(in, p);
    m.sparse_val = read_raw<double>(in, p);
    if (m.dense.size() != m.rows() * m.n_dense || row_idx.size() != m.sparse_col.size() ||
        row_idx.size() != m.sparse_val.size()) {
        throw DataError("matrix blocks disagree with schema for " + prefix.string());
    }
    m.sparse_row_ptr.assign(m.rows() + 1, 0);
    for (const auto r : row_idx) {
        if (r >= m.rows()) throw DataError("sparse row out of range in " + p.string());
        ++m.sparse_row_ptr[r + 1];
    }
    for (std::size_t r = 0; r < m.rows(); ++r) m.sparse_row_ptr[r + 1] += m.sparse_row_ptr[r];
    return m;
}

void FeatureMatrix::write_csv(std::ostream& out) const {
    out << "question_id";
    for (const auto& f : schema.features) out << ',' << f.name;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < rows(); ++r) {
        out << question_ids[r];
        for (std::size_t c = 0; c < cols(); ++c) {
            out << ',';
            const double v = at(r, c);
            if (std::isnan(v)) continue;
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

FeatureCache FeatureCache::build(const SnapshotStore& store, const CohortDataset& dataset, unsigned jobs) {
    const FeatureExtractor ex(store, dataset.prediction_time(), dataset.config.gap_months);
    FeatureCache cache;
    const std::size_t n = dataset.questions.size();
    for (const auto& q : dataset.questions) cache.question_ids.push_back(q.question_id);
    const auto texts = ex.texts(cache.question_ids);
    const std::size_t widths[4] = {question_feature_names().size(), user_feature_names().size(),
                                   answer_feature_names().size(), tag_feature_names().size()};
    const FeatureGroup groups[4] = {FeatureGroup::kQuestion, FeatureGroup::kUser, FeatureGroup::kAnswer,
                                    FeatureGroup::kTag};
    for (int g = 0; g < 4; ++g) cache.numeric[groups[g]].assign(n * widths[g], kMissing);
    cache.documents.resize(n);

    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, n / 64))));
    std::vector<std::uint64_t> anomalies(jobs, 0);
    const auto work = [&](unsigned worker) {
        for (std::size_t r = worker; r < n; r += jobs) {
            const std::int64_t id = cache.question_ids[r];
            const NamedValues parts[4] = {ex.question_features(id, texts[r]), ex.user_features(id),
                                          ex.answer_features(id, &anomalies[worker]), ex.tag_features(id)};
            for (int g = 0; g < 4; ++g) {
                auto& dst = cache.numeric.at(groups[g]);
                for (std::size_t k = 0; k < widths[g]; ++k) dst[r * widths[g] + k] = parts[g][k].second;
            }
            const std::string tags = ex.tags_text(id);
            cache.documents[r] = texts[r] ? make_document(texts[r]->title, texts[r]->body_html, tags)
                                          : make_document("", "", tags);
        }
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    cache.answer_time_anomalies = std::accumulate(anomalies.begin(), anomalies.end(), std::uint64_t{0});
    if (cache.answer_time_anomalies > 0) {
        log::warn("featurize", "answers created before their question; time to answer clamped to 0",
                  {{"count", static_cast<std::int64_t>(cache.answer_time_anomalies)}});
    }
    return cache;
}

FeatureMatrix build_feature_matrix(const FeatureCache& cache, const FeatureSelection& selection,
                                   const TextModel* text_model) {
    if (!selection.text.empty() && text_model == nullptr) {
        throw ConfigError("text features requested without a fitted text model");
    }
    FeatureMatrix m;
    m.question_ids = cache.question_ids;
    const std::size_t n = cache.question_ids.size();

    struct Block {
        const std::vector<double>* values;
        std::size_t width;
    };
    std::vector<Block> blocks;
    const std::pair<FeatureGroup, const std::vector<std::string>*> numeric[4] = {
        {FeatureGroup::kQuestion, &question_feature_names()},
        {FeatureGroup::kUser, &user_feature_names()},
        {FeatureGroup::kAnswer, &answer_feature_names()},
        {FeatureGroup::kTag, &tag_feature_names()}};
    for (const auto& [group, names] : numeric) {
        if (!selection.has(group)) continue;
        for (const auto& name : *names) m.schema.features.push_back({name, group, false});
        blocks.push_back({&cache.numeric.at(group), names->size()});
    }
    m.n_dense = m.schema.size();
    m.dense.reserve(n * m.n_dense);
    for (std::size_t r = 0; r < n; ++r) {
        for (const auto& b : blocks) {
            m.dense.insert(m.dense.end(), b.values->begin() + static_cast<std::ptrdiff_t>(r * b.width),
                           b.values->begin() + static_cast<std::ptrdiff_t>((r + 1) * b.width));
        }
    }

    std::vector<std::pair<const TextFieldModel*, std::uint32_t>> fields;  // model, first column
    for (const TextField f : selection.text) {
        const TextFieldModel* fm = text_model->find(f);
        if (fm == nullptr) throw ConfigError("text model lacks field " + std::string(field_name(f)));
        fields.emplace_back(fm, static_cast<std::uint32_t>(m.schema.size()));
        for (const auto& term : fm->vocabulary) {
            m.schema.features.push_back({std::string(field_name(f)) + ":" + term, FeatureGroup::kText, true});
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        for (const auto& [fm, base] : fields) {
            const SparseVector v = fm->transform(cache.documents[r].field(fm->field));
            for (std::size_t k = 0; k < v.index.size(); ++k) {
                m.sparse_col.push_back(base + v.index[k]);
                m.sparse_val.push_back(v.value[k]);
            }
        }
        m.sparse_row_ptr.push_back(m.sparse_col.size());
    }
    return m;
}

FeatureMatrix build_feature_matrix(const SnapshotStore& store, const CohortDataset& dataset,
                                   const FeatureSelection& selection, const TextModel* text_model) {
    return build_feature_matrix(FeatureCache::build(store, dataset), selection, text_model);
}

}  // namespace forgetq
