#include "forgetq/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include "forgetq/errors.hpp"
#include "forgetq/xml_rows.hpp"
#include "json.hpp"

namespace forgetq::synth {

using nlohmann::json;

void SynthConfig::validate() const {
    if (dump_times.empty()) throw ConfigError("at least one dump time is required");
    for (std::size_t i = 1; i < dump_times.size(); ++i) {
        if (!(dump_times[i - 1] < dump_times[i])) throw ConfigError("dump times must be strictly increasing");
    }
    if (n_questions > 0 && (n_users == 0 || n_tags == 0)) throw ConfigError("n_users and n_tags must be positive");
    if (n_tags > 5000) throw ConfigError("n_tags must be at most 5000");
    if (!(history_months > 0)) throw ConfigError("history_months must be positive");
    if (!(view_scale >= 0) || !(nb_dispersion > 0) || !(zipf_exponent >= 0)) {
        throw ConfigError("view model parameters out of range");
    }
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
    };
    prob(down_tag_fraction, "down_tag_fraction");
    prob(signal_strength, "signal_strength");
    prob(null_forgotten_rate, "null_forgotten_rate");
    prob(low_view_bias, "low_view_bias");
    prob(accept_probability, "accept_probability");
    prob(closed_probability, "closed_probability");
    prob(tag_term_bias, "tag_term_bias");
    if (!(highly_viewed_fraction > 0.0 && highly_viewed_fraction <= 1.0)) {
        throw ConfigError("highly_viewed_fraction must be in (0, 1]");
    }
    if (uniform_period_views < 0) throw ConfigError("uniform_period_views must be >= 0");
    if (!(mean_answers >= 0) || !(answer_latency_minutes > 0)) throw ConfigError("answer model out of range");
    if (vocabulary < 10) throw ConfigError("vocabulary must be at least 10 words");
}

SynthConfig config_from_json(const std::string& text) {
    SynthConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
        for (const auto& [k, v] : j.items()) {
            if (k == "n_questions") c.n_questions = v.get<std::size_t>();
            else if (k == "n_users") c.n_users = v.get<std::size_t>();
            else if (k == "n_tags") c.n_tags = v.get<std::size_t>();
            else if (k == "dump_times") {
                c.dump_times.clear();
                for (const auto& s : v) {
                    const auto t = Timestamp::parse(s.get<std::string>());
                    if (!t) throw ConfigError("bad dump time " + s.get<std::string>());
                    c.dump_times.push_back(*t);
                }
            } else if (k == "history_months") c.history_months = v.get<double>();
            else if (k == "zipf_exponent") c.zipf_exponent = v.get<double>();
            else if (k == "view_scale") c.view_scale = v.get<double>();
            else if (k == "nb_dispersion") c.nb_dispersion = v.get<double>();
            else if (k == "trend_up") c.trend_up = v.get<double>();
            else if (k == "trend_down") c.trend_down = v.get<double>();
            else if (k == "down_tag_fraction") c.down_tag_fraction = v.get<double>();
            else if (k == "signal_strength") c.signal_strength = v.get<double>();
            else if (k == "null_forgotten_rate") c.null_forgotten_rate = v.get<double>();
            else if (k == "low_view_bias") c.low_view_bias = v.get<double>();
            else if (k == "highly_viewed_fraction") c.highly_viewed_fraction = v.get<double>();
            else if (k == "uniform_views") c.uniform_views = v.get<bool>();
            else if (k == "uniform_period_views") c.uniform_period_views = v.get<std::int64_t>();
            else if (k == "mean_answers") c.mean_answers = v.get<double>();
            else if (k == "answer_latency_minutes") c.answer_latency_minutes = v.get<double>();
            else if (k == "accept_probability") c.accept_probability = v.get<double>();
            else if (k == "closed_probability") c.closed_probability = v.get<double>();
            else if (k == "vocabulary") c.vocabulary = v.get<std::size_t>();
            else if (k == "body_words") c.body_words = v.get<std::size_t>();
            else if (k == "title_words") c.title_words = v.get<std::size_t>();
            else if (k == "tag_term_bias") c.tag_term_bias = v.get<double>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else throw ConfigError("unknown synth config key '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad synth config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

json config_json(const SynthConfig& c) {
    json times = json::array();
    for (const auto t : c.dump_times) times.push_back(t.iso());
    return json{{"n_questions", c.n_questions},
                {"n_users", c.n_users},
                {"n_tags", c.n_tags},
                {"dump_times", times},
                {"history_months", c.history_months},
                {"zipf_exponent", c.zipf_exponent},
                {"view_scale", c.view_scale},
                {"nb_dispersion", c.nb_dispersion},
                {"trend_up", c.trend_up},
                {"trend_down", c.trend_down},
                {"down_tag_fraction", c.down_tag_fraction},
                {"signal_strength", c.signal_strength},
                {"null_forgotten_rate", c.null_forgotten_rate},
                {"low_view_bias", c.low_view_bias},
                {"highly_viewed_fraction", c.highly_viewed_fraction},
                {"uniform_views", c.uniform_views},
                {"uniform_period_views", c.uniform_period_views},
                {"mean_answers", c.mean_answers},
                {"answer_latency_minutes", c.answer_latency_minutes},
                {"accept_probability", c.accept_probability},
                {"closed_probability", c.closed_probability},
                {"vocabulary", c.vocabulary},
                {"body_words", c.body_words},
                {"title_words", c.title_words},
                {"tag_term_bias", c.tag_term_bias},
                {"seed", c.seed}};
}

// Common words first so part-of-speech counts are not all zero.
const char* const kCommonWords[] = {"i",      "you",   "it",    "we",    "they",  "use",    "run",    "get",
                                    "make",   "need",  "want",  "try",   "see",   "work",   "change", "call",
                                    "error",  "code",  "value", "file",  "list",  "string", "server", "function",
                                    "method", "class", "data",  "table", "page",  "user"};

const char* const kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "ta", "vo", "shi", "pe", "da",
                                  "zu", "ri", "po", "ge", "fa", "no", "ki", "sa", "bu", "te"};

// Distinct alphabetic pseudo-word for each index (bijective numbering, at least two syllables).
std::string pseudo_word(std::size_t index, const char* suffix = "") {
    constexpr std::size_t k = std::size(kSyllables);
    std::size_t x = index + k;  // skip single-syllable words
    std::string w;
    do {
        w.insert(0, kSyllables[x % k]);
        x = x / k;
    } while (x > 0);
    return w + suffix;
}

struct AnswerPlan {
    PostId id = 0;
    Timestamp created;
    std::int64_t score = 0;
    std::int64_t comments = 0;
    std::optional<UserId> owner;
    std::string body;
};

struct QuestionPlan {
    Timestamp created;
    std::vector<std::size_t> tags;
    bool down = false;
    double trend = 0.0;
    double lambda = 0.0;
    double score_rate = 0.0;
    double fav_rate = 0.0;
    std::int64_t comments = 0;
    std::optional<UserId> owner;
    std::vector<AnswerPlan> answers;
    int accepted = -1;
    std::optional<Timestamp> closed;
    std::string title;
    std::string body;
};

class Generator {
public:
    explicit Generator(const SynthConfig& c) : c_(c), rng_(c.seed) {}

    SynthCorpus run() {
        SynthCorpus corpus;
        corpus.config = c_;
        t_start_ = add_months(c_.dump_times.front(), -c_.history_months);
        t_end_ = c_.dump_times.back();
        make_tags(corpus);
        make_vocabulary();
        make_questions(corpus);
        make_users();
        make_views(corpus);
        for (std::size_t d = 0; d < c_.dump_times.size(); ++d) corpus.dumps.push_back(snapshot(d));
        return corpus;
    }

private:
    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    std::int64_t poisson(double mean) {
        if (!(mean > 0)) return 0;
        return std::poisson_distribution<std::int64_t>(mean)(rng_);
    }
    std::int64_t neg_binomial(double mean) {
        if (!(mean > 0)) return 0;
        const double rate = std::gamma_distribution<double>(c_.nb_dispersion, mean / c_.nb_dispersion)(rng_);
        return poisson(rate);
    }
    double unit_time(Timestamp t) const {
        return static_cast<double>(t.millis() - t_start_.millis()) /
               static_cast<double>(std::max<std::int64_t>(1, t_end_.millis() - t_start_.millis()));
    }
    Timestamp from_unit(double u) const {
        return Timestamp{t_start_.millis() +
                         static_cast<std::int64_t>(u * static_cast<double>(t_end_.millis() - t_start_.millis()))};
    }

    void make_tags(SynthCorpus& corpus) {
        const std::size_t n = c_.n_tags;
        tag_weight_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Interleave classes so both cover the popular and the rare end.
            const double f = c_.down_tag_fraction;
            const bool down = std::floor(static_cast<double>(i + 1) * f) > std::floor(static_cast<double>(i) * f);
            corpus.tags.push_back({pseudo_word(i * 7 + 3, "x"), down, down ? c_.trend_down : c_.trend_up});
            tag_weight_[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.8);
        }
        tags_ = corpus.tags;
        for (std::size_t i = 0; i < n; ++i) (tags_[i].down ? down_tags_ : up_tags_).push_back(i);
    }

    void make_vocabulary() {
        for (const char* w : kCommonWords) vocab_.push_back(w);
        for (std::size_t i = 0; vocab_.size() < c_.vocabulary; ++i) vocab_.push_back(pseudo_word(i * 3 + 1));
        // Each tag has five signature terms.
        tag_terms_.resize(tags_.size());
        for (std::size_t t = 0; t < tags_.size(); ++t) {
            for (int k = 0; k < 5; ++k) tag_terms_[t].push_back(vocab_[std::size(kCommonWords) + index(vocab_.size() - std::size(kCommonWords))]);
        }
    }

    std::string words(std::size_t n, const std::vector<std::size_t>& tags) {
        std::string out;
        for (std::size_t i = 0; i < n; ++i) {
            if (i) out += ' ';
            if (!tags.empty() && bernoulli(c_.tag_term_bias)) {
                const auto& terms = tag_terms_[tags[index(tags.size())]];
                out += terms[index(terms.size())];
            } else {
                // Roughly Zipfian word choice: square of a uniform favours low indices.
                const double u = uniform();
                out += vocab_[std::min(vocab_.size() - 1, static_cast<std::size_t>(u * u * static_cast<double>(vocab_.size())))];
            }
        }
        return out;
    }

    void make_questions(SynthCorpus& corpus) {
        (void)corpus;
        const std::size_t n = c_.n_questions;
        std::vector<double> cum(tag_weight_.size());
        std::partial_sum(tag_weight_.begin(), tag_weight_.end(), cum.begin());
        const double life_end = unit_time(c_.dump_times.back());
        q_.resize(n);
        for (auto& q : q_) {
            const std::size_t primary = static_cast<std::size_t>(
                std::upper_bound(cum.begin(), cum.end(), uniform(0, cum.back())) - cum.begin());
            const std::size_t p = std::min(primary, tags_.size() - 1);
            q.down = tags_[p].down;
            q.trend = tags_[p].trend;
            q.tags.push_back(p);
            const auto& pool = q.down ? down_tags_ : up_tags_;
            const std::size_t extra = std::min<std::size_t>(pool.size() - 1, index(4));
            while (q.tags.size() < 1 + extra) {
                const std::size_t t = pool[index(pool.size())];
                if (std::find(q.tags.begin(), q.tags.end(), t) == q.tags.end()) q.tags.push_back(t);
            }
            // Creation density proportional to exp(trend * u) on [0, life_end).
            double u;
            if (c_.uniform_views) {
                u = uniform(0, unit_time(c_.dump_times.front()) * 0.99);
            } else {
                const double b = q.trend;
                const double v = uniform();
                u = std::abs(b) < 1e-9 ? v * life_end : std::log1p(v * std::expm1(b * life_end)) / b;
                u = std::clamp(u, 0.0, life_end * (1 - 1e-9));
            }
            q.created = from_unit(u);
        }
        std::stable_sort(q_.begin(), q_.end(),
                         [](const QuestionPlan& a, const QuestionPlan& b) { return a.created < b.created; });

        std::vector<std::size_t> rank(n);
        std::iota(rank.begin(), rank.end(), 1u);
        std::shuffle(rank.begin(), rank.end(), rng_);
        PostId next_answer = n + 1;
        for (std::size_t i = 0; i < n; ++i) {
            auto& q = q_[i];
            q.lambda = c_.view_scale / std::pow(static_cast<double>(rank[i]), c_.zipf_exponent);
            q.score_rate = uniform(-0.002, 0.01);
            q.fav_rate = uniform(0, 0.002);
            q.comments = poisson(1.5);
            if (bernoulli(0.95)) q.owner = 1 + index(c_.n_users);
            const auto n_answers = poisson(c_.mean_answers);
            double latency = 0;
            for (std::int64_t k = 0; k < n_answers; ++k) {
                latency += std::exponential_distribution<double>(1.0 / c_.answer_latency_minutes)(rng_);
                AnswerPlan a;
                a.id = next_answer++;
                a.created = Timestamp{q.created.millis() + static_cast<std::int64_t>(latency * kMillisPerMinute) + 1000};
                a.score = poisson(3.0) - 1;
                a.comments = poisson(1.0);
                if (bernoulli(0.95)) a.owner = 1 + index(c_.n_users);
                a.body = "<p>" + words(12, q.tags) + "</p>";
                q.answers.push_back(std::move(a));
            }
            if (!q.answers.empty() && bernoulli(c_.accept_probability)) {
                q.accepted = static_cast<int>(index(q.answers.size()));
            }
            if (bernoulli(c_.closed_probability)) {
                q.closed = Timestamp{q.created.millis() + static_cast<std::int64_t>(uniform(1, 30) * kMillisPerDay)};
            }
            q.title = words(c_.title_words, q.tags);
            q.body = "<p>" + words(c_.body_words, q.tags) + "</p>";
            if (bernoulli(0.3)) q.body += "<pre><code>" + words(6, {}) + "</code></pre>";
        }
    }

    struct UserPlan {
        Timestamp created;
        std::int64_t rep0, views0, up0, down0;
        double rep_rate, views_rate, up_rate, down_rate;
    };

    void make_users() {
        users_.resize(c_.n_users);
        std::vector<std::size_t> rank(c_.n_users);
        std::iota(rank.begin(), rank.end(), 1u);
        std::shuffle(rank.begin(), rank.end(), rng_);
        for (std::size_t i = 0; i < c_.n_users; ++i) {
            auto& u = users_[i];
            u.created = add_months(t_start_, -uniform(0.5, 24.0));
            const double s = 1.0 / std::pow(static_cast<double>(rank[i]), 0.9);
            u.rep0 = 1 + static_cast<std::int64_t>(20000 * s);
            u.views0 = static_cast<std::int64_t>(2000 * s) + poisson(5);
            u.up0 = poisson(20 * s * 100);
            u.down0 = poisson(2);
            u.rep_rate = uniform(0, 300) * s + uniform(0, 5);
            u.views_rate = uniform(0, 50) * s;
            u.up_rate = uniform(0, 10);
            u.down_rate = uniform(0, 1);
        }
    }

    void make_views(SynthCorpus& corpus) {
        const std::size_t nd = c_.dump_times.size();
        views_.assign(q_.size(), std::vector<std::int64_t>(nd, 0));
        for (std::size_t d = 0; d < nd; ++d) {
            const Timestamp end = c_.dump_times[d];
            const Timestamp begin = d == 0 ? t_start_ : c_.dump_times[d - 1];
            const bool planted = d >= 2 && !c_.uniform_views;
            std::vector<double> drop_bias;
            TripleTruth truth;
            if (d >= 2) {
                truth.t_last = c_.dump_times[d - 2];
                truth.t_current = c_.dump_times[d - 1];
                truth.t_next = end;
            }
            if (planted) drop_bias = low_view_shift(begin);
            for (std::size_t i = 0; i < q_.size(); ++i) {
                const auto& q = q_[i];
                if (q.created > end) continue;
                if (d >= 2 && !(begin < q.created)) {
                    // Present at the prediction dump: next-period views follow the label mechanism.
                    const std::int64_t cur = views_[i][d - 1];
                    std::int64_t fut = cur;
                    bool drop = false;
                    if (planted) {
                        if (bernoulli(c_.signal_strength)) {
                            drop = q.down;
                        } else {
                            drop = bernoulli(std::clamp(c_.null_forgotten_rate + drop_bias[i], 0.0, 1.0));
                        }
                        const double g = drop ? uniform(0.3, 0.8) : uniform(1.05, 1.6);
                        fut = static_cast<std::int64_t>(std::floor(static_cast<double>(cur) * g));
                    } else {
                        fut = c_.uniform_period_views;
                    }
                    views_[i][d] = fut;
                    truth.labels.push_back({static_cast<std::int64_t>(i + 1), drop, cur, fut});
                    continue;
                }
                views_[i][d] = period_views(q, std::max(begin, q.created), end);
            }
            if (d >= 2) corpus.triples.push_back(std::move(truth));
        }
    }

    std::int64_t period_views(const QuestionPlan& q, Timestamp from, Timestamp to) {
        if (c_.uniform_views) return c_.uniform_period_views;
        const double months = std::max(0.0, months_between(from, to));
        const double mid = (unit_time(from) + unit_time(to)) / 2;
        return neg_binomial(q.lambda * months * std::exp(q.trend * (mid - 0.5)));
    }

    // Shift of the drop probability: +bias/2 at the least viewed end of the
    // highly viewed set, -bias/2 at its top. Ranks use the period ending at `t`.
    std::vector<double> low_view_shift(Timestamp t) {
        std::vector<double> shift(q_.size(), c_.low_view_bias / 2);
        if (c_.low_view_bias == 0.0) return shift;
        const std::size_t d = static_cast<std::size_t>(
            std::find(c_.dump_times.begin(), c_.dump_times.end(), t) - c_.dump_times.begin());
        std::vector<std::size_t> present;
        for (std::size_t i = 0; i < q_.size(); ++i) {
            if (!(t < q_[i].created)) present.push_back(i);
        }
        std::stable_sort(present.begin(), present.end(),
                         [&](std::size_t a, std::size_t b) { return views_[a][d] > views_[b][d]; });
        const auto top = static_cast<std::size_t>(
            std::ceil(c_.highly_viewed_fraction * static_cast<double>(present.size()) - 1e-9));
        for (std::size_t r = 0; r < std::min(top, present.size()); ++r) {
            const double pct = 1.0 - static_cast<double>(r) / static_cast<double>(std::max<std::size_t>(1, top));
            shift[present[r]] = c_.low_view_bias * (0.5 - pct);
        }
        return shift;
    }

    DumpSnapshot snapshot(std::size_t d) const {
        DumpSnapshot s;
        const Timestamp t = c_.dump_times[d];
        s.dump_time = t;
        std::vector<std::int64_t> tag_counts(tags_.size(), 0);
        std::vector<AnswerRecord> answers;
        for (std::size_t i = 0; i < q_.size(); ++i) {
            const auto& p = q_[i];
            if (t < p.created) continue;
            QuestionRecord q;
            q.id = i + 1;
            q.creation_date = p.created;
            std::int64_t views = 0;
            for (std::size_t k = 0; k <= d; ++k) views += views_[i][k];
            q.view_count = views;
            q.score = static_cast<std::int64_t>(std::floor(p.score_rate * static_cast<double>(views)));
            q.favorite_count = static_cast<std::int64_t>(std::floor(p.fav_rate * static_cast<double>(views)));
            const double age = months_between(p.created, t);
            q.comment_count = age >= 1.0 ? p.comments
                                         : static_cast<std::int64_t>(std::floor(static_cast<double>(p.comments) * age));
            q.body_html = p.body;
            q.title = p.title;
            for (const auto tag : p.tags) {
                q.tags.push_back(tags_[tag].name);
                ++tag_counts[tag];
            }
            q.owner_user_id = p.owner;
            Timestamp last = p.created;
            for (std::size_t k = 0; k < p.answers.size(); ++k) {
                const auto& a = p.answers[k];
                if (t < a.created) continue;
                ++q.answer_count;
                last = std::max(last, a.created);
                if (static_cast<int>(k) == p.accepted) q.accepted_answer_id = a.id;
                AnswerRecord r;
                r.id = a.id;
                r.parent_question_id = q.id;
                r.creation_date = a.created;
                r.score = a.score;
                r.comment_count = a.comments;
                r.body_html = a.body;
                r.last_activity_date = a.created;
                r.owner_user_id = a.owner;
                answers.push_back(std::move(r));
            }
            if (p.closed && !(t < *p.closed)) {
                q.closed_date = p.closed;
                last = std::max(last, *p.closed);
            }
            q.last_activity_date = last;
            s.questions.push_back(std::move(q));
        }
        std::sort(answers.begin(), answers.end(),
                  [](const AnswerRecord& a, const AnswerRecord& b) { return a.id < b.id; });
        s.answers = std::move(answers);
        for (std::size_t i = 0; i < users_.size(); ++i) {
            const auto& u = users_[i];
            const double m = std::max(0.0, months_between(t_start_, t));
            UserRecord r;
            r.id = i + 1;
            r.creation_date = u.created;
            r.reputation = u.rep0 + static_cast<std::int64_t>(u.rep_rate * m);
            r.profile_views = u.views0 + static_cast<std::int64_t>(u.views_rate * m);
            r.up_votes = u.up0 + static_cast<std::int64_t>(u.up_rate * m);
            r.down_votes = u.down0 + static_cast<std::int64_t>(u.down_rate * m);
            s.users.push_back(r);
        }
        for (std::size_t k = 0; k < tags_.size(); ++k) s.tags.push_back({tags_[k].name, tag_counts[k]});
        return s;
    }

    const SynthConfig& c_;
    std::mt19937_64 rng_;
    Timestamp t_start_;
    Timestamp t_end_;
    std::vector<TagTruth> tags_;
    std::vector<double> tag_weight_;
    std::vector<std::size_t> down_tags_, up_tags_;
    std::vector<std::string> vocab_;
    std::vector<std::vector<std::string>> tag_terms_;
    std::vector<QuestionPlan> q_;
    std::vector<UserPlan> users_;
    std::vector<std::vector<std::int64_t>> views_;  // views_[q][d]: gained in the period ending at dump d
};

void attr(std::ostream& out, const char* name, const std::string& value) {
    out << ' ' << name << "=\"" << xml::escape_attribute(value) << '"';
}
void attr(std::ostream& out, const char* name, std::int64_t value) { out << ' ' << name << "=\"" << value << '"'; }
void attr(std::ostream& out, const char* name, std::uint64_t value) { out << ' ' << name << "=\"" << value << '"'; }
void attr(std::ostream& out, const char* name, Timestamp t) { out << ' ' << name << "=\"" << t.iso() << '"'; }

void write_file(const std::filesystem::path& path, void (*fn)(const DumpSnapshot&, std::ostream&),
                const DumpSnapshot& dump) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.string());
        fn(dump, out);
        if (!out.flush()) throw DataError("write failed for " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string config_to_json(const SynthConfig& config) { return config_json(config).dump(2); }

std::string SynthCorpus::manifest_json() const {
    json tag_list = json::array();
    json down = json::array();
    for (const auto& t : tags) {
        tag_list.push_back({{"name", t.name}, {"trend", t.down ? "down" : "up"}, {"coefficient", t.trend}});
        if (t.down) down.push_back(t.name);
    }
    json triple_list = json::array();
    for (const auto& tr : triples) {
        json labels = json::array();
        for (const auto& l : tr.labels) labels.push_back({l.question_id, l.forgotten ? 1 : 0, l.current_views, l.future_views});
        triple_list.push_back({{"t_last", tr.t_last.iso()},
                               {"t_current", tr.t_current.iso()},
                               {"t_next", tr.t_next.iso()},
                               {"label_columns", {"question_id", "forgotten", "current_views", "future_views"}},
                               {"labels", labels}});
    }
    json dumps = json::array();
    for (const auto& d : this->dumps) {
        dumps.push_back({{"dump_time", d.dump_time.iso()},
                         {"questions", d.questions.size()},
                         {"answers", d.answers.size()},
                         {"users", d.users.size()},
                         {"tags", d.tags.size()}});
    }
    const json planted{
        {"down_trending_tags", down},
        {"mechanism",
         "with probability signal_strength a question's next-period views follow its primary tag trend "
         "(down: 0.3-0.8x current, up: 1.05-1.6x); otherwise it drops with null_forgotten_rate shifted by "
         "low_view_bias"},
        {"informative_features", {"tag text", "TagPrePop", "TagPop", "TagExistTime", "TagActiveTime"}}};
    const json j{{"format", "forgetq-synth-manifest"},
                 {"version", 1},
                 {"config", config_json(config)},
                 {"dumps", dumps},
                 {"tags", tag_list},
                 {"planted", planted},
                 {"triples", triple_list}};
    return j.dump();
}

SynthCorpus generate_corpus(const SynthConfig& config) {
    config.validate();
    Generator g(config);
    return g.run();
}

void write_posts_xml(const DumpSnapshot& dump, std::ostream& out) {
    out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n";
    // Questions and answers interleaved by id, as in real dumps.
    std::size_t qi = 0, ai = 0;
    while (qi < dump.questions.size() || ai < dump.answers.size()) {
        const bool take_q = ai >= dump.answers.size() ||
                            (qi < dump.questions.size() && dump.questions[qi].id < dump.answers[ai].id);
        out << "  <row";
        if (take_q) {
            const auto& q = dump.questions[qi++];
            attr(out, "Id", q.id);
            attr(out, "PostTypeId", std::int64_t{1});
            if (q.accepted_answer_id) attr(out, "AcceptedAnswerId", *q.accepted_answer_id);
            attr(out, "CreationDate", q.creation_date);
            attr(out, "Score", q.score);
            attr(out, "ViewCount", q.view_count);
            attr(out, "Body", q.body_html);
            if (q.owner_user_id) attr(out, "OwnerUserId", *q.owner_user_id);
            attr(out, "LastActivityDate", q.last_activity_date);
            attr(out, "Title", q.title);
            std::string tags;
            for (const auto& t : q.tags) tags += "<" + t + ">";
            attr(out, "Tags", tags);
            attr(out, "AnswerCount", q.answer_count);
            attr(out, "CommentCount", q.comment_count);
            attr(out, "FavoriteCount", q.favorite_count);
            if (q.closed_date) attr(out, "ClosedDate", *q.closed_date);
        } else {
            const auto& a = dump.answers[ai++];
            attr(out, "Id", a.id);
            attr(out, "PostTypeId", std::int64_t{2});
            attr(out, "ParentId", a.parent_question_id);
            attr(out, "CreationDate", a.creation_date);
            attr(out, "Score", a.score);
            attr(out, "Body", a.body_html);
            if (a.owner_user_id) attr(out, "OwnerUserId", *a.owner_user_id);
            attr(out, "LastActivityDate", a.last_activity_date);
            attr(out, "CommentCount", a.comment_count);
        }
        out << " />\n";
    }
    out << "</posts>\n";
}

void write_users_xml(const DumpSnapshot& dump, std::ostream& out) {
    out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<users>\n";
    for (const auto& u : dump.users) {
        out << "  <row";
        attr(out, "Id", u.id);
        attr(out, "Reputation", u.reputation);
        attr(out, "CreationDate", u.creation_date);
        attr(out, "Views", u.profile_views);
        attr(out, "UpVotes", u.up_votes);
        attr(out, "DownVotes", u.down_votes);
        out << " />\n";
    }
    out << "</users>\n";
}

void write_tags_xml(const DumpSnapshot& dump, std::ostream& out) {
    out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<tags>\n";
    for (std::size_t i = 0; i < dump.tags.size(); ++i) {
        out << "  <row";
        attr(out, "Id", static_cast<std::uint64_t>(i + 1));
        attr(out, "TagName", dump.tags[i].name);
        attr(out, "Count", dump.tags[i].question_count);
        out << " />\n";
    }
    out << "</tags>\n";
}

std::filesystem::path dump_directory(const std::filesystem::path& out_dir, Timestamp dump_time) {
    return out_dir / dump_time.compact();
}

SynthCorpus generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
    SynthCorpus corpus = generate_corpus(config);
    for (const auto& d : corpus.dumps) {
        const auto dir = dump_directory(out_dir, d.dump_time);
        std::filesystem::create_directories(dir);
        write_file(dir / "Posts.xml", write_posts_xml, d);
        write_file(dir / "Users.xml", write_users_xml, d);
        write_file(dir / "Tags.xml", write_tags_xml, d);
    }
    std::ofstream out(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << corpus.manifest_json() << '\n';
    if (!out.flush()) throw DataError("cannot write synth manifest");
    return corpus;
}

std::uint64_t write_bulk_posts(const std::filesystem::path& path, std::uint64_t rows, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    std::mt19937_64 rng(seed);
    const Timestamp base = Timestamp::from_civil(2015, 1, 1);
    out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n";
    PostId last_question = 1;
    for (std::uint64_t i = 1; i <= rows; ++i) {
        const bool question = i == 1 || rng() % 3 != 0;
        const Timestamp created{base.millis() + static_cast<std::int64_t>(i) * 60'000};
        out << "  <row";
        attr(out, "Id", i);
        attr(out, "PostTypeId", std::int64_t{question ? 1 : 2});
        if (!question) attr(out, "ParentId", last_question);
        attr(out, "CreationDate", created);
        attr(out, "Score", static_cast<std::int64_t>(rng() % 50));
        if (question) attr(out, "ViewCount", static_cast<std::int64_t>(rng() % 100000));
        attr(out, "Body", "<p>row " + std::to_string(i) + " uses &amp; entities <code>x < y</code></p>");
        attr(out, "LastActivityDate", created);
        if (question) {
            attr(out, "Title", "Question " + std::to_string(i));
            attr(out, "Tags", "<t" + std::to_string(rng() % 100) + "><bulk>");
            attr(out, "AnswerCount", std::int64_t{0});
            last_question = i;
        }
        attr(out, "CommentCount", std::int64_t{0});
        out << " />\n";
    }
    out << "</posts>\n";
    out.flush();
    if (!out) throw DataError("write failed for " + path.string());
    return static_cast<std::uint64_t>(out.tellp());
}

}  // namespace forgetq::synth
