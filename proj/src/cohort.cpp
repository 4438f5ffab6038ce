#include "forgetq/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "forgetq/errors.hpp"
#include "forgetq/log.hpp"
#include "json.hpp"

namespace forgetq {

using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DataError("bad number in dataset file: " + std::string(s));
    }
    return v;
}

std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DataError("bad integer in dataset file: " + std::string(s));
    }
    return v;
}

void require_dump(const SnapshotStore& store, Timestamp t) {
    if (!store.has(t)) throw DataError("no snapshot for dump time " + t.iso());
}

void check_gap(Timestamp a, Timestamp b, const CohortConfig& config) {
    const double want = config.gap_months * kDaysPerMonth;
    const double got = days_between(a, b);
    if (std::abs(got - want) > config.gap_tolerance_days) {
        throw ConfigError("period " + a.iso() + " .. " + b.iso() + " spans " + format_double(got) +
                          " days, expected about " + format_double(want) + " for a " +
                          std::to_string(config.gap_months) + "-month gap");
    }
}

json config_json(const CohortConfig& c) {
    return json{{"gap_months", c.gap_months},
                {"highly_viewed_fraction", c.highly_viewed_fraction},
                {"forgotten_growth_threshold", c.forgotten_growth_threshold},
                {"top_n_grid", c.top_n_grid},
                {"stale_view_ceiling", c.stale_view_ceiling},
                {"gap_tolerance_days", c.gap_tolerance_days}};
}

CohortConfig config_from_json(const json& j) {
    CohortConfig c;
    c.gap_months = j.at("gap_months").get<int>();
    c.highly_viewed_fraction = j.at("highly_viewed_fraction").get<double>();
    c.forgotten_growth_threshold = j.at("forgotten_growth_threshold").get<double>();
    c.top_n_grid = j.at("top_n_grid").get<std::vector<double>>();
    c.stale_view_ceiling = j.at("stale_view_ceiling").get<std::int64_t>();
    c.gap_tolerance_days = j.at("gap_tolerance_days").get<double>();
    return c;
}

Timestamp parse_time(const std::string& s) {
    const auto t = Timestamp::parse(s);
    if (!t) throw DataError("bad timestamp " + s);
    return *t;
}

}  // namespace

void CohortConfig::validate() const {
    if (gap_months <= 0) throw ConfigError("gap_months must be positive");
    if (!(highly_viewed_fraction > 0.0 && highly_viewed_fraction <= 1.0)) {
        throw ConfigError("highly_viewed_fraction must be in (0, 1]");
    }
    if (!(forgotten_growth_threshold < 0.0)) throw ConfigError("forgotten_growth_threshold must be negative");
    for (const double g : top_n_grid) {
        if (!(g > 0.0 && g <= 1.0)) throw ConfigError("top_n_grid entries must be in (0, 1]");
    }
    if (stale_view_ceiling < 0) throw ConfigError("stale_view_ceiling must be non-negative");
    if (!(gap_tolerance_days >= 0.0)) throw ConfigError("gap_tolerance_days must be non-negative");
}

std::size_t top_count(double fraction, std::size_t n) {
    const double x = fraction * static_cast<double>(n);
    const double r = std::round(x);
    const double c = std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : std::ceil(x);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, c)));
}

std::vector<std::size_t> select_top(std::span<const std::int64_t> values, double fraction) {
    const std::size_t k = top_count(fraction, values.size());
    if (k == 0) return {};
    std::vector<std::int64_t> sorted(values.begin(), values.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                     std::greater<>());
    const std::int64_t cutoff = sorted[k - 1];
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] >= cutoff) out.push_back(i);
    }
    return out;
}

double views_growth(std::int64_t current_views, std::int64_t future_views) {
    return static_cast<double>(future_views - current_views) / static_cast<double>(current_views);
}

CohortCounts CohortDataset::counts() const {
    CohortCounts c;
    c.total = questions.size();
    for (const auto& q : questions) (q.being_forgotten ? c.being_forgotten : c.unforgotten)++;
    return c;
}

CohortDataset build_dataset(const SnapshotStore& store, Timestamp t_last, Timestamp t_current,
                            Timestamp t_next, const CohortConfig& config) {
    config.validate();
    for (const Timestamp t : {t_last, t_current, t_next}) require_dump(store, t);
    if (!(t_last < t_current && t_current < t_next)) {
        throw ConfigError("triple must be strictly increasing: " + t_last.iso() + ", " + t_current.iso() +
                          ", " + t_next.iso());
    }
    check_gap(t_last, t_current, config);
    check_gap(t_current, t_next, config);

    CohortDataset ds;
    ds.t_last = t_last;
    ds.t_current = t_current;
    ds.t_next = t_next;
    ds.config = config;

    const ViewDeltas current = store.views_between(t_last, t_current);
    if (current.negative_clamped > 0) {
        log::warn("cohort", "negative view deltas clamped in current period",
                  {{"count", static_cast<std::int64_t>(current.negative_clamped)}});
    }
    ds.population = current.size();
    const auto chosen = select_top(current.views, config.highly_viewed_fraction);
    ds.selected = chosen.size();
    std::vector<std::int64_t> ids;
    ids.reserve(chosen.size());
    for (const std::size_t i : chosen) {
        if (current.views[i] <= 0) {
            throw DataError("selected question " + std::to_string(current.ids[i]) +
                            " has no views in the current period; the corpus has too few viewed questions");
        }
        ids.push_back(current.ids[i]);
    }
    const ViewDeltas future = store.views_between(ids, t_current, t_next);
    if (future.negative_clamped > 0) {
        log::warn("cohort", "negative view deltas clamped in future period",
                  {{"count", static_cast<std::int64_t>(future.negative_clamped)}});
    }
    ds.absent_at_next = future.absent_at_end;
    ds.questions.reserve(future.size());
    std::size_t f = 0;
    for (const std::size_t i : chosen) {
        const std::int64_t id = current.ids[i];
        if (f >= future.ids.size() || future.ids[f] != id) continue;  // absent at t_next
        LabeledQuestion q;
        q.question_id = id;
        q.current_views = current.views[i];
        q.future_views = future.views[f++];
        q.views_growth = views_growth(q.current_views, q.future_views);
        q.being_forgotten = q.views_growth < config.forgotten_growth_threshold;
        ds.questions.push_back(q);
    }
    const auto c = ds.counts();
    log::info("cohort", "dataset built",
              {{"population", static_cast<std::int64_t>(ds.population)},
               {"selected", static_cast<std::int64_t>(ds.selected)},
               {"absent_at_next", static_cast<std::int64_t>(ds.absent_at_next)},
               {"being_forgotten", static_cast<std::int64_t>(c.being_forgotten)},
               {"unforgotten", static_cast<std::int64_t>(c.unforgotten)}});
    return ds;
}

void write_dataset_csv(const CohortDataset& dataset, std::ostream& out) {
    out << "question_id,current_views,future_views,views_growth,label,prediction_time\n";
    const std::string when = dataset.t_current.iso();
    for (const auto& q : dataset.questions) {
        out << q.question_id << ',' << q.current_views << ',' << q.future_views << ','
            << format_double(q.views_growth) << ',' << (q.being_forgotten ? "being_forgotten" : "unforgotten")
            << ',' << when << '\n';
    }
}

std::string dataset_sidecar_json(const CohortDataset& dataset) {
    const auto c = dataset.counts();
    json j{{"format", "forgetq-cohort-dataset"},
           {"version", 1},
           {"t_last", dataset.t_last.iso()},
           {"t_current", dataset.t_current.iso()},
           {"t_next", dataset.t_next.iso()},
           {"config", config_json(dataset.config)},
           {"population", dataset.population},
           {"selected", dataset.selected},
           {"absent_at_next", dataset.absent_at_next},
           {"counts", {{"total", c.total}, {"being_forgotten", c.being_forgotten}, {"unforgotten", c.unforgotten}}}};
    return j.dump(2) + "\n";
}

void save_dataset(const CohortDataset& dataset, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.string());
        write_dataset_csv(dataset, out);
        if (!out) throw DataError("write failed for " + path.string());
    }
    std::ofstream side(path.string() + ".json", std::ios::binary | std::ios::trunc);
    side << dataset_sidecar_json(dataset);
    if (!side) throw DataError("write failed for " + path.string() + ".json");
}

CohortDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".json");
    if (!side) throw DataError("missing dataset sidecar " + path.string() + ".json");
    json j;
    try {
        j = json::parse(side);
    } catch (const json::exception& e) {
        throw DataError("bad dataset sidecar " + path.string() + ".json: " + e.what());
    }
    CohortDataset ds;
    try {
        if (j.at("format") != "forgetq-cohort-dataset") throw DataError("not a dataset sidecar");
        ds.t_last = parse_time(j.at("t_last").get<std::string>());
        ds.t_current = parse_time(j.at("t_current").get<std::string>());
        ds.t_next = parse_time(j.at("t_next").get<std::string>());
        ds.config = config_from_json(j.at("config"));
        ds.population = j.at("population").get<std::size_t>();
        ds.selected = j.at("selected").get<std::size_t>();
        ds.absent_at_next = j.at("absent_at_next").get<std::size_t>();
    } catch (const json::exception& e) {
        throw DataError("bad dataset sidecar " + path.string() + ".json: " + e.what());
    }

    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    while (std::getline(in, line) && line.rfind('#', 0) == 0) {
    }
    if (line.rfind("question_id,", 0) != 0) throw DataError("bad dataset header in " + path.string());
    std::vector<std::string_view> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        cells.clear();
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            cells.emplace_back(std::string_view(line).substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 6) throw DataError("bad dataset row in " + path.string() + ": " + line);
        LabeledQuestion q;
        q.question_id = parse_int(cells[0]);
        q.current_views = parse_int(cells[1]);
        q.future_views = parse_int(cells[2]);
        q.views_growth = parse_double(cells[3]);
        if (cells[4] == "being_forgotten") {
            q.being_forgotten = true;
        } else if (cells[4] != "unforgotten") {
            throw DataError("bad label in " + path.string() + ": " + std::string(cells[4]));
        }
        ds.questions.push_back(q);
    }
    const auto c = ds.counts();
    if (c.total != j["counts"].value("total", c.total) ||
        c.being_forgotten != j["counts"].value("being_forgotten", c.being_forgotten)) {
        throw DataError("dataset rows disagree with sidecar counts in " + path.string());
    }
    return ds;
}

ForgottenSignalTable forgotten_signal(const SnapshotStore& store, std::span<const Timestamp> dump_times,
                                      Timestamp window_start, Timestamp window_end, const CohortConfig& config) {
    config.validate();
    require_dump(store, window_start);
    require_dump(store, window_end);
    const ViewDeltas window = store.views_between(window_start, window_end);
    ForgottenSignalTable table;
    table.dump_times.assign(dump_times.begin(), dump_times.end());
    table.top_n_grid = config.top_n_grid;
    for (const Timestamp t : dump_times) {
        require_dump(store, t);
        const auto [ids, views] = store.load_views(t);
        auto& row = table.fraction.emplace_back();
        auto& excl = table.excluded.emplace_back();
        for (const double g : config.top_n_grid) {
            std::size_t stale = 0, known = 0, missing = 0;
            for (const std::size_t i : select_top(views, g)) {
                const auto gained = window.find(ids[i]);
                if (!gained) {
                    ++missing;
                    continue;
                }
                ++known;
                if (*gained < config.stale_view_ceiling) ++stale;
            }
            row.push_back(known == 0 ? 0.0 : static_cast<double>(stale) / static_cast<double>(known));
            excl.push_back(missing);
        }
    }
    return table;
}

std::vector<ConcentrationRow> view_concentration(std::span<const std::int64_t> period_views,
                                                 std::span<const double> top_grid) {
    std::vector<std::int64_t> sorted(period_views.begin(), period_views.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::vector<std::int64_t> prefix(sorted.size() + 1, 0);
    for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];
    const std::int64_t total = prefix.back();
    if (total == 0) log::warn("cohort", "no views in period; concentration shares set to 0");
    std::vector<ConcentrationRow> rows;
    for (const double k : top_grid) {
        ConcentrationRow r;
        r.top_fraction = k;
        r.top_count = top_count(k, sorted.size());
        r.share = total == 0 ? 0.0 : static_cast<double>(prefix[r.top_count]) / static_cast<double>(total);
        rows.push_back(r);
    }
    return rows;
}

std::vector<ConcentrationRow> view_concentration(const SnapshotStore& store, Timestamp t1, Timestamp t2,
                                                 std::span<const double> top_grid) {
    require_dump(store, t1);
    require_dump(store, t2);
    return view_concentration(store.views_between(t1, t2).views, top_grid);
}

PeriodTops period_tops(const SnapshotStore& store, Period period, double fraction) {
    require_dump(store, period.start);
    require_dump(store, period.end);
    const ViewDeltas d = store.views_between(period.start, period.end);
    if (d.size() == 0) throw DataError("empty period " + period.start.iso() + " .. " + period.end.iso());
    PeriodTops tops;
    for (const std::size_t i : select_top(d.views, fraction)) tops.question_ids.push_back(d.ids[i]);

    const QuestionTable q = store.load_questions(period.end);
    std::map<std::string, std::int64_t, std::less<>> popularity;
    for (std::size_t r = 0; r < q.size(); ++r) {
        const std::int64_t created = q.creation_date[r];
        if (created <= period.start.millis() || created > period.end.millis()) continue;
        for (const auto tag : q.tags_of(r)) ++popularity[std::string(tag)];
    }
    std::vector<std::string> names;
    std::vector<std::int64_t> counts;
    for (const auto& [name, n] : popularity) {
        names.push_back(name);
        counts.push_back(n);
    }
    for (const std::size_t i : select_top(counts, fraction)) tops.tags.push_back(names[i]);
    return tops;
}

std::vector<OverlapRow> persistence_overlap(const SnapshotStore& store,
                                            std::span<const std::pair<Period, Period>> period_pairs,
                                            const CohortConfig& config) {
    config.validate();
    std::vector<OverlapRow> rows;
    for (const auto& [first, second] : period_pairs) {
        const PeriodTops a = period_tops(store, first, config.highly_viewed_fraction);
        const PeriodTops b = period_tops(store, second, config.highly_viewed_fraction);
        OverlapRow r;
        r.first = first;
        r.second = second;
        std::vector<std::int64_t> common_q;
        std::set_intersection(a.question_ids.begin(), a.question_ids.end(), b.question_ids.begin(),
                              b.question_ids.end(), std::back_inserter(common_q));
        std::vector<std::string> common_t;
        std::set_intersection(a.tags.begin(), a.tags.end(), b.tags.begin(), b.tags.end(),
                              std::back_inserter(common_t));
        r.top_questions = a.question_ids.size();
        r.persisting_questions = common_q.size();
        r.question_overlap = r.top_questions == 0 ? 0.0
                                                  : static_cast<double>(r.persisting_questions) /
                                                        static_cast<double>(r.top_questions);
        r.top_tags = a.tags.size();
        r.persisting_tags = common_t.size();
        r.tag_overlap = r.top_tags == 0 ? 0.0
                                        : static_cast<double>(r.persisting_tags) / static_cast<double>(r.top_tags);
        rows.push_back(r);
    }
    return rows;
}

std::size_t Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), below + above);
}

std::vector<double> default_growth_edges() {
    std::vector<double> edges;
    for (int i = -10; i <= 30; ++i) edges.push_back(i / 10.0);
    return edges;
}

Histogram views_growth_histogram(const CohortDataset& dataset, std::span<const double> edges) {
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
        std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw ConfigError("histogram edges must be strictly increasing with at least two entries");
    }
    Histogram h;
    h.edges.assign(edges.begin(), edges.end());
    h.counts.assign(edges.size() - 1, 0);
    for (const auto& q : dataset.questions) {
        const double v = q.views_growth;
        if (v < edges.front()) {
            ++h.below;
        } else if (v >= edges.back()) {
            ++h.above;
        } else {
            const auto it = std::upper_bound(edges.begin(), edges.end(), v);
            ++h.counts[static_cast<std::size_t>(it - edges.begin()) - 1];
        }
    }
    return h;
}

Summary summarize(std::vector<double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double p) {
        const double h = (static_cast<double>(values.size()) - 1.0) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return s;
}

ClosedComparison closed_comparison(const SnapshotStore& store, const CohortDataset& dataset, Timestamp t_current) {
    require_dump(store, t_current);
    const QuestionTable q = store.load_questions(t_current);
    const auto is_closed = [&](std::size_t r) {
        return q.closed_date[r] != columns::kNoTime && q.closed_date[r] <= t_current.millis();
    };
    const auto indicators = [&](std::size_t r) {
        return std::array<double, 4>{static_cast<double>(q.answer_count[r]), static_cast<double>(q.comment_count[r]),
                                     static_cast<double>(q.score[r]), static_cast<double>(q.view_count[r])};
    };
    std::array<std::vector<double>, 4> closed_vals, dataset_vals;
    ClosedComparison out;
    for (std::size_t r = 0; r < q.size(); ++r) {
        if (!is_closed(r)) continue;
        ++out.store_closed;
        const auto v = indicators(r);
        for (int k = 0; k < 4; ++k) closed_vals[k].push_back(v[k]);
    }
    for (const auto& lq : dataset.questions) {
        const auto r = q.find(lq.question_id);
        if (!r) throw DataError("dataset question " + std::to_string(lq.question_id) + " missing at " + t_current.iso());
        ++out.dataset_questions;
        if (is_closed(*r)) ++out.dataset_closed;
        const auto v = indicators(*r);
        for (int k = 0; k < 4; ++k) dataset_vals[k].push_back(v[k]);
    }
    out.closed_fraction = out.dataset_questions == 0 ? 0.0
                                                     : static_cast<double>(out.dataset_closed) /
                                                           static_cast<double>(out.dataset_questions);
    for (int k = 0; k < 4; ++k) {
        out.closed[k] = summarize(std::move(closed_vals[k]));
        out.dataset[k] = summarize(std::move(dataset_vals[k]));
    }
    return out;
}

}  // namespace forgetq
