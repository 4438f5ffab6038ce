#include "forgetq/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <numeric>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "forgetq/errors.hpp"
#include "forgetq/log.hpp"
#include "json.hpp"

namespace forgetq::evaluate {

using nlohmann::json;

const std::vector<FeatureSet>& standard_feature_sets() {
    using TF = TextField;
    static const std::vector<FeatureSet> sets = [] {
        auto sel = [](bool q, bool u, bool a, bool t, std::vector<TF> text) {
            FeatureSelection s;
            s.question = q;
            s.user = u;
            s.answer = a;
            s.tag = t;
            s.text = std::move(text);
            return s;
        };
        return std::vector<FeatureSet>{
            {"tfidf-body", sel(false, false, false, false, {TF::kBody})},
            {"tfidf-title", sel(false, false, false, false, {TF::kTitle})},
            {"tfidf-tag", sel(false, false, false, false, {TF::kTags})},
            {"tfidf-(body+title)", sel(false, false, false, false, {TF::kBody, TF::kTitle})},
            {"Text", sel(false, false, false, false, {TF::kBody, TF::kTitle, TF::kTags})},
            {"Question", sel(true, false, false, false, {})},
            {"User", sel(false, true, false, false, {})},
            {"Answer", sel(false, false, true, false, {})},
            {"Tag", sel(false, false, false, true, {})},
            {"Question+User", sel(true, true, false, false, {})},
            {"Question+User+Answer", sel(true, true, true, false, {})},
            {"Question+User+Answer+Tag", sel(true, true, true, true, {})},
            {"All", FeatureSelection::all()},
        };
    }();
    return sets;
}

const FeatureSet& feature_set(std::string_view name) {
    for (const auto& s : standard_feature_sets()) {
        if (s.name == name) return s;
    }
    throw ConfigError("unknown feature set '" + std::string(name) + "'");
}

void ExperimentPlan::validate() const {
    if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
    if (max_redraws < 0) throw ConfigError("max_redraws must be >= 0");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    for (const auto& name : feature_sets) (void)feature_set(name);
    (void)feature_set(bin_feature_set);
    std::set<std::string> names;
    for (const auto& d : datasets) {
        if (d.name.empty()) throw ConfigError("dataset without a name");
        if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name '" + d.name + "'");
        if (d.gap_months < 1) throw ConfigError("dataset '" + d.name + "': gap_months must be >= 1");
        if (!(d.t_last < d.t_current && d.t_current < d.t_next)) {
            throw ConfigError("dataset '" + d.name + "': dump times must be increasing");
        }
    }
    cohort.validate();
    boost.validate();
}

std::vector<std::string> ExperimentPlan::resolved_feature_sets() const {
    if (!feature_sets.empty()) return feature_sets;
    std::vector<std::string> all;
    for (const auto& s : standard_feature_sets()) all.push_back(s.name);
    return all;
}

// --- plan JSON -------------------------------------------------------------

namespace {

Timestamp parse_ts(const json& j) {
    const auto t = Timestamp::parse(j.get<std::string>());
    if (!t) throw ConfigError("bad timestamp '" + j.get<std::string>() + "' in plan");
    return *t;
}

template <typename Fn>
void for_keys(const json& obj, std::string_view where, Fn&& fn) {
    if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!fn(key, value)) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
}

}  // namespace

ExperimentPlan plan_from_json(std::string_view text, const std::filesystem::path& base_dir) {
    ExperimentPlan p;
    try {
        const json j = json::parse(text);
        for_keys(j, "plan", [&](const std::string& k, const json& v) {
            if (k == "datasets") {
                for (const auto& d : v) {
                    DatasetSpec s;
                    bool have_triple = false;
                    for_keys(d, "dataset", [&](const std::string& dk, const json& dv) {
                        if (dk == "name") s.name = dv.get<std::string>();
                        else if (dk == "store") {
                            s.store = dv.get<std::string>();
                            if (s.store.is_relative() && !base_dir.empty()) s.store = base_dir / s.store;
                        } else if (dk == "triple") {
                            if (dv.size() != 3) throw ConfigError("triple needs three dump times");
                            s.t_last = parse_ts(dv[0]);
                            s.t_current = parse_ts(dv[1]);
                            s.t_next = parse_ts(dv[2]);
                            have_triple = true;
                        } else if (dk == "gap_months") s.gap_months = dv.get<int>();
                        else return false;
                        return true;
                    });
                    if (!have_triple || s.store.empty()) throw ConfigError("dataset needs store and triple");
                    p.datasets.push_back(std::move(s));
                }
            } else if (k == "feature_sets") p.feature_sets = v.get<std::vector<std::string>>();
            else if (k == "n_runs") p.n_runs = v.get<int>();
            else if (k == "train_fraction") p.train_fraction = v.get<double>();
            else if (k == "seed") p.seed = v.get<std::uint64_t>();
            else if (k == "n_bins") p.n_bins = v.get<int>();
            else if (k == "run_bins") p.run_bins = v.get<bool>();
            else if (k == "bin_global_model") p.bin_global_model = v.get<bool>();
            else if (k == "bin_feature_set") p.bin_feature_set = v.get<std::string>();
            else if (k == "top_k") p.top_k = v.get<std::size_t>();
            else if (k == "max_redraws") p.max_redraws = v.get<int>();
            else if (k == "shuffle_labels") p.shuffle_labels = v.get<bool>();
            else if (k == "jobs") p.jobs = v.get<unsigned>();
            else if (k == "cohort") {
                for_keys(v, "cohort", [&](const std::string& ck, const json& cv) {
                    if (ck == "highly_viewed_fraction") p.cohort.highly_viewed_fraction = cv.get<double>();
                    else if (ck == "forgotten_growth_threshold") p.cohort.forgotten_growth_threshold = cv.get<double>();
                    else if (ck == "gap_tolerance_days") p.cohort.gap_tolerance_days = cv.get<double>();
                    else return false;
                    return true;
                });
            } else if (k == "text_caps") {
                for_keys(v, "text_caps", [&](const std::string& tk, const json& tv) {
                    if (tk == "body") p.text_caps.body = tv.get<std::size_t>();
                    else if (tk == "title") p.text_caps.title = tv.get<std::size_t>();
                    else if (tk == "tags") p.text_caps.tags = tv.get<std::size_t>();
                    else return false;
                    return true;
                });
            } else if (k == "boost") {
                for_keys(v, "boost", [&](const std::string& bk, const json& bv) {
                    auto& b = p.boost;
                    if (bk == "n_rounds") b.n_rounds = bv.get<int>();
                    else if (bk == "learning_rate") b.learning_rate = bv.get<double>();
                    else if (bk == "max_depth") b.max_depth = bv.get<int>();
                    else if (bk == "min_samples_leaf") b.min_samples_leaf = bv.get<int>();
                    else if (bk == "histogram_bins") b.histogram_bins = bv.get<int>();
                    else if (bk == "l2_leaf_regularization") b.l2_leaf_regularization = bv.get<double>();
                    else if (bk == "subsample") b.subsample = bv.get<double>();
                    else if (bk == "seed") b.seed = bv.get<std::uint64_t>();
                    else return false;
                    return true;
                });
            } else {
                return false;
            }
            return true;
        });
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad plan: ") + e.what());
    }
    return p;
}

std::string plan_to_json(const ExperimentPlan& p) {
    json datasets = json::array();
    for (const auto& d : p.datasets) {
        datasets.push_back({{"name", d.name},
                            {"store", d.store.generic_string()},
                            {"triple", {d.t_last.iso(), d.t_current.iso(), d.t_next.iso()}},
                            {"gap_months", d.gap_months}});
    }
    const auto& b = p.boost;
    json j{{"datasets", datasets},
           {"feature_sets", p.resolved_feature_sets()},
           {"n_runs", p.n_runs},
           {"train_fraction", p.train_fraction},
           {"seed", p.seed},
           {"n_bins", p.n_bins},
           {"run_bins", p.run_bins},
           {"bin_global_model", p.bin_global_model},
           {"bin_feature_set", p.bin_feature_set},
           {"top_k", p.top_k},
           {"max_redraws", p.max_redraws},
           {"shuffle_labels", p.shuffle_labels},
           {"cohort",
            {{"highly_viewed_fraction", p.cohort.highly_viewed_fraction},
             {"forgotten_growth_threshold", p.cohort.forgotten_growth_threshold},
             {"gap_tolerance_days", p.cohort.gap_tolerance_days}}},
           {"text_caps", {{"body", p.text_caps.body}, {"title", p.text_caps.title}, {"tags", p.text_caps.tags}}},
           {"boost",
            {{"n_rounds", b.n_rounds},
             {"learning_rate", b.learning_rate},
             {"max_depth", b.max_depth},
             {"min_samples_leaf", b.min_samples_leaf},
             {"histogram_bins", b.histogram_bins},
             {"l2_leaf_regularization", b.l2_leaf_regularization},
             {"subsample", b.subsample},
             {"seed", b.seed}}}};
    return j.dump(2);
}

// --- metrics and splits ----------------------------------------------------

double Confusion::f1() const {
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double Confusion::accuracy() const {
    if (total() == 0) return 0.0;
    return static_cast<double>(tp + tn) / static_cast<double>(total());
}

Confusion confusion(std::span<const double> probabilities, std::span<const int> labels) {
    if (probabilities.size() != labels.size()) throw DataError("prediction and label counts differ");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = probabilities[i] >= 0.5;
        const bool truth = labels[i] != 0;
        if (pred && truth) ++c.tp;
        else if (pred) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

bool has_both(std::span<const int> labels, std::span<const std::size_t> rows) {
    bool pos = false, neg = false;
    for (const auto r : rows) (labels[r] ? pos : neg) = true;
    return pos && neg;
}

}  // namespace

std::uint64_t split_seed(std::uint64_t plan_seed, std::string_view dataset, int run, int bin) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (const char c : dataset) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t s = splitmix(plan_seed);
    s = splitmix(s ^ h);
    s = splitmix(s ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(run)));
    return splitmix(s ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(bin)));
}

Split draw_split(std::span<const int> labels, double train_fraction, std::uint64_t seed, int max_redraws) {
    const std::size_t n = labels.size();
    if (n < 4) throw DataError("too few rows to split (" + std::to_string(n) + ")");
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 2, n - 2);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(n);
    for (int attempt = 0; attempt <= max_redraws; ++attempt) {
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        Split s;
        s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.test.begin(), s.test.end());
        s.redraws = attempt;
        if (has_both(labels, s.train) && has_both(labels, s.test)) return s;
    }
    throw DataError("could not draw a split with both classes on each side after " + std::to_string(max_redraws) +
                    " redraws");
}

// --- datasets and runs -----------------------------------------------------

PreparedDataset prepare_dataset(const SnapshotStore& store, const DatasetSpec& spec, const ExperimentPlan& plan) {
    PreparedDataset p;
    p.spec = spec;
    CohortConfig cfg = plan.cohort;
    cfg.gap_months = spec.gap_months;
    p.dataset = build_dataset(store, spec.t_last, spec.t_current, spec.t_next, cfg);
    p.cache = FeatureCache::build(store, p.dataset, plan.jobs);
    p.labels.reserve(p.dataset.questions.size());
    for (const auto& q : p.dataset.questions) p.labels.push_back(q.being_forgotten ? 1 : 0);
    if (plan.shuffle_labels) {
        std::mt19937_64 rng(split_seed(plan.seed, spec.name, -1, -1));
        std::shuffle(p.labels.begin(), p.labels.end(), rng);
    }
    const auto c = p.dataset.counts();
    log::info("evaluate", "dataset ready: " + spec.name,
              {{"total", static_cast<std::int64_t>(c.total)},
               {"being_forgotten", static_cast<std::int64_t>(c.being_forgotten)}});
    return p;
}

namespace {

RunResult train_and_score_impl(const PreparedDataset& data, const FeatureSet& set, const ExperimentPlan& plan,
                               std::span<const std::size_t> train, std::span<const std::size_t> test,
                               std::vector<double>* test_probabilities) {
    {
        std::vector<char> seen(data.labels.size(), 0);
        for (const auto r : train) seen.at(r) = 1;
        for (const auto r : test) {
            if (seen.at(r)) throw std::logic_error("train and test rows overlap");
        }
    }
    TextModel text;
    const TextModel* text_ptr = nullptr;
    if (!set.selection.text.empty()) {
        std::vector<const TextDocument*> docs;
        docs.reserve(train.size());
        for (const auto r : train) docs.push_back(&data.cache.documents.at(r));
        text = fit_text_model(docs, set.selection.text, plan.text_caps);
        text_ptr = &text;
    }
    const FeatureMatrix full = build_feature_matrix(data.cache, set.selection, text_ptr);
    const FeatureMatrix m_train = full.select_rows(train);
    const FeatureMatrix m_test = full.select_rows(test);
    std::vector<int> y_train, y_test;
    for (const auto r : train) y_train.push_back(data.labels[r]);
    for (const auto r : test) y_test.push_back(data.labels[r]);

    gbt::BoostConfig boost = plan.boost;
    boost.jobs = 1;
    const auto model = gbt::fit(m_train, y_train, boost);
    const auto prob = gbt::predict_proba(model, m_test);
    RunResult out;
    out.train_rows = train.size();
    out.test_rows = test.size();
    out.confusion = confusion(prob, y_test);
    out.importance = gbt::feature_importance(model);
    if (test_probabilities) *test_probabilities = prob;
    return out;
}

std::vector<int> labels_of(const PreparedDataset& data, std::span<const std::size_t> rows) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (const auto r : rows) y.push_back(data.labels[r]);
    return y;
}

std::vector<std::size_t> map_rows(std::span<const std::size_t> local, std::span<const std::size_t> global) {
    std::vector<std::size_t> out;
    out.reserve(local.size());
    for (const auto i : local) out.push_back(global[i]);
    return out;
}

template <typename Fn>
void run_pool(std::size_t n_jobs, unsigned workers, Fn&& fn) {
    if (workers <= 1 || n_jobs <= 1) {
        for (std::size_t i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n_jobs); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n_jobs; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n_jobs;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunResult train_and_score(const PreparedDataset& data, const FeatureSet& set, const ExperimentPlan& plan,
                          std::span<const std::size_t> rows_train, std::span<const std::size_t> rows_test) {
    return train_and_score_impl(data, set, plan, rows_train, rows_test, nullptr);
}

std::vector<std::vector<std::size_t>> view_bins(const CohortDataset& dataset, int n_bins) {
    if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
    const std::size_t n = dataset.questions.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.questions[a].current_views < dataset.questions[b].current_views;
    });
    const auto nb = static_cast<std::size_t>(n_bins);
    std::vector<std::vector<std::size_t>> bins(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        bins[b].assign(order.begin() + static_cast<std::ptrdiff_t>(b * n / nb),
                       order.begin() + static_cast<std::ptrdiff_t>((b + 1) * n / nb));
        std::sort(bins[b].begin(), bins[b].end());
    }
    return bins;
}

std::vector<BinResult> bin_analysis(const PreparedDataset& data, const ExperimentPlan& plan) {
    const auto bins = view_bins(data.dataset, plan.n_bins);
    const FeatureSet& set = feature_set(plan.bin_feature_set);
    std::vector<BinResult> out(bins.size());
    for (std::size_t b = 0; b < bins.size(); ++b) {
        BinResult& r = out[b];
        r.dataset = data.spec.name;
        r.gap_months = data.spec.gap_months;
        r.bin = static_cast<int>(b + 1);
        r.rows = bins[b].size();
        std::size_t pos = 0;
        for (const auto row : bins[b]) pos += static_cast<std::size_t>(data.labels[row]);
        if (!bins[b].empty()) {
            r.min_views = data.dataset.questions[bins[b].front()].current_views;
            r.max_views = r.min_views;
            for (const auto row : bins[b]) {
                r.min_views = std::min(r.min_views, data.dataset.questions[row].current_views);
                r.max_views = std::max(r.max_views, data.dataset.questions[row].current_views);
            }
            r.forgotten_fraction = static_cast<double>(pos) / static_cast<double>(bins[b].size());
        }
    }

    // Degenerate runs are skipped; a bin with no scored run is degenerate.
    std::vector<std::vector<Confusion>> scored(bins.size());
    if (!plan.bin_global_model) {
        for (std::size_t b = 0; b < bins.size(); ++b) {
            const auto y = labels_of(data, bins[b]);
            for (int run = 0; run < plan.n_runs; ++run) {
                Split s;
                try {
                    s = draw_split(y, plan.train_fraction, split_seed(plan.seed, data.spec.name, run, static_cast<int>(b)),
                                   plan.max_redraws);
                } catch (const DataError&) {
                    continue;
                }
                const auto train = map_rows(s.train, bins[b]);
                const auto test = map_rows(s.test, bins[b]);
                scored[b].push_back(train_and_score_impl(data, set, plan, train, test, nullptr).confusion);
            }
        }
    } else {
        std::vector<int> bin_of(data.labels.size());
        for (std::size_t b = 0; b < bins.size(); ++b) {
            for (const auto row : bins[b]) bin_of[row] = static_cast<int>(b);
        }
        for (int run = 0; run < plan.n_runs; ++run) {
            const Split s = draw_split(data.labels, plan.train_fraction, split_seed(plan.seed, data.spec.name, run),
                                       plan.max_redraws);
            std::vector<double> prob;
            train_and_score_impl(data, set, plan, s.train, s.test, &prob);
            std::vector<std::vector<double>> bp(bins.size());
            std::vector<std::vector<int>> by(bins.size());
            for (std::size_t i = 0; i < s.test.size(); ++i) {
                const auto b = static_cast<std::size_t>(bin_of[s.test[i]]);
                bp[b].push_back(prob[i]);
                by[b].push_back(data.labels[s.test[i]]);
            }
            for (std::size_t b = 0; b < bins.size(); ++b) {
                const bool pos = std::find(by[b].begin(), by[b].end(), 1) != by[b].end();
                const bool neg = std::find(by[b].begin(), by[b].end(), 0) != by[b].end();
                if (pos && neg) scored[b].push_back(confusion(bp[b], by[b]));
            }
        }
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
        BinResult& r = out[b];
        r.scored_runs = static_cast<int>(scored[b].size());
        r.degenerate = scored[b].empty();
        for (const auto& c : scored[b]) {
            r.mean_f1 += c.f1();
            r.mean_accuracy += c.accuracy();
        }
        if (!scored[b].empty()) {
            r.mean_f1 /= static_cast<double>(scored[b].size());
            r.mean_accuracy /= static_cast<double>(scored[b].size());
        }
    }
    return out;
}

std::vector<RankedFeature> rank_features(std::span<const std::map<std::string, double>> per_dataset) {
    std::map<std::string, double> mean;
    for (const auto& m : per_dataset) {
        double total = 0;
        for (const auto& [name, v] : m) {
            if (v < 0) throw DataError("negative importance for " + name);
            total += v;
        }
        for (const auto& [name, v] : m) mean[name] += total > 0 ? v / total : 0.0;
    }
    double sum = 0;
    for (auto& [name, v] : mean) {
        v /= static_cast<double>(per_dataset.size());
        sum += v;
    }
    std::vector<RankedFeature> out;
    for (const auto& [name, v] : mean) out.push_back({name, sum > 0 ? 100.0 * v / sum : 0.0});
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedFeature& a, const RankedFeature& b) { return a.percent > b.percent; });
    return out;
}

std::vector<Aggregate> aggregate(std::span<const CellResult> cells, std::span<const std::string> feature_order) {
    std::set<int> gaps;
    for (const auto& c : cells) gaps.insert(c.gap_months);
    std::vector<Aggregate> out;
    for (const auto& fs : feature_order) {
        for (const int gap : gaps) {
            Aggregate a;
            a.feature_set = fs;
            a.gap_months = gap;
            for (const auto& c : cells) {
                if (c.feature_set != fs || c.gap_months != gap) continue;
                if (a.n_datasets == 0) {
                    a.f1_min = a.f1_max = c.mean_f1;
                    a.acc_min = a.acc_max = c.mean_accuracy;
                }
                a.f1_min = std::min(a.f1_min, c.mean_f1);
                a.f1_max = std::max(a.f1_max, c.mean_f1);
                a.acc_min = std::min(a.acc_min, c.mean_accuracy);
                a.acc_max = std::max(a.acc_max, c.mean_accuracy);
                a.f1_avg += c.mean_f1;
                a.acc_avg += c.mean_accuracy;
                ++a.n_datasets;
            }
            if (a.n_datasets == 0) continue;
            a.f1_avg /= static_cast<double>(a.n_datasets);
            a.acc_avg /= static_cast<double>(a.n_datasets);
            // Keep min <= avg <= max despite rounding when all values agree.
            a.f1_avg = std::clamp(a.f1_avg, a.f1_min, a.f1_max);
            a.acc_avg = std::clamp(a.acc_avg, a.acc_min, a.acc_max);
            out.push_back(a);
        }
    }
    return out;
}

ExperimentReport run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.datasets.empty()) throw ConfigError("plan lists no datasets");
    // Check every store and dump first so a bad reference fails before training.
    for (const auto& d : plan.datasets) {
        if (!std::filesystem::exists(d.store / "manifest.json")) {
            throw DataError("dataset '" + d.name + "': no store at " + d.store.string());
        }
        const auto store = SnapshotStore::open(d.store);
        for (const Timestamp t : {d.t_last, d.t_current, d.t_next}) {
            if (!store.has(t)) throw DataError("dataset '" + d.name + "': store has no dump at " + t.iso());
        }
    }
    std::vector<PreparedDataset> prepared;
    for (const auto& d : plan.datasets) {
        const auto store = SnapshotStore::open(d.store);
        prepared.push_back(prepare_dataset(store, d, plan));
    }
    return run_experiment(plan, prepared);
}

ExperimentReport run_experiment(const ExperimentPlan& plan, std::span<const PreparedDataset> datasets) {
    plan.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.plan = plan;
    report.plan.datasets.clear();
    for (const auto& d : datasets) {
        report.plan.datasets.push_back(d.spec);
        report.dataset_counts.push_back(d.dataset.counts());
    }
    const auto sets = plan.resolved_feature_sets();
    const auto n_runs = static_cast<std::size_t>(plan.n_runs);

    // Splits are shared by every feature set of a (dataset, run).
    std::vector<std::vector<Split>> splits(datasets.size());
    std::vector<std::vector<std::uint64_t>> seeds(datasets.size());
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        for (int run = 0; run < plan.n_runs; ++run) {
            const auto seed = split_seed(plan.seed, datasets[d].spec.name, run);
            seeds[d].push_back(seed);
            try {
                splits[d].push_back(draw_split(datasets[d].labels, plan.train_fraction, seed, plan.max_redraws));
            } catch (const DataError& e) {
                throw DataError("dataset '" + datasets[d].spec.name + "': " + e.what());
            }
        }
    }

    const std::size_t n_jobs = datasets.size() * sets.size() * n_runs;
    std::vector<RunResult> results(n_jobs);
    std::vector<double> job_seconds(n_jobs, 0.0);
    run_pool(n_jobs, plan.jobs, [&](std::size_t job) {
        const auto jt = std::chrono::steady_clock::now();
        const std::size_t d = job / (sets.size() * n_runs);
        const std::size_t f = (job / n_runs) % sets.size();
        const std::size_t run = job % n_runs;
        const Split& s = splits[d][run];
        RunResult r = train_and_score(datasets[d], feature_set(sets[f]), plan, s.train, s.test);
        r.run = static_cast<int>(run);
        r.seed = seeds[d][run];
        r.redraws = s.redraws;
        results[job] = std::move(r);
        job_seconds[job] = seconds_since(jt);
        log::info("evaluate", "run done: " + datasets[d].spec.name + " / " + sets[f],
                  {{"run", static_cast<std::int64_t>(run)}});
    });

    for (std::size_t d = 0; d < datasets.size(); ++d) {
        for (std::size_t f = 0; f < sets.size(); ++f) {
            CellResult cell;
            cell.dataset = datasets[d].spec.name;
            cell.gap_months = datasets[d].spec.gap_months;
            cell.feature_set = sets[f];
            for (std::size_t run = 0; run < n_runs; ++run) {
                const std::size_t job = (d * sets.size() + f) * n_runs + run;
                cell.mean_f1 += results[job].confusion.f1();
                cell.mean_accuracy += results[job].confusion.accuracy();
                cell.seconds += job_seconds[job];
                cell.runs.push_back(std::move(results[job]));
            }
            cell.mean_f1 /= static_cast<double>(n_runs);
            cell.mean_accuracy /= static_cast<double>(n_runs);
            report.cells.push_back(std::move(cell));
        }
    }
    report.table = aggregate(report.cells, sets);

    // Importance from the All set when present, otherwise the last set run.
    const std::string imp_set =
        std::find(sets.begin(), sets.end(), "All") != sets.end() ? std::string("All") : sets.back();
    for (const auto& cell : report.cells) {
        if (cell.feature_set != imp_set) continue;
        std::map<std::string, double> m;
        for (const auto& r : cell.runs) {
            for (const auto& [name, v] : r.importance) m[name] += v / static_cast<double>(cell.runs.size());
        }
        report.importance_by_dataset.push_back(std::move(m));
    }
    report.ranking = rank_features(report.importance_by_dataset);

    if (plan.run_bins) {
        std::vector<std::vector<BinResult>> per(datasets.size());
        run_pool(datasets.size(), plan.jobs, [&](std::size_t d) { per[d] = bin_analysis(datasets[d], plan); });
        for (auto& v : per) report.bins.insert(report.bins.end(), v.begin(), v.end());
    }
    report.total_seconds = seconds_since(t0);
    return report;
}

// --- output ----------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string pct(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, 100.0 * v, std::chars_format::fixed, 4);
    return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::string& header_comment) : path_(path) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw DataError("cannot write " + path.string());
        if (!header_comment.empty()) out_ << header_comment << '\n';
    }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
        out_ << '\n';
    }
    void close() {
        out_.flush();
        if (!out_) throw DataError("write failed for " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text << '\n';
    if (!out.flush()) throw DataError("write failed for " + path.string());
}

}  // namespace

void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir,
                  const std::string& header_comment) {
    std::filesystem::create_directories(out_dir);
    const auto sets = report.plan.resolved_feature_sets();
    std::set<int> gap_set;
    for (const auto& a : report.table) gap_set.insert(a.gap_months);
    const std::vector<int> gaps(gap_set.begin(), gap_set.end());

    {
        // One row per feature set; per gap: F1 min/max/avg then accuracy min/max/avg, in percent.
        CsvFile f(out_dir / "table2.csv", header_comment);
        std::vector<std::string> head{"feature_set"};
        for (const int g : gaps) {
            const std::string s = "_" + std::to_string(g) + "m";
            for (const char* m : {"f1_min", "f1_max", "f1_avg", "acc_min", "acc_max", "acc_avg"}) head.push_back(m + s);
        }
        f.row(head);
        for (const auto& name : sets) {
            std::vector<std::string> row{name};
            for (const int g : gaps) {
                const auto it = std::find_if(report.table.begin(), report.table.end(), [&](const Aggregate& a) {
                    return a.feature_set == name && a.gap_months == g;
                });
                if (it == report.table.end()) {
                    row.insert(row.end(), 6, "");
                } else {
                    for (const double v : {it->f1_min, it->f1_max, it->f1_avg, it->acc_min, it->acc_max, it->acc_avg}) {
                        row.push_back(pct(v));
                    }
                }
            }
            f.row(row);
        }
        f.close();
    }
    {
        CsvFile f(out_dir / "datasets.csv", header_comment);
        f.row({"dataset", "gap_months", "feature_set", "mean_f1", "mean_accuracy"});
        for (const auto& c : report.cells) {
            f.row({c.dataset, std::to_string(c.gap_months), c.feature_set, pct(c.mean_f1), pct(c.mean_accuracy)});
        }
        f.close();
    }
    {
        CsvFile f(out_dir / "runs.csv", header_comment);
        f.row({"dataset", "gap_months", "feature_set", "run", "seed", "redraws", "train_rows", "test_rows", "tp", "fp",
               "fn", "tn", "f1", "accuracy"});
        for (const auto& c : report.cells) {
            for (const auto& r : c.runs) {
                const auto& m = r.confusion;
                f.row({c.dataset, std::to_string(c.gap_months), c.feature_set, std::to_string(r.run),
                       std::to_string(r.seed), std::to_string(r.redraws), std::to_string(r.train_rows),
                       std::to_string(r.test_rows), std::to_string(m.tp), std::to_string(m.fp), std::to_string(m.fn),
                       std::to_string(m.tn), num(m.f1()), num(m.accuracy())});
            }
        }
        f.close();
    }
    {
        CsvFile f(out_dir / "bins.csv", header_comment);
        f.row({"dataset", "gap_months", "bin", "rows", "min_views", "max_views", "forgotten_fraction", "mean_f1",
               "mean_accuracy", "scored_runs", "degenerate", "mode"});
        const std::string mode = report.plan.bin_global_model ? "global" : "within-bin";
        for (const auto& b : report.bins) {
            f.row({b.dataset, std::to_string(b.gap_months), std::to_string(b.bin), std::to_string(b.rows),
                   std::to_string(b.min_views), std::to_string(b.max_views), num(b.forgotten_fraction), num(b.mean_f1),
                   num(b.mean_accuracy), std::to_string(b.scored_runs), b.degenerate ? "1" : "0", mode});
        }
        f.close();
    }
    for (const bool top : {false, true}) {
        CsvFile f(out_dir / (top ? "importance_top.csv" : "importance.csv"), header_comment);
        f.row({"rank", "feature", "percent"});
        const std::size_t n = top ? std::min(report.plan.top_k, report.ranking.size()) : report.ranking.size();
        for (std::size_t i = 0; i < n; ++i) {
            f.row({std::to_string(i + 1), report.ranking[i].feature, num(report.ranking[i].percent)});
        }
        f.close();
    }
    {
        json datasets = json::array();
        for (std::size_t d = 0; d < report.plan.datasets.size(); ++d) {
            const auto& s = report.plan.datasets[d];
            const auto& c = report.dataset_counts.at(d);
            datasets.push_back({{"name", s.name},
                                {"gap_months", s.gap_months},
                                {"triple", {s.t_last.iso(), s.t_current.iso(), s.t_next.iso()}},
                                {"total", c.total},
                                {"being_forgotten", c.being_forgotten},
                                {"unforgotten", c.unforgotten}});
        }
        json runs = json::array();
        for (const auto& c : report.cells) {
            if (c.feature_set != sets.front()) continue;  // splits are shared across feature sets
            for (const auto& r : c.runs) {
                runs.push_back({{"dataset", c.dataset}, {"run", r.run}, {"seed", r.seed}, {"redraws", r.redraws}});
            }
        }
        // Store locations and worker count do not affect results; they go to runtimes.json.
        json plan = json::parse(plan_to_json(report.plan));
        plan.erase("jobs");
        for (auto& d : plan["datasets"]) d.erase("store");
        json manifest{{"tool", "forgetq"},
                      {"plan", plan},
                      {"datasets", datasets},
                      {"splits", runs},
                      {"outputs",
                       {"table2.csv", "datasets.csv", "runs.csv", "bins.csv", "importance.csv", "importance_top.csv",
                        "runtimes.json"}}};
        if (!header_comment.empty()) manifest["header"] = header_comment;
        write_text(out_dir / "manifest.json", manifest.dump(2));
    }
    {
        // Wall-clock times vary run to run, so they live apart from the deterministic outputs.
        json cells = json::array();
        for (const auto& c : report.cells) {
            cells.push_back({{"dataset", c.dataset}, {"feature_set", c.feature_set}, {"seconds", c.seconds}});
        }
        json stores = json::object();
        for (const auto& d : report.plan.datasets) stores[d.name] = d.store.string();
        write_text(out_dir / "runtimes.json", json{{"total_seconds", report.total_seconds},
                                                   {"jobs", report.plan.jobs},
                                                   {"stores", stores},
                                                   {"cells", cells}}
                                                  .dump(2));
    }
}

}  // namespace forgetq::evaluate
