#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "forgetq/errors.hpp"
#include "forgetq/evaluate.hpp"
#include "forgetq/synthgen.hpp"
#include "test_util.hpp"

using namespace forgetq;
using namespace forgetq::evaluate;

namespace {

struct Corpus {
    forgetq::testing::TempDir dir;
    synth::SynthCorpus corpus;

    explicit Corpus(const synth::SynthConfig& c) {
        corpus = synth::generate_corpus(c);
        auto store = SnapshotStore::open(dir / "store", true);
        for (const auto& d : corpus.dumps) write_snapshot(d, store);
    }
    [[nodiscard]] DatasetSpec spec(const std::string& name = "synth") const {
        const auto& t = corpus.triples.at(0);
        return {name, dir / "store", t.t_last, t.t_current, t.t_next, 6};
    }
};

synth::SynthConfig corpus_config(double signal, std::uint64_t seed) {
    synth::SynthConfig c;
    c.n_questions = 3000;
    c.n_users = 300;
    c.n_tags = 24;
    c.signal_strength = signal;
    c.seed = seed;
    return c;
}

// Planted-signal corpus shared by most tests.
const Corpus& planted() {
    static const Corpus c(corpus_config(1.0, 21));
    return c;
}

ExperimentPlan quick_plan(const Corpus& c) {
    ExperimentPlan p;
    p.datasets = {c.spec()};
    p.feature_sets = {"Tag", "Question+User+Answer+Tag"};
    p.n_runs = 3;
    p.run_bins = false;
    p.boost.n_rounds = 40;
    p.text_caps.body = 200;
    p.text_caps.title = 100;
    return p;
}

}  // namespace

TEST(EvaluateMetrics, ConfusionFixture) {
    const Confusion c{8, 2, 4, 6};
    // precision 0.8, recall 2/3
    EXPECT_DOUBLE_EQ(c.f1(), 2.0 * 0.8 * (2.0 / 3.0) / (0.8 + 2.0 / 3.0));
    EXPECT_DOUBLE_EQ(c.accuracy(), 14.0 / 20.0);
    EXPECT_EQ(Confusion{}.f1(), 0.0);
    EXPECT_EQ((Confusion{0, 3, 2, 5}.f1()), 0.0);

    const std::vector<double> p{0.9, 0.5, 0.49, 0.1, 0.7};
    const std::vector<int> y{1, 0, 1, 0, 0};
    const auto m = confusion(p, y);
    EXPECT_EQ(m.tp, 1u);
    EXPECT_EQ(m.fp, 2u);  // 0.5 counts as positive
    EXPECT_EQ(m.fn, 1u);
    EXPECT_EQ(m.tn, 1u);
}

TEST(EvaluateSplit, DisjointCoveringAndBothClasses) {
    std::mt19937_64 rng(4);
    std::vector<int> y(203);
    for (auto& v : y) v = static_cast<int>(rng() % 4 == 0);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto s = draw_split(y, 0.9, seed, 10);
        EXPECT_EQ(s.train.size(), 183u);
        EXPECT_EQ(s.train.size() + s.test.size(), y.size());
        EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
        std::vector<std::size_t> all;
        std::set_union(s.train.begin(), s.train.end(), s.test.begin(), s.test.end(), std::back_inserter(all));
        ASSERT_EQ(all.size(), y.size());
        for (const auto* part : {&s.train, &s.test}) {
            int pos = 0;
            for (const auto i : *part) pos += y[i];
            EXPECT_GT(pos, 0);
            EXPECT_LT(pos, static_cast<int>(part->size()));
        }
        EXPECT_EQ(s.train, draw_split(y, 0.9, seed, 10).train);
    }
}

TEST(EvaluateSplit, RedrawsAreCountedAndBounded) {
    // Two positives in 40 rows: a 90/10 split often leaves the test part single-class.
    std::vector<int> y(40, 0);
    y[3] = y[17] = 1;
    int redrawn = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        try {
            redrawn += draw_split(y, 0.9, seed, 50).redraws;
        } catch (const DataError&) {
        }
    }
    EXPECT_GT(redrawn, 0);
    std::vector<int> one(40, 0);
    one[5] = 1;
    EXPECT_THROW(draw_split(one, 0.9, 1, 10), DataError);
    EXPECT_THROW(draw_split(std::vector<int>{0, 1, 0}, 0.5, 1, 10), DataError);
}

TEST(EvaluateSplit, SeedsDependOnDatasetAndRunOnly) {
    EXPECT_EQ(split_seed(1, "a", 0), split_seed(1, "a", 0, 0));
    std::set<std::uint64_t> seen;
    for (const char* d : {"a", "b"}) {
        for (int run = 0; run < 5; ++run) {
            for (int bin = 0; bin < 3; ++bin) seen.insert(split_seed(1, d, run, bin));
        }
    }
    EXPECT_EQ(seen.size(), 30u);
    EXPECT_NE(split_seed(1, "a", 0), split_seed(2, "a", 0));
}

TEST(EvaluateAggregate, SingleDatasetCollapses) {
    std::vector<CellResult> cells{{"d1", 6, "Tag", {}, 0.7, 0.8, 0}, {"d1", 6, "All", {}, 0.9, 0.95, 0}};
    const std::vector<std::string> order{"Tag", "All"};
    for (const auto& a : aggregate(cells, order)) {
        EXPECT_EQ(a.n_datasets, 1u);
        EXPECT_EQ(a.f1_min, a.f1_max);
        EXPECT_EQ(a.f1_min, a.f1_avg);
        EXPECT_EQ(a.acc_min, a.acc_avg);
        EXPECT_EQ(a.acc_max, a.acc_avg);
    }
}

TEST(EvaluateAggregate, MinAvgMaxPerGap) {
    std::vector<CellResult> cells{{"d1", 6, "All", {}, 0.2, 0.5, 0},
                                  {"d2", 6, "All", {}, 0.6, 0.7, 0},
                                  {"d3", 6, "All", {}, 0.7, 0.9, 0},
                                  {"d4", 3, "All", {}, 0.1, 0.3, 0}};
    const std::vector<std::string> order{"All"};
    const auto t = aggregate(cells, order);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0].gap_months, 3);
    EXPECT_EQ(t[1].gap_months, 6);
    EXPECT_EQ(t[1].n_datasets, 3u);
    EXPECT_DOUBLE_EQ(t[1].f1_min, 0.2);
    EXPECT_DOUBLE_EQ(t[1].f1_max, 0.7);
    EXPECT_DOUBLE_EQ(t[1].f1_avg, 0.5);
    EXPECT_DOUBLE_EQ(t[1].acc_avg, 0.7);
}

TEST(EvaluateRanking, SingleDatasetKeepsOrder) {
    const std::vector<std::map<std::string, double>> one{{{"a", 5.0}, {"b", 30.0}, {"c", 15.0}, {"d", 0.0}}};
    const auto r = rank_features(one);
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r[0].feature, "b");
    EXPECT_EQ(r[1].feature, "c");
    EXPECT_EQ(r[2].feature, "a");
    EXPECT_NEAR(r[0].percent, 60.0, 1e-12);
    EXPECT_NEAR(r[3].percent, 0.0, 1e-12);
}

TEST(EvaluateRanking, DisjointFeaturesHalveAndSumTo100) {
    const std::vector<std::map<std::string, double>> two{{{"a", 3.0}, {"b", 1.0}}, {{"c", 10.0}, {"d", 30.0}}};
    const auto r = rank_features(two);
    std::map<std::string, double> got;
    double total = 0;
    for (const auto& f : r) {
        got[f.feature] = f.percent;
        total += f.percent;
    }
    EXPECT_NEAR(got["a"], 37.5, 1e-12);
    EXPECT_NEAR(got["b"], 12.5, 1e-12);
    EXPECT_NEAR(got["c"], 12.5, 1e-12);
    EXPECT_NEAR(got["d"], 37.5, 1e-12);
    EXPECT_NEAR(total, 100.0, 1e-6);
    // Ties broken by name.
    EXPECT_EQ(r[0].feature, "a");
    EXPECT_EQ(r[1].feature, "d");

    std::mt19937_64 rng(2);
    std::vector<std::map<std::string, double>> many(5);
    for (auto& m : many) {
        for (int f = 0; f < 40; ++f) {
            if (rng() % 3) m["f" + std::to_string(f)] = std::uniform_real_distribution<double>(0, 100)(rng);
        }
    }
    double sum = 0;
    for (const auto& f : rank_features(many)) sum += f.percent;
    EXPECT_NEAR(sum, 100.0, 1e-6);
}

TEST(EvaluateBins, MatchBruteForceQuantiles) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        CohortDataset ds;
        const std::size_t n = 50 + rng() % 300;
        for (std::size_t i = 0; i < n; ++i) {
            LabeledQuestion q;
            q.question_id = static_cast<std::int64_t>(i + 1);
            q.current_views = 1 + static_cast<std::int64_t>(rng() % (trial % 2 ? 20 : 100000));
            ds.questions.push_back(q);
        }
        const int nb = 1 + static_cast<int>(rng() % 12);
        const auto bins = view_bins(ds, nb);
        ASSERT_EQ(bins.size(), static_cast<std::size_t>(nb));
        // Brute force: rank of each row in (views, position) order decides its bin.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::pair(ds.questions[a].current_views, a) < std::pair(ds.questions[b].current_views, b);
        });
        std::vector<std::vector<std::size_t>> expect(static_cast<std::size_t>(nb));
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t b = 0;
            while ((b + 1) * n / static_cast<std::size_t>(nb) <= r) ++b;
            expect[b].push_back(order[r]);
        }
        for (auto& e : expect) std::sort(e.begin(), e.end());
        EXPECT_EQ(bins, expect);
        for (std::size_t b = 0; b < bins.size(); ++b) {
            const std::size_t lo = b * n / static_cast<std::size_t>(nb);
            const std::size_t hi = (b + 1) * n / static_cast<std::size_t>(nb);
            EXPECT_EQ(bins[b].size(), hi - lo);
        }
    }
}

TEST(EvaluateBins, SingleBinReproducesWholeDataset) {
    const auto& c = planted();
    auto plan = quick_plan(c);
    plan.feature_sets = {"Question+User+Answer+Tag"};
    plan.bin_feature_set = "Question+User+Answer+Tag";
    plan.n_bins = 1;
    plan.run_bins = true;
    const auto report = run_experiment(plan);
    ASSERT_EQ(report.bins.size(), 1u);
    ASSERT_EQ(report.cells.size(), 1u);
    EXPECT_EQ(report.bins[0].rows, report.dataset_counts[0].total);
    EXPECT_DOUBLE_EQ(report.bins[0].mean_f1, report.cells[0].mean_f1);
    EXPECT_DOUBLE_EQ(report.bins[0].mean_accuracy, report.cells[0].mean_accuracy);
}

TEST(EvaluateBins, LowViewBiasShowsInFirstBin) {
    auto cfg = corpus_config(0.0, 5);
    cfg.low_view_bias = 1.0;
    const Corpus c(cfg);
    auto plan = quick_plan(c);
    plan.feature_sets = {"Tag"};
    plan.bin_feature_set = "Tag";
    plan.n_runs = 1;
    plan.run_bins = true;
    for (const bool global : {false, true}) {
        plan.bin_global_model = global;
        const auto report = run_experiment(plan);
        ASSERT_EQ(report.bins.size(), 10u);
        EXPECT_GT(report.bins.front().forgotten_fraction, report.bins.back().forgotten_fraction + 0.3);
        for (std::size_t b = 1; b < report.bins.size(); ++b) {
            EXPECT_GE(report.bins[b].min_views, report.bins[b - 1].max_views);
        }
    }
}

TEST(EvaluateExperiment, PlantedSignalIsLearned) {
    const auto& c = planted();
    auto plan = quick_plan(c);
    plan.feature_sets = {"Tag", "All"};
    plan.boost.n_rounds = 60;
    const auto report = run_experiment(plan);
    ASSERT_EQ(report.cells.size(), 2u);
    for (const auto& cell : report.cells) {
        EXPECT_GE(cell.mean_f1, 0.9) << cell.feature_set;
        ASSERT_EQ(cell.runs.size(), 3u);
        for (const auto& r : cell.runs) {
            EXPECT_EQ(r.train_rows + r.test_rows, report.dataset_counts[0].total);
            EXPECT_EQ(r.confusion.total(), r.test_rows);
        }
    }
    // Both cells use the same splits per run.
    for (int r = 0; r < 3; ++r) EXPECT_EQ(report.cells[0].runs[r].seed, report.cells[1].runs[r].seed);
    double total = 0;
    for (const auto& f : report.ranking) total += f.percent;
    EXPECT_NEAR(total, 100.0, 1e-6);
    ASSERT_FALSE(report.ranking.empty());
    EXPECT_EQ(report.ranking[0].feature.rfind("Tag", 0), 0u) << report.ranking[0].feature;
}

// A model that learns nothing from shuffled labels predicts independently of
// them; its accuracy equals the majority rate only when classes are balanced,
// so the corpus uses a 50% forgotten rate.
TEST(EvaluateExperiment, ShuffledLabelsFallToMajorityRate) {
    auto cfg = corpus_config(0.0, 9);
    cfg.null_forgotten_rate = 0.5;
    cfg.n_questions = 9000;
    const Corpus c(cfg);
    auto plan = quick_plan(c);
    plan.feature_sets = {"Question+User+Answer+Tag"};
    plan.shuffle_labels = true;
    plan.n_runs = 5;
    plan.boost = gbt::BoostConfig{};
    const auto report = run_experiment(plan);
    const auto counts = report.dataset_counts[0];
    const double pos = static_cast<double>(counts.being_forgotten) / static_cast<double>(counts.total);
    const double majority = std::max(pos, 1.0 - pos);
    EXPECT_NEAR(report.cells[0].mean_accuracy, majority, 0.03) << "prevalence " << pos;
}

TEST(EvaluateExperiment, ReportIsByteIdentical) {
    const auto& c = planted();
    auto plan = quick_plan(c);
    plan.run_bins = true;
    plan.n_bins = 4;
    plan.bin_feature_set = "Tag";
    plan.n_runs = 2;
    forgetq::testing::TempDir a, b;
    write_report(run_experiment(plan), a.path(), "# header");
    plan.jobs = 3;
    write_report(run_experiment(plan), b.path(), "# header");
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(a.path())) {
        const auto name = e.path().filename().string();
        if (name == "runtimes.json") continue;
        ++files;
        EXPECT_EQ(forgetq::testing::slurp(e.path()), forgetq::testing::slurp(b / name)) << name;
    }
    EXPECT_GE(files, 7u);
    EXPECT_EQ(forgetq::testing::slurp(a / "table2.csv").rfind("# header\n", 0), 0u);
}

TEST(EvaluateExperiment, TableHasThirteenRows) {
    std::vector<CellResult> cells;
    std::vector<std::string> order;
    for (const auto& s : standard_feature_sets()) {
        order.push_back(s.name);
        cells.push_back({"d", 6, s.name, {}, 0.5, 0.5, 0});
        cells.push_back({"e", 3, s.name, {}, 0.4, 0.6, 0});
    }
    ExperimentReport report;
    report.plan.feature_sets = order;
    report.cells = cells;
    report.table = aggregate(cells, order);
    forgetq::testing::TempDir dir;
    write_report(report, dir.path());
    std::istringstream in(forgetq::testing::slurp(dir / "table2.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line,
              "feature_set,f1_min_3m,f1_max_3m,f1_avg_3m,acc_min_3m,acc_max_3m,acc_avg_3m,"
              "f1_min_6m,f1_max_6m,f1_avg_6m,acc_min_6m,acc_max_6m,acc_avg_6m");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(rows, order);
}

TEST(EvaluatePlan, JsonRoundTripAndErrors) {
    const std::string text = R"({
      "datasets": [{"name": "x", "store": "st", "triple": ["2018-01-01", "2018-07-02", "2019-01-01"], "gap_months": 6}],
      "feature_sets": ["Tag", "All"], "n_runs": 2, "seed": 9, "boost": {"n_rounds": 10}, "cohort": {"highly_viewed_fraction": 0.2}
    })";
    const auto p = plan_from_json(text, "/base");
    EXPECT_EQ(p.datasets.at(0).store, std::filesystem::path("/base/st"));
    EXPECT_EQ(p.boost.n_rounds, 10);
    EXPECT_EQ(p.cohort.highly_viewed_fraction, 0.2);
    EXPECT_EQ(plan_to_json(plan_from_json(plan_to_json(p))), plan_to_json(p));
    EXPECT_THROW(plan_from_json(R"({"datasets": [], "typo": 1})"), ConfigError);
    EXPECT_THROW(plan_from_json(R"({"feature_sets": ["Nope"]})").validate(), ConfigError);
    EXPECT_THROW(plan_from_json(R"({"train_fraction": 1.0})").validate(), ConfigError);
    EXPECT_THROW(plan_from_json(R"({"n_runs": 0})").validate(), ConfigError);
    EXPECT_THROW(feature_set("tfidf-everything"), ConfigError);
    EXPECT_EQ(standard_feature_sets().size(), 13u);
}

TEST(EvaluatePlan, MissingStoreFailsBeforeTraining) {
    const auto& c = planted();
    auto plan = quick_plan(c);
    auto bad = c.spec("missing");
    bad.store = c.dir / "nowhere";
    plan.datasets.push_back(bad);
    EXPECT_THROW(run_experiment(plan), DataError);
    auto wrong_time = c.spec("wrong");
    wrong_time.t_next = Timestamp::from_civil(2030, 1, 1);
    plan.datasets = {wrong_time};
    EXPECT_THROW(run_experiment(plan), DataError);
}
