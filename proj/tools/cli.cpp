#include "cli.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "forgetq/cohort.hpp"
#include "forgetq/errors.hpp"
#include "forgetq/evaluate.hpp"
#include "forgetq/featurize.hpp"
#include "forgetq/log.hpp"
#include "forgetq/stats.hpp"
#include "forgetq/synthgen.hpp"
#include "json.hpp"

namespace forgetq::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string header_comment(const std::string& canonical_config) {
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(canonical_config.data()),
                           static_cast<uInt>(canonical_config.size()));
    char hex[9];
    std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
    return std::string("# forgetq ") + FORGETQ_VERSION + " config=" + hex;
}

IngestCounts ingest_files(const DumpFiles& files, Timestamp dump_time, SnapshotStore& store,
                          WriteOptions write_options, ParseOptions parse_options) {
    for (const auto& p : {files.posts, files.users, files.tags}) {
        if (!fs::is_regular_file(p)) throw DataError("missing input file " + p.string());
    }
    IngestCounts counts;
    SnapshotBuilder builder(dump_time, write_options);
    auto open = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw DataError("cannot open " + p.string());
        return in;
    };
    {
        auto in = open(files.posts);
        PostReader reader(in, dump_time, parse_options);
        while (auto rec = reader.next()) {
            if (const auto* q = std::get_if<QuestionRecord>(&*rec)) {
                builder.add(*q);
                ++counts.questions;
            } else {
                builder.add(std::get<AnswerRecord>(*rec));
                ++counts.answers;
            }
        }
        counts.skipped_rows += reader.stats().skipped_other_type;
        counts.warnings += reader.stats().warning_count;
        counts.peak_buffer_bytes = std::max(counts.peak_buffer_bytes, reader.peak_buffer_bytes());
    }
    {
        auto in = open(files.users);
        UserReader reader(in, parse_options);
        while (auto u = reader.next()) {
            builder.add(*u);
            ++counts.users;
        }
        counts.warnings += reader.stats().warning_count;
    }
    {
        auto in = open(files.tags);
        TagReader reader(in, parse_options);
        while (auto t = reader.next()) {
            builder.add(*t);
            ++counts.tags;
        }
        counts.warnings += reader.stats().warning_count;
    }
    std::vector<QuestionText> texts;
    const auto tables = builder.finish(write_options.store_text ? &texts : nullptr);
    store.write(tables, write_options.store_text ? &texts : nullptr);
    log::info("ingest", "snapshot written",
              {{"questions", static_cast<std::int64_t>(counts.questions)},
               {"answers", static_cast<std::int64_t>(counts.answers)},
               {"users", static_cast<std::int64_t>(counts.users)},
               {"tags", static_cast<std::int64_t>(counts.tags)},
               {"warnings", static_cast<std::int64_t>(counts.warnings)}});
    return counts;
}

namespace {

Timestamp parse_time(const std::string& s) {
    const auto t = Timestamp::parse(s);
    if (!t) throw ConfigError("bad timestamp '" + s + "'");
    return *t;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = s.find(',', start);
        out.push_back(s.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<Timestamp> parse_times(const std::string& s, std::size_t expected = 0) {
    std::vector<Timestamp> out;
    for (const auto& part : split_list(s)) out.push_back(parse_time(part));
    if (expected && out.size() != expected) {
        throw ConfigError("expected " + std::to_string(expected) + " comma-separated timestamps, got '" + s + "'");
    }
    return out;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split_list(s)) {
        double v = 0;
        const auto r = std::from_chars(part.data(), part.data() + part.size(), v);
        if (r.ec != std::errc() || r.ptr != part.data() + part.size()) throw ConfigError("bad number '" + part + "'");
        out.push_back(v);
    }
    return out;
}

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a temp file and renames, so a failed command leaves no partial output.
void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const auto tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << text;
        if (!f.flush()) throw DataError("cannot write " + path);
    }
    fs::rename(tmp, p);
}

json cohort_json(const CohortConfig& c) {
    return json{{"gap_months", c.gap_months},
                {"highly_viewed_fraction", c.highly_viewed_fraction},
                {"forgotten_growth_threshold", c.forgotten_growth_threshold},
                {"top_n_grid", c.top_n_grid},
                {"stale_view_ceiling", c.stale_view_ceiling},
                {"gap_tolerance_days", c.gap_tolerance_days}};
}

/// Settings shared by every command: file values first, flags override.
struct Settings {
    std::string config_path;
    std::string log_level = "info";
    unsigned jobs = 1;
    std::string store;
    CohortConfig cohort;

    void load_file() {
        if (config_path.empty()) return;
        json j;
        try {
            j = json::parse(read_text(config_path));
        } catch (const json::exception& e) {
            throw ConfigError("bad config file " + config_path + ": " + e.what());
        }
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        try {
            for (const auto& [k, v] : j.items()) {
                if (k == "log_level") log_level = v.get<std::string>();
                else if (k == "jobs") jobs = v.get<unsigned>();
                else if (k == "store") {
                    fs::path s = v.get<std::string>();
                    store = (s.is_relative() ? fs::path(config_path).parent_path() / s : s).string();
                } else if (k == "cohort") {
                    for (const auto& [ck, cv] : v.items()) {
                        if (ck == "highly_viewed_fraction") cohort.highly_viewed_fraction = cv.get<double>();
                        else if (ck == "forgotten_growth_threshold") cohort.forgotten_growth_threshold = cv.get<double>();
                        else if (ck == "gap_tolerance_days") cohort.gap_tolerance_days = cv.get<double>();
                        else if (ck == "stale_view_ceiling") cohort.stale_view_ceiling = cv.get<std::int64_t>();
                        else if (ck == "top_n_grid") cohort.top_n_grid = cv.get<std::vector<double>>();
                        else throw ConfigError("unknown cohort key '" + ck + "' in " + config_path);
                    }
                } else {
                    throw ConfigError("unknown config key '" + k + "' in " + config_path);
                }
            }
        } catch (const json::exception& e) {
            throw ConfigError("bad config file " + config_path + ": " + e.what());
        }
    }
};

struct Opt {
    CLI::Option* opt = nullptr;
    [[nodiscard]] bool given() const { return opt && opt->count() > 0; }
};

class Commands {
public:
    Commands(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(const std::vector<std::string>& args) {
        CLI::App app{"Mining and predicting questions that are being forgotten in community QA dumps", "forgetq"};
        app.set_version_flag("--version", std::string("forgetq ") + FORGETQ_VERSION);
        app.require_subcommand(1);
        app.add_option("--config", s_.config_path, "JSON settings file (flags override it)")->check(CLI::ExistingFile);
        auto* level = app.add_option("--log-level", flag_log_level_, "debug|info|warn|error|off");
        auto* jobs = app.add_option("--jobs", flag_jobs_, "worker threads")->check(CLI::Range(1u, 256u));
        level_ = Opt{level};
        jobs_ = Opt{jobs};

        add_ingest(app);
        add_build_dataset(app);
        add_analyze(app);
        add_experiment(app);
        add_synth(app);

        std::vector<const char*> argv{"forgetq"};
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out_, err_);
            return code == 0 ? kExitOk : kExitUsage;
        }
        try {
            s_.load_file();
            if (level_.given()) s_.log_level = flag_log_level_;
            if (jobs_.given()) s_.jobs = flag_jobs_;
            log::Level lv;
            if (!log::parse_level(s_.log_level, lv)) throw ConfigError("bad log level '" + s_.log_level + "'");
            log::set_level(lv);
            return action_();
        } catch (const ConfigError& e) {
            err_ << "forgetq: " << e.what() << '\n';
            return kExitUsage;
        } catch (const DataError& e) {
            err_ << "forgetq: " << e.what() << '\n';
            return kExitData;
        } catch (const fs::filesystem_error& e) {
            err_ << "forgetq: " << e.what() << '\n';
            return kExitData;
        } catch (const std::exception& e) {
            err_ << "forgetq: internal error: " << e.what() << '\n';
            return kExitInternal;
        }
    }

private:
    std::string store_path(const std::string& flag) const {
        const std::string p = flag.empty() ? s_.store : flag;
        if (p.empty()) throw ConfigError("--store is required (or \"store\" in the config file)");
        return p;
    }

    std::string header(const json& effective) const { return header_comment(effective.dump()); }

    // --- ingest ---------------------------------------------------------

    void add_ingest(CLI::App& app) {
        auto* c = app.add_subcommand("ingest", "Parse one dump (Posts, Users, Tags) into a snapshot");
        auto* o = &ingest_;
        c->add_option("--posts", o->posts, "Posts.xml");
        c->add_option("--users", o->users, "Users.xml");
        c->add_option("--tags", o->tags, "Tags.xml");
        c->add_option("--dump-dir", o->dir, "directory holding Posts.xml, Users.xml and Tags.xml");
        c->add_option("--dump-time", o->time, "publication time of the dump (ISO-8601)")->required();
        c->add_option("--store", o->store, "snapshot store directory (created when missing)");
        c->add_flag("--no-text", o->no_text, "do not keep raw title/body text");
        c->add_flag("--strict", o->strict, "fail on the first malformed row");
        c->callback([this] { action_ = [this] { return ingest(); }; });
    }

    int ingest() {
        const auto& o = ingest_;
        DumpFiles files;
        if (!o.dir.empty()) files = {fs::path(o.dir) / "Posts.xml", fs::path(o.dir) / "Users.xml", fs::path(o.dir) / "Tags.xml"};
        if (!o.posts.empty()) files.posts = o.posts;
        if (!o.users.empty()) files.users = o.users;
        if (!o.tags.empty()) files.tags = o.tags;
        if (files.posts.empty() || files.users.empty() || files.tags.empty()) {
            throw ConfigError("ingest needs --posts, --users and --tags (or --dump-dir)");
        }
        const Timestamp t = parse_time(o.time);
        auto store = SnapshotStore::open(store_path(o.store), true);
        const bool replacing = store.has(t);
        ParseOptions po;
        po.strict = o.strict;
        const auto c = ingest_files(files, t, store, WriteOptions{!o.no_text}, po);
        out_ << "dump_time=" << t.iso() << " questions=" << c.questions << " answers=" << c.answers
             << " users=" << c.users << " tags=" << c.tags << " skipped_rows=" << c.skipped_rows
             << " warnings=" << c.warnings << (replacing ? " replaced=1" : "") << '\n';
        return kExitOk;
    }

    // --- build-dataset --------------------------------------------------

    void add_build_dataset(CLI::App& app) {
        auto* c = app.add_subcommand("build-dataset", "Label one (last, current, next) dump triple");
        auto* o = &build_;
        c->add_option("--store", o->store, "snapshot store");
        c->add_option("--triple", o->triple, "T_last,T_current,T_next")->required();
        c->add_option("--gap", o->gap, "months between dumps")->required()->check(CLI::IsMember({3, 6}));
        c->add_option("--out", o->out, "dataset CSV (a .json sidecar is written next to it)")->required();
        c->add_option("--name", o->name, "dataset name for the printed table");
        o->fraction = Opt{c->add_option("--highly-viewed-fraction", o->fraction_v, "top share selected")};
        o->threshold = Opt{c->add_option("--threshold", o->threshold_v, "views growth below this is forgotten")};
        o->tolerance = Opt{c->add_option("--gap-tolerance-days", o->tolerance_v, "allowed period deviation")};
        c->callback([this] { action_ = [this] { return build_dataset(); }; });
    }

    CohortConfig cohort_config(int gap) const {
        CohortConfig c = s_.cohort;
        c.gap_months = gap;
        const auto& o = build_;
        if (o.fraction.given()) c.highly_viewed_fraction = o.fraction_v;
        if (o.threshold.given()) c.forgotten_growth_threshold = o.threshold_v;
        if (o.tolerance.given()) c.gap_tolerance_days = o.tolerance_v;
        c.validate();
        return c;
    }

    int build_dataset() {
        const auto& o = build_;
        const auto t = parse_times(o.triple, 3);
        const auto cfg = cohort_config(o.gap);
        const auto store = SnapshotStore::open(store_path(o.store));
        const auto ds = build_dataset_impl(store, t, cfg);
        const json eff{{"command", "build-dataset"}, {"triple", {t[0].iso(), t[1].iso(), t[2].iso()}}, {"cohort", cohort_json(cfg)}};
        std::ostringstream csv;
        csv << header(eff) << '\n';
        write_dataset_csv(ds, csv);
        auto side = json::parse(dataset_sidecar_json(ds));
        side["generator"] = header(eff).substr(2);
        write_output(o.out + ".json", side.dump(2) + "\n", out_);
        write_output(o.out, csv.str(), out_);
        const auto c = ds.counts();
        out_ << "dataset,gap_months,t_last,t_current,t_next,#total,#being_forgotten,#unforgotten\n"
             << (o.name.empty() ? fs::path(o.out).stem().string() : o.name) << ',' << o.gap << ',' << t[0].iso() << ','
             << t[1].iso() << ',' << t[2].iso() << ',' << c.total << ',' << c.being_forgotten << ',' << c.unforgotten
             << '\n';
        return kExitOk;
    }

    static CohortDataset build_dataset_impl(const SnapshotStore& store, const std::vector<Timestamp>& t,
                                            const CohortConfig& cfg) {
        if (!(t[0] < t[1] && t[1] < t[2])) throw ConfigError("triple must be strictly increasing");
        return forgetq::build_dataset(store, t[0], t[1], t[2], cfg);
    }

    // --- analyze --------------------------------------------------------

    void add_analyze(CLI::App& app) {
        auto* c = app.add_subcommand("analyze", "Descriptive analyses as plot-ready CSV");
        auto* o = &analyze_;
        c->add_option("--store", o->store, "snapshot store");
        c->add_option("--which", o->which, "analysis")
            ->required()
            ->check(CLI::IsMember(
                {"forgotten-signal", "concentration", "overlap", "growth-hist", "closed", "predictiveness"}));
        c->add_option("--dumps", o->dumps, "forgotten-signal: comma-separated dump times");
        c->add_option("--window", o->window, "forgotten-signal: START,END of the reference window");
        c->add_option("--period", o->period, "concentration: T1,T2");
        c->add_option("--grid", o->grid, "comma-separated top fractions");
        c->add_option("--pair", o->pairs, "overlap: A_start,A_end,B_start,B_end (repeatable)");
        c->add_option("--dataset", o->dataset, "growth-hist/closed/predictiveness: dataset CSV");
        c->add_option("--out", o->out, "output CSV (stdout when omitted)");
        c->callback([this] { action_ = [this] { return analyze(); }; });
    }

    int analyze() {
        const auto& o = analyze_;
        const auto store = SnapshotStore::open(store_path(o.store));
        if (store.dump_times().empty()) throw DataError("store " + store.root().string() + " holds no snapshots");
        json eff{{"command", "analyze"}, {"which", o.which}};
        std::ostringstream csv;
        auto need = [](const std::string& v, const char* flag) {
            if (v.empty()) throw ConfigError(std::string("--which needs ") + flag);
        };
        if (o.which == "forgotten-signal") {
            need(o.dumps, "--dumps");
            need(o.window, "--window");
            CohortConfig cfg = s_.cohort;
            if (!o.grid.empty()) cfg.top_n_grid = parse_grid(o.grid);
            const auto dumps = parse_times(o.dumps);
            const auto w = parse_times(o.window, 2);
            const auto table = forgotten_signal(store, dumps, w[0], w[1], cfg);
            eff["cohort"] = cohort_json(cfg);
            eff["window"] = {w[0].iso(), w[1].iso()};
            csv << header(eff) << "\ndump_time,top_fraction,stale_fraction,excluded\n";
            for (std::size_t d = 0; d < table.dump_times.size(); ++d) {
                for (std::size_t g = 0; g < table.top_n_grid.size(); ++g) {
                    csv << table.dump_times[d].iso() << ',' << num(table.top_n_grid[g]) << ','
                        << num(table.fraction[d][g]) << ',' << table.excluded[d][g] << '\n';
                }
            }
        } else if (o.which == "concentration") {
            need(o.period, "--period");
            const auto p = parse_times(o.period, 2);
            const auto grid = o.grid.empty() ? default_concentration_grid() : parse_grid(o.grid);
            eff["period"] = {p[0].iso(), p[1].iso()};
            eff["grid"] = grid;
            csv << header(eff) << "\ntop_fraction,top_count,view_share\n";
            for (const auto& r : view_concentration(store, p[0], p[1], grid)) {
                csv << num(r.top_fraction) << ',' << r.top_count << ',' << num(r.share) << '\n';
            }
        } else if (o.which == "overlap") {
            if (o.pairs.empty()) throw ConfigError("--which overlap needs at least one --pair");
            std::vector<std::pair<Period, Period>> pairs;
            for (const auto& s : o.pairs) {
                const auto t = parse_times(s, 4);
                pairs.push_back({{t[0], t[1]}, {t[2], t[3]}});
            }
            eff["pairs"] = o.pairs;
            eff["cohort"] = cohort_json(s_.cohort);
            csv << header(eff)
                << "\nfirst_start,first_end,second_start,second_end,top_questions,persisting_questions,"
                   "question_overlap,top_tags,persisting_tags,tag_overlap\n";
            for (const auto& r : persistence_overlap(store, pairs, s_.cohort)) {
                csv << r.first.start.iso() << ',' << r.first.end.iso() << ',' << r.second.start.iso() << ','
                    << r.second.end.iso() << ',' << r.top_questions << ',' << r.persisting_questions << ','
                    << num(r.question_overlap) << ',' << r.top_tags << ',' << r.persisting_tags << ','
                    << num(r.tag_overlap) << '\n';
            }
        } else {
            need(o.dataset, "--dataset");
            const auto ds = load_dataset(o.dataset);
            eff["dataset"] = dataset_sidecar_json(ds);
            if (o.which == "growth-hist") {
                const auto edges = o.grid.empty() ? default_growth_edges() : parse_grid(o.grid);
                const auto h = views_growth_histogram(ds, edges);
                eff["edges"] = edges;
                csv << header(eff) << "\nlower,upper,count\n";
                csv << "-inf," << num(h.edges.front()) << ',' << h.below << '\n';
                for (std::size_t i = 0; i < h.counts.size(); ++i) {
                    csv << num(h.edges[i]) << ',' << num(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
                }
                csv << num(h.edges.back()) << ",inf," << h.above << '\n';
            } else if (o.which == "closed") {
                const auto c = closed_comparison(store, ds, ds.t_current);
                csv << header(eff) << "\n# dataset_questions=" << c.dataset_questions
                    << " dataset_closed=" << c.dataset_closed << " closed_fraction=" << num(c.closed_fraction)
                    << " store_closed=" << c.store_closed << "\ngroup,indicator,count,min,q1,median,q3,max,mean\n";
                for (const auto* group : {"closed", "dataset"}) {
                    const Summary* s = std::string(group) == "closed" ? c.closed : c.dataset;
                    for (int i = 0; i < 4; ++i) {
                        csv << group << ',' << ClosedComparison::kIndicators[i] << ',' << s[i].count << ','
                            << num(s[i].min) << ',' << num(s[i].q1) << ',' << num(s[i].median) << ','
                            << num(s[i].q3) << ',' << num(s[i].max) << ',' << num(s[i].mean) << '\n';
                    }
                }
            } else {  // predictiveness
                FeatureSelection sel = FeatureSelection::all();
                sel.text.clear();
                const auto m = build_feature_matrix(store, ds, sel, nullptr);
                csv << header(eff) << '\n';
                const auto rows = stats::predictiveness_report(m, ds);
                stats::write_report_csv(rows, csv);
            }
        }
        write_output(o.out, csv.str(), out_);
        return kExitOk;
    }

    static std::vector<double> default_concentration_grid() {
        return {0.01, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    }

    // --- experiment -----------------------------------------------------

    void add_experiment(CLI::App& app) {
        auto* c = app.add_subcommand("experiment", "Run a feature-set experiment plan");
        auto* o = &exp_;
        c->add_option("--plan", o->plan, "plan JSON")->required()->check(CLI::ExistingFile);
        c->add_option("--out", o->out, "report directory")->required();
        c->add_option("--store", o->store, "use this store for every dataset of the plan");
        o->seed = Opt{c->add_option("--seed", o->seed_v, "split seed")};
        o->runs = Opt{c->add_option("--runs", o->runs_v, "runs per dataset and feature set")};
        c->add_option("--feature-sets", o->sets, "comma-separated feature sets (default: plan)");
        c->callback([this] { action_ = [this] { return experiment(); }; });
    }

    int experiment() {
        const auto& o = exp_;
        auto plan = evaluate::plan_from_json(read_text(o.plan), fs::path(o.plan).parent_path());
        if (!o.store.empty()) {
            for (auto& d : plan.datasets) d.store = o.store;
        } else if (!s_.store.empty()) {
            for (auto& d : plan.datasets) {
                if (d.store.empty()) d.store = s_.store;
            }
        }
        if (o.seed.given()) plan.seed = o.seed_v;
        if (o.runs.given()) plan.n_runs = o.runs_v;
        if (!o.sets.empty()) plan.feature_sets = split_list(o.sets);
        if (jobs_.given() || !s_.config_path.empty()) plan.jobs = s_.jobs;
        plan.validate();
        // Stores are machine-specific; the hash covers what determines results.
        auto canon = json::parse(evaluate::plan_to_json(plan));
        canon.erase("jobs");
        for (auto& d : canon["datasets"]) d.erase("store");
        const auto report = evaluate::run_experiment(plan);
        evaluate::write_report(report, o.out, header(json{{"command", "experiment"}, {"plan", canon}}));
        out_ << "feature_set,gap_months,datasets,f1_min,f1_max,f1_avg,acc_min,acc_max,acc_avg\n";
        for (const auto& a : report.table) {
            out_ << a.feature_set << ',' << a.gap_months << ',' << a.n_datasets << ',' << num(a.f1_min) << ','
                 << num(a.f1_max) << ',' << num(a.f1_avg) << ',' << num(a.acc_min) << ',' << num(a.acc_max) << ','
                 << num(a.acc_avg) << '\n';
        }
        log::info("cli", "experiment finished", {{"cells", static_cast<std::int64_t>(report.cells.size())}});
        return kExitOk;
    }

    // --- synth ----------------------------------------------------------

    void add_synth(CLI::App& app) {
        auto* c = app.add_subcommand("synth", "Generate a synthetic dump series with planted labels");
        auto* o = &synth_;
        c->add_option("--synth-config", o->config, "generator JSON")->check(CLI::ExistingFile);
        c->add_option("--out", o->out, "directory for dump XML and manifest.json")->required();
        c->add_option("--store", o->store, "also ingest every generated dump into this store");
        o->seed = Opt{c->add_option("--seed", o->seed_v, "generator seed")};
        o->questions = Opt{c->add_option("--questions", o->questions_v, "number of questions")};
        o->signal = Opt{c->add_option("--signal", o->signal_v, "signal strength in [0,1]")};
        c->callback([this] { action_ = [this] { return synth(); }; });
    }

    int synth() {
        const auto& o = synth_;
        synth::SynthConfig cfg = o.config.empty() ? synth::SynthConfig{} : synth::config_from_json(read_text(o.config));
        if (o.seed.given()) cfg.seed = o.seed_v;
        if (o.questions.given()) cfg.n_questions = o.questions_v;
        if (o.signal.given()) cfg.signal_strength = o.signal_v;
        cfg.validate();
        const auto corpus = synth::generate(cfg, o.out);
        out_ << "dump_time,questions,answers,users,tags\n";
        for (const auto& d : corpus.dumps) {
            out_ << d.dump_time.iso() << ',' << d.questions.size() << ',' << d.answers.size() << ','
                 << d.users.size() << ',' << d.tags.size() << '\n';
        }
        if (!o.store.empty()) {
            auto store = SnapshotStore::open(o.store, true);
            for (const auto& d : corpus.dumps) {
                const auto dir = synth::dump_directory(o.out, d.dump_time);
                ingest_files({dir / "Posts.xml", dir / "Users.xml", dir / "Tags.xml"}, d.dump_time, store);
            }
        }
        return kExitOk;
    }

    std::ostream& out_;
    std::ostream& err_;
    Settings s_;
    std::string flag_log_level_;
    unsigned flag_jobs_ = 1;
    Opt level_, jobs_;
    std::function<int()> action_;

    struct {
        std::string posts, users, tags, dir, time, store;
        bool no_text = false, strict = false;
    } ingest_;
    struct {
        std::string store, triple, out, name;
        int gap = 6;
        Opt fraction, threshold, tolerance;
        double fraction_v = 0, threshold_v = 0, tolerance_v = 0;
    } build_;
    struct {
        std::string store, which, dumps, window, period, grid, dataset, out;
        std::vector<std::string> pairs;
    } analyze_;
    struct {
        std::string plan, out, store, sets;
        Opt seed, runs;
        std::uint64_t seed_v = 0;
        int runs_v = 0;
    } exp_;
    struct {
        std::string config, out, store;
        Opt seed, questions, signal;
        std::uint64_t seed_v = 0;
        std::size_t questions_v = 0;
        double signal_v = 0;
    } synth_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        Commands c(out, err);
        return c.run(args);
    } catch (const std::exception& e) {
        err << "forgetq: internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace forgetq::cli
