#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forgetq/records.hpp"
#include "forgetq/timestamp.hpp"

namespace forgetq::synth {

struct SynthConfig {
    std::size_t n_questions = 5000;
    std::size_t n_users = 1000;
    std::size_t n_tags = 40;
    /// Default: three dumps six months apart.
    std::vector<Timestamp> dump_times{Timestamp::from_civil(2018, 1, 1), Timestamp::from_civil(2018, 7, 2),
                                      Timestamp::from_civil(2019, 1, 1)};
    double history_months = 24.0;  // questions are created from first dump minus this

    // View model: Zipf base popularity, negative-binomial period noise.
    double zipf_exponent = 1.0;
    double view_scale = 3000.0;  // mean monthly views of the most popular question
    double nb_dispersion = 4.0;
    double trend_up = 1.5;     // log-rate slope over the timeline, up-trending tags
    double trend_down = -1.5;  // same, down-trending tags
    double down_tag_fraction = 0.5;

    // Label mechanism after each prediction dump. With probability
    // signal_strength a question follows its tag trend (down = views drop);
    // otherwise it drops with null_forgotten_rate, shifted by low_view_bias
    // towards the less viewed part of the highly viewed set.
    double signal_strength = 1.0;
    double null_forgotten_rate = 0.5;
    double low_view_bias = 0.0;
    double highly_viewed_fraction = 0.15;

    /// Every question gains exactly uniform_period_views per period.
    bool uniform_views = false;
    std::int64_t uniform_period_views = 100;

    // Answers.
    double mean_answers = 2.0;
    double answer_latency_minutes = 180.0;
    double accept_probability = 0.5;
    double closed_probability = 0.03;

    // Text.
    std::size_t vocabulary = 300;
    std::size_t body_words = 40;
    std::size_t title_words = 8;
    double tag_term_bias = 0.3;  // share of words drawn from the question's tag terms

    std::uint64_t seed = 1;

    void validate() const;  // ConfigError
};

SynthConfig config_from_json(const std::string& text);
std::string config_to_json(const SynthConfig& config);

struct PlantedLabel {
    std::int64_t question_id = 0;
    bool forgotten = false;  // views in the next period were drawn below the current period
    std::int64_t current_views = 0;
    std::int64_t future_views = 0;
    bool operator==(const PlantedLabel&) const = default;
};

struct TripleTruth {
    Timestamp t_last;
    Timestamp t_current;
    Timestamp t_next;
    std::vector<PlantedLabel> labels;  // every question present at t_current, ascending id
};

struct TagTruth {
    std::string name;
    bool down = false;
    double trend = 0.0;
};

struct SynthCorpus {
    SynthConfig config;
    std::vector<DumpSnapshot> dumps;  // one per dump time, records in id order
    std::vector<TagTruth> tags;
    std::vector<TripleTruth> triples;  // consecutive dump triples

    /// Documented sidecar: config, tags with trend class, planted labels per triple.
    [[nodiscard]] std::string manifest_json() const;
};

/// Builds the corpus in memory. All randomness comes from one generator seeded with config.seed.
SynthCorpus generate_corpus(const SynthConfig& config);

/// Writes <dir>/<dump compact time>/{Posts,Users,Tags}.xml per dump and
/// <dir>/manifest.json. Returns the corpus.
SynthCorpus generate(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Dump-format XML of one snapshot, matching what dump_ingest reads.
void write_posts_xml(const DumpSnapshot& dump, std::ostream& out);
void write_users_xml(const DumpSnapshot& dump, std::ostream& out);
void write_tags_xml(const DumpSnapshot& dump, std::ostream& out);
std::filesystem::path dump_directory(const std::filesystem::path& out_dir, Timestamp dump_time);

/// Streams a Posts file of `rows` simple question/answer rows without holding
/// them in memory (for ingest scale checks). Returns bytes written.
std::uint64_t write_bulk_posts(const std::filesystem::path& path, std::uint64_t rows, std::uint64_t seed);

}  // namespace forgetq::synth
