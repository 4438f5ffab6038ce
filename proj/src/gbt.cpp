#include "forgetq/gbt.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "forgetq/errors.hpp"

namespace forgetq::gbt {

void BoostConfig::validate() const {
    if (n_rounds < 1) throw ConfigError("n_rounds must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must be in (0, 1]");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (histogram_bins < 2 || histogram_bins > 65000) throw ConfigError("histogram_bins must be in [2, 65000]");
    if (!(l2_leaf_regularization >= 0.0)) throw ConfigError("l2_leaf_regularization must be >= 0");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace

double logistic_loss(double score, int label) { return label ? softplus(-score) : softplus(score); }

std::pair<double, double> logistic_grad_hess(double score, int label) {
    const double p = sigmoid(score);
    return {p - label, p * (1.0 - p)};
}

ColumnData ColumnData::from(const FeatureMatrix& m) {
    ColumnData d;
    d.rows = m.rows();
    d.cols = m.cols();
    d.values = m.column_major();
    d.names.reserve(d.cols);
    for (const auto& f : m.schema.features) d.names.push_back(f.name);
    return d;
}

double RegressionTree::predict(const ColumnData& x, std::size_t row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const Node& n = nodes[i];
        const double v = x.at(row, static_cast<std::size_t>(n.feature));
        const bool left = std::isnan(v) ? n.default_left : v <= n.threshold;
        i = static_cast<std::size_t>(left ? n.left : n.right);
    }
    return nodes[i].value;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

namespace {

// Cut strictly between a and b so that a goes left and b goes right.
double cut_between(double a, double b) {
    double m = a + (b - a) / 2;
    if (!std::isfinite(m)) m = a / 2 + b / 2;
    if (!(m < b)) m = a;
    return m;
}

}  // namespace

std::vector<double> bin_cuts(std::span<const double> column, int max_bins) {
    std::vector<double> v;
    v.reserve(column.size());
    for (const double x : column) {
        if (!std::isnan(x)) v.push_back(x);
    }
    std::sort(v.begin(), v.end());
    std::vector<double> distinct;
    std::vector<std::size_t> cum;  // rows <= distinct[i]
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (distinct.empty() || v[i] != distinct.back()) {
            distinct.push_back(v[i]);
            cum.push_back(0);
        }
        cum.back() = i + 1;
    }
    std::vector<double> cuts;
    if (distinct.size() <= 1) return cuts;
    if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) cuts.push_back(cut_between(distinct[i], distinct[i + 1]));
        return cuts;
    }
    // Equal-frequency: boundary k sits after the first distinct value whose
    // cumulative count reaches k * n / max_bins.
    const double n = static_cast<double>(v.size());
    int k = 1;
    for (std::size_t i = 0; i + 1 < distinct.size() && k < max_bins; ++i) {
        if (static_cast<double>(cum[i]) >= k * n / max_bins) {
            cuts.push_back(cut_between(distinct[i], distinct[i + 1]));
            while (k < max_bins && static_cast<double>(cum[i]) >= k * n / max_bins) ++k;
        }
    }
    return cuts;
}

namespace {

template <typename Fn>
void parallel_ranges(std::size_t n, unsigned jobs, std::size_t work, Fn&& fn) {
    if (jobs <= 1 || n < 2 || work < (1u << 15)) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t parts = std::min<std::size_t>(jobs, n);
    std::vector<std::thread> pool;
    for (std::size_t p = 0; p < parts; ++p) {
        pool.emplace_back([&, p] { fn(n * p / parts, n * (p + 1) / parts); });
    }
    for (auto& t : pool) t.join();
}

struct Binned {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::vector<double>> cuts;
    std::vector<std::size_t> offset;  // histogram offset per feature; feature f has cuts+2 slots, last = missing
    std::size_t total = 0;
    std::vector<std::uint16_t> bins;  // column-major

    [[nodiscard]] std::size_t slots(std::size_t f) const { return cuts[f].size() + 2; }
    [[nodiscard]] std::uint16_t missing_bin(std::size_t f) const {
        return static_cast<std::uint16_t>(cuts[f].size() + 1);
    }
};

Binned bin_data(const ColumnData& x, const BoostConfig& cfg) {
    Binned b;
    b.rows = x.rows;
    b.cols = x.cols;
    b.cuts.resize(x.cols);
    b.bins.resize(x.rows * x.cols);
    parallel_ranges(x.cols, cfg.jobs, x.rows * x.cols * 8, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t f = lo; f < hi; ++f) {
            const std::span<const double> col(x.values.data() + f * x.rows, x.rows);
            auto& cuts = b.cuts[f] = bin_cuts(col, cfg.histogram_bins);
            const auto miss = static_cast<std::uint16_t>(cuts.size() + 1);
            for (std::size_t r = 0; r < x.rows; ++r) {
                const double v = col[r];
                b.bins[f * x.rows + r] =
                    std::isnan(v) ? miss
                                  : static_cast<std::uint16_t>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
            }
        }
    });
    b.offset.resize(x.cols);
    for (std::size_t f = 0; f < x.cols; ++f) {
        b.offset[f] = b.total;
        b.total += b.slots(f);
    }
    return b;
}

struct Hist {
    std::vector<double> g, h;
    std::vector<std::uint32_t> c;
};

// Gains this close count as ties and keep the earlier candidate, so the choice
// does not depend on summation order.
bool beats(double gain, double best) { return gain > best + 1e-10 * std::max(best, 1e-12); }

struct Split {
    double gain = 0.0;
    std::int32_t feature = -1;
    std::uint16_t bin = 0;  // left = bins <= this (non-missing)
    bool default_left = false;
    double gl = 0, hl = 0;
    std::uint32_t cl = 0;
};

class Grower {
public:
    Grower(const Binned& data, const std::vector<double>& g, const std::vector<double>& h, const BoostConfig& cfg,
           std::vector<double>& importance)
        : d_(data), g_(g), h_(h), cfg_(cfg), importance_(importance) {}

    RegressionTree grow(std::vector<std::uint32_t> rows) {
        rows_ = std::move(rows);
        tree_ = {};
        bin_threshold_.clear();
        Hist root = acquire();
        build(0, rows_.size(), root);
        double G = 0, H = 0;
        for (const auto r : rows_) {
            G += g_[r];
            H += h_[r];
        }
        grow_node(0, rows_.size(), std::move(root), G, H, 0);
        return std::move(tree_);
    }

    // Walks the tree on binned training rows.
    [[nodiscard]] double predict_binned(std::size_t row) const {
        std::size_t i = 0;
        while (!tree_view_->nodes[i].is_leaf()) {
            const Node& n = tree_view_->nodes[i];
            const auto f = static_cast<std::size_t>(n.feature);
            const std::uint16_t b = d_.bins[f * d_.rows + row];
            const bool left = b == d_.missing_bin(f) ? n.default_left : b <= bin_threshold_[i];
            i = static_cast<std::size_t>(left ? n.left : n.right);
        }
        return tree_view_->nodes[i].value;
    }
    void attach(const RegressionTree& t) { tree_view_ = &t; }

private:
    Hist acquire() {
        Hist hist;
        if (!pool_.empty()) {
            hist = std::move(pool_.back());
            pool_.pop_back();
        }
        hist.g.assign(d_.total, 0.0);
        hist.h.assign(d_.total, 0.0);
        hist.c.assign(d_.total, 0);
        return hist;
    }

    void build(std::size_t begin, std::size_t end, Hist& hist) const {
        const std::size_t n = end - begin;
        parallel_ranges(d_.cols, cfg_.jobs, n * d_.cols, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t f = lo; f < hi; ++f) {
                const std::uint16_t* col = d_.bins.data() + f * d_.rows;
                double* hg = hist.g.data() + d_.offset[f];
                double* hh = hist.h.data() + d_.offset[f];
                std::uint32_t* hc = hist.c.data() + d_.offset[f];
                for (std::size_t i = begin; i < end; ++i) {
                    const auto r = rows_[i];
                    const auto b = col[r];
                    hg[b] += g_[r];
                    hh[b] += h_[r];
                    ++hc[b];
                }
            }
        });
    }

    [[nodiscard]] double score(double G, double H) const {
        const double denom = H + cfg_.l2_leaf_regularization;
        return denom > 0 ? G * G / denom : 0.0;
    }

    [[nodiscard]] Split best_split(const Hist& hist, double G, double H, std::uint32_t C) const {
        const double parent = score(G, H);
        const auto min_leaf = static_cast<std::uint32_t>(cfg_.min_samples_leaf);
        std::vector<Split> per_feature(d_.cols);
        parallel_ranges(d_.cols, cfg_.jobs, d_.total * 4, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t f = lo; f < hi; ++f) {
                const std::size_t o = d_.offset[f];
                const std::size_t miss = o + d_.missing_bin(f);
                const double gm = hist.g[miss], hm = hist.h[miss];
                const std::uint32_t cm = hist.c[miss];
                const std::size_t nb = d_.cuts[f].size() + 1;
                Split best;
                double gl = 0, hl = 0;
                std::uint32_t cl = 0;
                auto consider = [&](double lg, double lh, std::uint32_t lc, std::size_t b, bool dleft) {
                    const std::uint32_t rc = C - lc;
                    if (lc < min_leaf || rc < min_leaf) return;
                    const double gain = 0.5 * (score(lg, lh) + score(G - lg, H - lh) - parent);
                    if (beats(gain, best.gain)) {
                        best = {gain, static_cast<std::int32_t>(f), static_cast<std::uint16_t>(b), dleft, lg, lh, lc};
                    }
                };
                for (std::size_t b = 0; b < nb; ++b) {
                    gl += hist.g[o + b];
                    hl += hist.h[o + b];
                    cl += hist.c[o + b];
                    // A missing-only left side mirrors the final split below.
                    if (cl == 0) continue;
                    if (b + 1 == nb) {
                        // Non-missing left, missing right.
                        if (cm > 0) consider(gl, hl, cl, b, false);
                        break;
                    }
                    consider(gl, hl, cl, b, false);
                    if (cm > 0) consider(gl + gm, hl + hm, cl + cm, b, true);
                }
                per_feature[f] = best;
            }
        });
        Split best;
        for (const auto& s : per_feature) {
            if (s.feature >= 0 && beats(s.gain, best.gain)) best = s;
        }
        return best;
    }

    std::int32_t grow_node(std::size_t begin, std::size_t end, Hist hist, double G, double H, int depth) {
        const auto index = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        bin_threshold_.push_back(0);
        const auto C = static_cast<std::uint32_t>(end - begin);
        Split s;
        if (depth < cfg_.max_depth && C >= 2u * static_cast<std::uint32_t>(cfg_.min_samples_leaf)) {
            s = best_split(hist, G, H, C);
        }
        if (s.feature < 0) {
            const double denom = H + cfg_.l2_leaf_regularization;
            tree_.nodes[index].value = denom > 0 ? -G / denom * cfg_.learning_rate : 0.0;
            pool_.push_back(std::move(hist));
            return index;
        }
        const auto f = static_cast<std::size_t>(s.feature);
        const std::uint16_t miss = d_.missing_bin(f);
        const std::uint16_t* col = d_.bins.data() + f * d_.rows;
        auto goes_left = [&](std::uint32_t r) { return col[r] == miss ? s.default_left : col[r] <= s.bin; };
        const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  rows_.begin() + static_cast<std::ptrdiff_t>(end), goes_left);
        const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

        Node& node = tree_.nodes[index];
        node.feature = s.feature;
        node.threshold = s.bin < d_.cuts[f].size() ? d_.cuts[f][s.bin] : std::numeric_limits<double>::infinity();
        // With no missing values seen here, send unseen ones to the larger side.
        const bool had_missing = hist.c[d_.offset[f] + miss] > 0;
        node.default_left = had_missing ? s.default_left : (mid - begin) >= (end - mid);
        node.gain = s.gain;
        bin_threshold_[static_cast<std::size_t>(index)] = s.bin;
        importance_[f] += s.gain;

        // Build the smaller child directly, derive the larger by subtraction.
        const bool left_smaller = (mid - begin) <= (end - mid);
        Hist small = acquire();
        if (left_smaller) {
            build(begin, mid, small);
        } else {
            build(mid, end, small);
        }
        for (std::size_t i = 0; i < d_.total; ++i) {
            hist.g[i] -= small.g[i];
            hist.h[i] -= small.h[i];
            hist.c[i] -= small.c[i];
        }
        Hist& left_hist = left_smaller ? small : hist;
        Hist& right_hist = left_smaller ? hist : small;
        const double gl = s.gl, hl = s.hl;
        const std::int32_t l = grow_node(begin, mid, std::move(left_hist), gl, hl, depth + 1);
        const std::int32_t r = grow_node(mid, end, std::move(right_hist), G - gl, H - hl, depth + 1);
        tree_.nodes[index].left = l;
        tree_.nodes[index].right = r;
        return index;
    }

    const Binned& d_;
    const std::vector<double>& g_;
    const std::vector<double>& h_;
    const BoostConfig& cfg_;
    std::vector<double>& importance_;
    std::vector<std::uint32_t> rows_;
    RegressionTree tree_;
    const RegressionTree* tree_view_ = nullptr;
    std::vector<std::uint16_t> bin_threshold_;  // per node, valid while the last tree is attached
    std::vector<Hist> pool_;
};

}  // namespace

BoostedEnsemble fit(const ColumnData& x, std::span<const int> labels, const BoostConfig& config) {
    config.validate();
    if (labels.size() != x.rows) throw DataError("label count does not match matrix rows");
    if (x.values.size() != x.rows * x.cols) throw DataError("matrix values do not match its shape");
    if (x.rows > std::numeric_limits<std::uint32_t>::max()) throw DataError("too many rows");
    std::size_t positives = 0;
    for (const int y : labels) {
        if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
        positives += static_cast<std::size_t>(y);
    }
    if (positives == 0 || positives == x.rows) throw DataError("training labels contain a single class");

    BoostedEnsemble model;
    model.config = config;
    model.feature_names = x.names;
    if (model.feature_names.empty()) {
        for (std::size_t c = 0; c < x.cols; ++c) model.feature_names.push_back("f" + std::to_string(c));
    }
    if (model.feature_names.size() != x.cols) throw DataError("feature name count does not match columns");
    const double prevalence = static_cast<double>(positives) / static_cast<double>(x.rows);
    model.base_score = std::log(prevalence / (1.0 - prevalence));
    model.importance.assign(x.cols, 0.0);

    const Binned data = bin_data(x, config);
    const std::size_t n = x.rows;
    std::vector<double> F(n, model.base_score), g(n), h(n);
    Grower grower(data, g, h, config, model.importance);
    std::mt19937_64 rng(config.seed);
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    const auto sample_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(n))));

    model.trees.reserve(static_cast<std::size_t>(config.n_rounds));
    for (int m = 0; m < config.n_rounds; ++m) {
        for (std::size_t i = 0; i < n; ++i) std::tie(g[i], h[i]) = logistic_grad_hess(F[i], labels[i]);
        std::vector<std::uint32_t> rows = all;
        if (sample_size < n) {
            std::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(sample_size);
            std::sort(rows.begin(), rows.end());
        }
        model.trees.push_back(grower.grow(std::move(rows)));
        grower.attach(model.trees.back());
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            F[i] += grower.predict_binned(i);
            loss += logistic_loss(F[i], labels[i]);
        }
        model.loss_trajectory.push_back(loss / static_cast<double>(n));
    }
    return model;
}

BoostedEnsemble fit(const FeatureMatrix& m, std::span<const int> labels, const BoostConfig& config) {
    return fit(ColumnData::from(m), labels, config);
}

std::vector<double> predict_raw(const BoostedEnsemble& model, const ColumnData& x) {
    if (x.cols != model.feature_names.size()) throw DataError("matrix columns do not match the model");
    if (!x.names.empty() && x.names != model.feature_names) throw DataError("matrix features do not match the model");
    std::vector<double> out(x.rows, model.base_score);
    for (const auto& tree : model.trees) {
        for (std::size_t r = 0; r < x.rows; ++r) out[r] += tree.predict(x, r);
    }
    return out;
}

std::vector<double> predict_proba(const BoostedEnsemble& model, const ColumnData& x) {
    auto out = predict_raw(model, x);
    for (double& v : out) v = sigmoid(v);
    return out;
}

std::vector<double> predict_proba(const BoostedEnsemble& model, const FeatureMatrix& m) {
    return predict_proba(model, ColumnData::from(m));
}

std::vector<std::pair<std::string, double>> feature_importance(const BoostedEnsemble& model) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(model.feature_names.size());
    for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
        out.emplace_back(model.feature_names[i], i < model.importance.size() ? model.importance[i] : 0.0);
    }
    return out;
}

// Binary model file, little-endian:
//   magic "FQGBT001", u32 version, config, base score, names, importance,
//   loss trajectory, trees, trailing crc32 of everything before it.
namespace {

constexpr char kModelMagic[8] = {'F', 'Q', 'G', 'B', 'T', '0', '0', '1'};
constexpr std::uint32_t kModelVersion = 1;

class Writer {
public:
    template <typename T>
    void pod(T v) {
        buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        buf_.append(s);
    }
    void doubles(const std::vector<double>& v) {
        pod<std::uint64_t>(v.size());
        buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    std::string& bytes() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, std::string where) : data_(data), where_(std::move(where)) {}
    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::uint64_t count(std::uint64_t elem_bytes) {
        const auto n = pod<std::uint64_t>();
        if (elem_bytes > 0 && n > (data_.size() - pos_) / elem_bytes) fail();
        return n;
    }
    std::string str() {
        const auto n = count(1);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::vector<double> doubles() {
        const auto n = count(sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }
    [[nodiscard]] bool done() const { return pos_ == data_.size(); }
    [[noreturn]] void fail() const { throw DataError("corrupt model file " + where_); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) fail();
    }
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string where_;
};

std::uint32_t crc_of(std::string_view s) {
    return static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

}  // namespace

void BoostedEnsemble::save(const std::filesystem::path& path) const {
    Writer w;
    w.bytes().append(kModelMagic, sizeof kModelMagic);
    w.pod(kModelVersion);
    w.pod<std::int32_t>(config.n_rounds);
    w.pod(config.learning_rate);
    w.pod<std::int32_t>(config.max_depth);
    w.pod<std::int32_t>(config.min_samples_leaf);
    w.pod<std::int32_t>(config.histogram_bins);
    w.pod(config.l2_leaf_regularization);
    w.pod(config.subsample);
    w.pod(config.seed);
    w.pod<std::uint32_t>(config.jobs);
    w.pod(base_score);
    w.pod<std::uint64_t>(feature_names.size());
    for (const auto& name : feature_names) w.str(name);
    w.doubles(importance);
    w.doubles(loss_trajectory);
    w.pod<std::uint64_t>(trees.size());
    for (const auto& t : trees) {
        w.pod<std::uint64_t>(t.nodes.size());
        for (const auto& n : t.nodes) {
            w.pod(n.feature);
            w.pod(n.threshold);
            w.pod<std::uint8_t>(n.default_left ? 1 : 0);
            w.pod(n.left);
            w.pod(n.right);
            w.pod(n.value);
            w.pod(n.gain);
        }
    }
    w.pod(crc_of(w.bytes()));
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out.flush()) throw DataError("cannot write model file " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

BoostedEnsemble BoostedEnsemble::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string raw = ss.str();
    if (raw.size() < sizeof kModelMagic + 8 || std::memcmp(raw.data(), kModelMagic, sizeof kModelMagic) != 0) {
        throw DataError("not a model file: " + path.string());
    }
    const std::string_view body(raw.data(), raw.size() - 4);
    std::uint32_t stored = 0;
    std::memcpy(&stored, raw.data() + body.size(), 4);
    if (stored != crc_of(body)) throw DataError("model file checksum mismatch: " + path.string());

    Reader r(body.substr(sizeof kModelMagic), path.string());
    if (r.pod<std::uint32_t>() != kModelVersion) throw DataError("unsupported model version in " + path.string());
    BoostedEnsemble m;
    m.config.n_rounds = r.pod<std::int32_t>();
    m.config.learning_rate = r.pod<double>();
    m.config.max_depth = r.pod<std::int32_t>();
    m.config.min_samples_leaf = r.pod<std::int32_t>();
    m.config.histogram_bins = r.pod<std::int32_t>();
    m.config.l2_leaf_regularization = r.pod<double>();
    m.config.subsample = r.pod<double>();
    m.config.seed = r.pod<std::uint64_t>();
    m.config.jobs = r.pod<std::uint32_t>();
    m.base_score = r.pod<double>();
    const auto n_names = r.count(8);
    for (std::uint64_t i = 0; i < n_names; ++i) m.feature_names.push_back(r.str());
    m.importance = r.doubles();
    m.loss_trajectory = r.doubles();
    const auto n_trees = r.count(8);
    m.trees.resize(n_trees);
    for (auto& t : m.trees) {
        const auto n_nodes = r.count(37);
        t.nodes.resize(n_nodes);
        for (auto& n : t.nodes) {
            n.feature = r.pod<std::int32_t>();
            n.threshold = r.pod<double>();
            n.default_left = r.pod<std::uint8_t>() != 0;
            n.left = r.pod<std::int32_t>();
            n.right = r.pod<std::int32_t>();
            n.value = r.pod<double>();
            n.gain = r.pod<double>();
        }
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            const Node& n = t.nodes[i];
            if (n.is_leaf()) continue;
            // Children always follow their parent, which also rules out cycles.
            const auto self = static_cast<std::int64_t>(i);
            if (n.left <= self || n.right <= self || static_cast<std::uint64_t>(n.left) >= n_nodes ||
                static_cast<std::uint64_t>(n.right) >= n_nodes ||
                static_cast<std::uint64_t>(n.feature) >= n_names) {
                r.fail();
            }
        }
        if (t.nodes.empty()) r.fail();
    }
    if (!r.done()) r.fail();
    return m;
}

}  // namespace forgetq::gbt
