#include "forgetq/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "forgetq/errors.hpp"

namespace forgetq::stats {

namespace {

struct Pooled {
    std::vector<double> ranks;  // first n_a belong to sample a
    double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

Pooled pool(std::span<const double> a, std::span<const double> b) {
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    Pooled p;
    p.ranks = mid_ranks(all);
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        p.tie_term += t * t * t - t;
        i = j;
    }
    return p;
}

void check_samples(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney needs two non-empty samples");
    for (const double v : a) {
        if (std::isnan(v)) throw std::invalid_argument("mann_whitney sample contains NaN");
    }
    for (const double v : b) {
        if (std::isnan(v)) throw std::invalid_argument("mann_whitney sample contains NaN");
    }
}

double u_of(const Pooled& p, std::size_t n_a) {
    const double r = std::accumulate(p.ranks.begin(), p.ranks.begin() + static_cast<std::ptrdiff_t>(n_a), 0.0);
    return r - static_cast<double>(n_a) * static_cast<double>(n_a + 1) / 2.0;
}

bool all_identical(std::span<const double> a, std::span<const double> b) {
    const double v = a.front();
    return std::all_of(a.begin(), a.end(), [&](double x) { return x == v; }) &&
           std::all_of(b.begin(), b.end(), [&](double x) { return x == v; });
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<double> mid_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
        i = j;
    }
    return ranks;
}

MannWhitney mann_whitney_exact(std::span<const double> a, std::span<const double> b) {
    check_samples(a, b);
    const std::size_t na = a.size(), n = a.size() + b.size();
    const Pooled p = pool(a, b);
    MannWhitney out;
    out.exact = true;
    out.u = u_of(p, na);
    if (all_identical(a, b)) {
        out.p = 1.0;
        return out;
    }
    // Doubled mid-ranks are integers. count[k][s]: subsets of size k with doubled rank sum s.
    std::vector<std::int64_t> r2(n);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r2[i] = std::llround(2.0 * p.ranks[i]);
        total += r2[i];
    }
    std::vector<std::vector<double>> count(na + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    count[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = std::min(i + 1, na); k >= 1; --k) {
            auto& dst = count[k];
            const auto& src = count[k - 1];
            for (std::int64_t s = total; s >= r2[i]; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - r2[i])];
        }
    }
    // Two-sided: |2U - na*nb| at least the observed distance; doubled U = S - na(na+1).
    const std::int64_t offset = static_cast<std::int64_t>(na * (na + 1));
    const std::int64_t center = static_cast<std::int64_t>(na * (n - na));
    const std::int64_t observed_s = std::llround(2.0 * (out.u + static_cast<double>(na * (na + 1)) / 2.0));
    const std::int64_t observed = std::llabs(observed_s - offset - center);
    double extreme = 0.0, all = 0.0;
    for (std::int64_t s = 0; s <= total; ++s) {
        const double c = count[na][static_cast<std::size_t>(s)];
        if (c == 0.0) continue;
        all += c;
        if (std::llabs(s - offset - center) >= observed) extreme += c;
    }
    out.p = std::min(1.0, extreme / all);
    return out;
}

MannWhitney mann_whitney_normal(std::span<const double> a, std::span<const double> b) {
    check_samples(a, b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), n = na + nb;
    const Pooled p = pool(a, b);
    MannWhitney out;
    out.u = u_of(p, a.size());
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - p.tie_term / (n * (n - 1.0)));
    if (all_identical(a, b) || !(var > 0.0)) {
        out.p = 1.0;
        return out;
    }
    const double z = std::max(0.0, std::abs(out.u - mu) - 0.5) / std::sqrt(var);
    out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b) {
    check_samples(a, b);
    if (a.size() * b.size() <= kExactLimit) return mann_whitney_exact(a, b);
    return mann_whitney_normal(a, b);
}

Spearman spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs equal lengths >= 2");
    const auto rx = mid_ranks(x), ry = mid_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    Spearman s;
    if (sxx == 0.0 || syy == 0.0) {
        s.degenerate = true;
        return s;
    }
    s.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    return s;
}

double rank_auc(std::span<const double> values, std::span<const int> labels) {
    if (values.size() != labels.size()) throw std::invalid_argument("rank_auc: length mismatch");
    const auto r = mid_ranks(values);
    double rank_sum = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (labels[i]) {
            rank_sum += r[i];
            ++pos;
        }
    }
    const std::size_t neg = values.size() - pos;
    if (pos == 0 || neg == 0) throw std::invalid_argument("rank_auc needs both classes");
    const double u = rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double single_feature_auc(std::span<const double> values, std::span<const int> labels) {
    const double auc = rank_auc(values, labels);
    return std::max(auc, 1.0 - auc);
}

std::vector<FeatureReportRow> predictiveness_report(const FeatureMatrix& matrix, std::span<const int> labels) {
    if (labels.size() != matrix.rows()) throw std::invalid_argument("labels do not match matrix rows");
    std::vector<FeatureReportRow> rows;
    std::vector<double> values, pos, neg;
    std::vector<int> lab;
    for (std::size_t c = 0; c < matrix.n_dense; ++c) {
        FeatureReportRow row;
        row.feature = matrix.schema.features[c].name;
        row.group = matrix.schema.features[c].group;
        values.clear();
        pos.clear();
        neg.clear();
        lab.clear();
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            const double v = matrix.dense[r * matrix.n_dense + c];
            if (std::isnan(v)) {
                ++row.missing;
                continue;
            }
            values.push_back(v);
            lab.push_back(labels[r]);
            (labels[r] ? pos : neg).push_back(v);
        }
        row.n_forgotten = pos.size();
        row.n_unforgotten = neg.size();
        if (pos.empty() || neg.empty()) {
            row.degenerate = true;
        } else {
            const auto mw = mann_whitney(pos, neg);
            row.u = mw.u;
            row.p = mw.p;
            const auto sp = spearman(values, std::vector<double>(lab.begin(), lab.end()));
            row.rho = sp.rho;
            row.degenerate = sp.degenerate;
            row.auc = single_feature_auc(values, lab);
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.auc > b.auc; });
    return rows;
}

std::vector<FeatureReportRow> predictiveness_report(const FeatureMatrix& matrix, const CohortDataset& dataset) {
    if (matrix.rows() != dataset.questions.size()) throw std::invalid_argument("matrix and dataset differ in size");
    std::vector<int> labels;
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        if (matrix.question_ids[r] != dataset.questions[r].question_id) {
            throw std::invalid_argument("matrix rows are not aligned with the dataset");
        }
        labels.push_back(dataset.questions[r].being_forgotten ? 1 : 0);
    }
    return predictiveness_report(matrix, labels);
}

void write_report_csv(std::span<const FeatureReportRow> rows, std::ostream& out) {
    out << "feature,group,U,p,p_below_0.05,spearman_rho,auc,n_forgotten,n_unforgotten,missing,degenerate\n";
    for (const auto& r : rows) {
        out << r.feature << ',' << group_name(r.group) << ',' << fmt(r.u) << ',' << fmt(r.p) << ','
            << (r.p < 0.05 ? 1 : 0) << ',' << fmt(r.rho) << ',' << fmt(r.auc) << ',' << r.n_forgotten << ','
            << r.n_unforgotten << ',' << r.missing << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
}

}  // namespace forgetq::stats
