#pragma once

// Evaluation machinery: TAR@FAR operating points, error-vs-reject curves
// (reject the lowest-confidence fraction r, recompute TAR on what remains)
// and the 100-bin confidence/similarity correlation diagnostic. A pair's
// confidence is always the minimum of its two per-image confidences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pcconf/confnet.hpp"
#include "pcconf/errors.hpp"
#include "pcconf/linalg.hpp"
#include "pcconf/pairgen.hpp"
#include "pcconf/rng.hpp"
#include "pcconf/world.hpp"

namespace pcconf {

struct ScoredPair {
    std::uint64_t image_a = 0;
    std::uint64_t image_b = 0;
    double similarity = 0.0;
    double pair_confidence = 0.0;  // min of the two per-image confidences
    bool is_genuine = false;

    ScoredPair() = default;
    ScoredPair(std::uint64_t a, std::uint64_t b, double sim, double conf_a, double conf_b,
               bool genuine)
        : image_a(a), image_b(b), similarity(sim),
          pair_confidence(std::min(conf_a, conf_b)), is_genuine(genuine) {}
};

struct TarResult {
    double threshold = 0.0;
    double achieved_far = 0.0;
    double tar = 0.0;
};

// Threshold = (k+1)-th largest impostor score with k = floor(far_target *
// n_impostor); accept strictly above it. k >= n_impostor accepts everything.
inline TarResult tar_at_far(const std::vector<double>& genuine,
                            const std::vector<double>& impostor, double far_target) {
    if (genuine.empty() || impostor.empty())
        throw std::invalid_argument("tar_at_far: empty score list");
    if (far_target < 0.0 || far_target > 1.0)
        throw std::invalid_argument("tar_at_far: far_target must be in [0,1]");
    const std::size_t n_imp = impostor.size();
    auto k = static_cast<std::size_t>(far_target * static_cast<double>(n_imp));
    TarResult res;
    if (k >= n_imp) {
        res.threshold = -std::numeric_limits<double>::infinity();
        res.achieved_far = 1.0;
        res.tar = 1.0;
        return res;
    }
    std::vector<double> imp = impostor;
    std::nth_element(imp.begin(), imp.begin() + k, imp.end(), std::greater<double>());
    res.threshold = imp[k];
    std::size_t fa = 0;
    for (double s : impostor) fa += s > res.threshold;
    std::size_t ta = 0;
    for (double s : genuine) ta += s > res.threshold;
    res.achieved_far = static_cast<double>(fa) / static_cast<double>(n_imp);
    res.tar = static_cast<double>(ta) / static_cast<double>(genuine.size());
    return res;
}

inline const std::vector<double>& default_far_targets() {
    static const std::vector<double> t{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
    return t;
}

struct RocPoint {
    double far_target = 0.0;
    double threshold = 0.0;
    double achieved_far = 0.0;
    double tar = 0.0;
};

struct RocSummary {
    std::vector<RocPoint> points;  // one per FAR target, in the given order
    std::size_t n_genuine = 0;
    std::size_t n_impostor = 0;
};

inline RocSummary roc_summary(const std::vector<double>& genuine,
                              const std::vector<double>& impostor,
                              const std::vector<double>& far_targets = default_far_targets()) {
    RocSummary s;
    s.n_genuine = genuine.size();
    s.n_impostor = impostor.size();
    for (double t : far_targets) {
        TarResult r = tar_at_far(genuine, impostor, t);
        s.points.push_back({t, r.threshold, r.achieved_far, r.tar});
    }
    return s;
}

struct RejectPoint {
    double r = 0.0;
    std::size_t n_retained = 0;
    bool genuine_empty = false;   // reported, not fatal
    bool impostor_empty = false;
    RocSummary roc;  // empty points if either side vanished
};

struct ErrorRejectCurve {
    std::vector<double> far_targets;
    std::vector<RejectPoint> points;
};

inline std::vector<double> default_reject_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 40; ++i) g.push_back(static_cast<double>(i) / 100.0);
    return g;
}

// retained count: ceil((1-r)*N), computed as N - floor(r*N) with r*N snapped
// to the nearest integer when within 1e-9 of one (guards FP noise on grid
// values like 0.3*N)
inline std::size_t retained_count(double r, std::size_t n) {
    double rn = r * static_cast<double>(n);
    double nearest = std::round(rn);
    if (std::abs(rn - nearest) < 1e-9 * std::max(1.0, static_cast<double>(n))) rn = nearest;
    auto cut = static_cast<std::size_t>(std::floor(rn));
    return n - std::min(cut, n);
}

inline ErrorRejectCurve error_vs_reject(const std::vector<ScoredPair>& pairs,
                                        const std::vector<double>& r_grid = default_reject_grid(),
                                        const std::vector<double>& far_targets = default_far_targets()) {
    if (pairs.empty()) throw std::invalid_argument("error_vs_reject: no pairs");
    for (std::size_t i = 1; i < r_grid.size(); ++i)
        if (!(r_grid[i] > r_grid[i - 1]))
            throw ConfigError("error_vs_reject: r grid must be strictly increasing");
    if (!r_grid.empty() && (r_grid.front() < 0.0 || r_grid.back() >= 1.0))
        throw ConfigError("error_vs_reject: r grid must lie in [0,1)");

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const ScoredPair &a = pairs[i], &b = pairs[j];
        if (a.pair_confidence != b.pair_confidence) return a.pair_confidence > b.pair_confidence;
        if (a.image_a != b.image_a) return a.image_a < b.image_a;
        return a.image_b < b.image_b;
    });

    ErrorRejectCurve curve;
    curve.far_targets = far_targets;
    for (double r : r_grid) {
        RejectPoint pt;
        pt.r = r;
        pt.n_retained = retained_count(r, pairs.size());
        std::vector<double> gen, imp;
        for (std::size_t i = 0; i < pt.n_retained; ++i) {
            const ScoredPair& p = pairs[order[i]];
            (p.is_genuine ? gen : imp).push_back(p.similarity);
        }
        pt.genuine_empty = gen.empty();
        pt.impostor_empty = imp.empty();
        if (!pt.genuine_empty && !pt.impostor_empty) pt.roc = roc_summary(gen, imp, far_targets);
        pt.roc.n_genuine = gen.size();
        pt.roc.n_impostor = imp.size();
        curve.points.push_back(std::move(pt));
    }
    return curve;
}

struct CorrelationBins {
    double conf_lo = 0.0;
    double conf_hi = 0.0;
    bool degenerate_range = false;  // all confidences identical
    std::vector<double> mean_similarity;  // size 100; meaningful where count > 0
    std::vector<std::uint64_t> count;     // size 100
    std::uint64_t total = 0;
};

namespace detail {

class BinAccumulator {
  public:
    void observe_conf(double c) {
        lo_ = std::min(lo_, c);
        hi_ = std::max(hi_, c);
    }
    void start_fill() {
        degenerate_ = !(hi_ - lo_ > 0.0);
        sums_.assign(100, 0.0);
        counts_.assign(100, 0);
    }
    void add(double conf, double sim) {
        std::size_t b = 0;
        if (!degenerate_) {
            b = static_cast<std::size_t>((conf - lo_) / (hi_ - lo_) * 100.0);
            if (b > 99) b = 99;
        }
        sums_[b] += sim;
        counts_[b] += 1;
    }
    CorrelationBins finish() const {
        CorrelationBins out;
        out.conf_lo = lo_;
        out.conf_hi = hi_;
        out.degenerate_range = degenerate_;
        out.mean_similarity.assign(100, 0.0);
        out.count = counts_;
        for (std::size_t b = 0; b < 100; ++b) {
            out.total += counts_[b];
            if (counts_[b] > 0)
                out.mean_similarity[b] = sums_[b] / static_cast<double>(counts_[b]);
        }
        return out;
    }

  private:
    double lo_ = std::numeric_limits<double>::infinity();
    double hi_ = -std::numeric_limits<double>::infinity();
    bool degenerate_ = false;
    std::vector<double> sums_;
    std::vector<std::uint64_t> counts_;
};

} // namespace detail

inline CorrelationBins correlation_bins(const std::vector<ScoredPair>& mated_pairs) {
    if (mated_pairs.empty()) throw std::invalid_argument("correlation_bins: empty mated set");
    for (const auto& p : mated_pairs)
        if (!p.is_genuine)
            throw std::invalid_argument("correlation_bins: impostor pair in mated set");
    detail::BinAccumulator acc;
    for (const auto& p : mated_pairs) acc.observe_conf(p.pair_confidence);
    acc.start_fill();
    for (const auto& p : mated_pairs) acc.add(p.pair_confidence, p.similarity);
    return acc.finish();
}

// count of adjacent occupied-bin pairs whose mean similarity decreases
inline std::size_t count_local_violations(const CorrelationBins& bins) {
    std::size_t v = 0;
    bool have_prev = false;
    double prev = 0.0;
    for (std::size_t b = 0; b < bins.count.size(); ++b) {
        if (bins.count[b] == 0) continue;
        if (have_prev && bins.mean_similarity[b] < prev) ++v;
        prev = bins.mean_similarity[b];
        have_prev = true;
    }
    return v;
}

// Streaming variant over every mated pair of `records` (exhaustive; nothing
// is materialized). conf and proj run parallel to records; proj rows are the
// recognizer projections, normalized.
inline CorrelationBins mated_bins_exhaustive(const std::vector<ImageRecord>& records,
                                             const std::vector<double>& conf,
                                             const std::vector<Vec>& proj) {
    if (records.empty()) throw std::invalid_argument("mated_bins_exhaustive: no records");
    if (conf.size() != records.size() || proj.size() != records.size())
        throw std::invalid_argument("mated_bins_exhaustive: parallel arrays must match records");

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return records[i].identity_id != records[j].identity_id
                   ? records[i].identity_id < records[j].identity_id
                   : records[i].image_id < records[j].image_id;
    });

    detail::BinAccumulator acc;
    bool any_pair = false;
    auto for_each_group = [&](auto&& body) {
        std::size_t lo = 0;
        while (lo < order.size()) {
            std::size_t hi = lo;
            while (hi < order.size() &&
                   records[order[hi]].identity_id == records[order[lo]].identity_id)
                ++hi;
            body(lo, hi);
            lo = hi;
        }
    };
    for_each_group([&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a)
            for (std::size_t b = a + 1; b < hi; ++b) {
                acc.observe_conf(std::min(conf[order[a]], conf[order[b]]));
                any_pair = true;
            }
    });
    if (!any_pair) throw std::invalid_argument("mated_bins_exhaustive: no mated pairs");
    acc.start_fill();
    for_each_group([&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            const Vec& pa = proj[order[a]];
            for (std::size_t b = a + 1; b < hi; ++b)
                acc.add(std::min(conf[order[a]], conf[order[b]]),
                        dot(pa, proj[order[b]]));
        }
    });
    return acc.finish();
}

// Spearman rank correlation with averaged ranks on ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length samples, n >= 2");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        std::size_t lo = 0;
        while (lo < order.size()) {
            std::size_t hi = lo;
            while (hi < order.size() && v[order[hi]] == v[order[lo]]) ++hi;
            double avg = 0.5 * static_cast<double>(lo + hi - 1) + 1.0;
            for (std::size_t i = lo; i < hi; ++i) r[order[i]] = avg;
            lo = hi;
        }
        return r;
    };
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(rx.size());
    my /= static_cast<double>(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw NumericalError("spearman: zero-variance sample");
    return sxy / std::sqrt(sxx * syy);
}

struct CovariateConfig {
    std::size_t n_genuine = 10000;
    std::size_t n_impostor = 100000;
    std::uint64_t seed = 0;
};

// Samples genuine/impostor pairs from `records` (one fold), scoring
// similarity with the opposite fold's recognizer and confidence with the
// trained model (pair confidence = min of the two image confidences).
inline std::vector<ScoredPair> build_covariate_protocol(const std::vector<ImageRecord>& records,
                                                        const Recognizer& rec,
                                                        const ConfidenceModel& model,
                                                        const CovariateConfig& cfg) {
    if (records.empty()) throw std::invalid_argument("build_covariate_protocol: no records");

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return records[i].identity_id != records[j].identity_id
                   ? records[i].identity_id < records[j].identity_id
                   : records[i].image_id < records[j].image_id;
    });

    // per-record confidence and normalized projection, computed once
    std::vector<double> conf(records.size());
    std::vector<Vec> proj(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        conf[i] = forward(model, records[i].embedding);
        proj[i] = normalized(mat_tvec(rec.basis, records[i].embedding.data()));
    }

    // identity groups in canonical order
    std::vector<std::pair<std::size_t, std::size_t>> groups;  // [lo, hi) into `order`
    {
        std::size_t lo = 0;
        while (lo < order.size()) {
            std::size_t hi = lo;
            while (hi < order.size() &&
                   records[order[hi]].identity_id == records[order[lo]].identity_id)
                ++hi;
            groups.emplace_back(lo, hi);
            lo = hi;
        }
    }
    if (groups.size() < 2 && cfg.n_impostor > 0)
        throw ConfigError("build_covariate_protocol: impostor sampling needs >= 2 identities");
    std::vector<std::size_t> eligible;  // groups with >= 2 images
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (groups[g].second - groups[g].first >= 2) eligible.push_back(g);
    if (eligible.empty() && cfg.n_genuine > 0)
        throw ConfigError("build_covariate_protocol: no identity has two images");

    std::vector<ScoredPair> out;
    out.reserve(cfg.n_genuine + cfg.n_impostor);
    auto emit = [&](std::size_t ri, std::size_t rj, bool genuine) {
        out.emplace_back(records[ri].image_id, records[rj].image_id, dot(proj[ri], proj[rj]),
                         conf[ri], conf[rj], genuine);
    };
    Rng gen_rng = Rng(cfg.seed).stream("covariate/genuine");
    for (std::size_t n = 0; n < cfg.n_genuine; ++n) {
        auto [lo, hi] = groups[eligible[gen_rng.below(eligible.size())]];
        auto pick = gen_rng.sample_distinct(static_cast<std::uint32_t>(hi - lo), 2);
        emit(order[lo + pick[0]], order[lo + pick[1]], true);
    }
    Rng imp_rng = Rng(cfg.seed).stream("covariate/impostor");
    for (std::size_t n = 0; n < cfg.n_impostor; ++n) {
        auto pick = imp_rng.sample_distinct(static_cast<std::uint32_t>(groups.size()), 2);
        auto [lo1, hi1] = groups[pick[0]];
        auto [lo2, hi2] = groups[pick[1]];
        emit(order[lo1 + imp_rng.below(hi1 - lo1)], order[lo2 + imp_rng.below(hi2 - lo2)], false);
    }
    return out;
}

} // namespace pcconf
