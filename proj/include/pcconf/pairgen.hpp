#pragma once

// Two-fold verification-score protocol. Identities are split in half; a
// rank-k recognizer is fitted on each fold's embeddings (orthogonal
// iteration on the sample second-moment matrix) and every mated pair in the
// opposite fold is scored with the cosine of the recognizer projections,
// clamped to [0,1]. Alternating the folds scores every identity exactly
// once, always under a recognizer that never saw that identity.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pcconf/errors.hpp"
#include "pcconf/linalg.hpp"
#include "pcconf/rng.hpp"
#include "pcconf/world.hpp"

namespace pcconf {

struct FoldSplit {
    std::vector<std::uint64_t> fold_a;
    std::vector<std::uint64_t> fold_b;
};

inline FoldSplit split_folds(const std::vector<std::uint64_t>& identities, std::uint64_t seed) {
    if (identities.size() < 2) throw ConfigError("split_folds: need at least 2 identities");
    std::vector<std::uint64_t> ids = identities;
    std::sort(ids.begin(), ids.end());
    Rng rng = Rng(seed).stream("folds");
    rng.shuffle(ids);
    std::size_t half = ids.size() / 2;
    FoldSplit s;
    s.fold_a.assign(ids.begin(), ids.begin() + half);
    s.fold_b.assign(ids.begin() + half, ids.end());
    std::sort(s.fold_a.begin(), s.fold_a.end());
    std::sort(s.fold_b.begin(), s.fold_b.end());
    return s;
}

struct Recognizer {
    Mat basis;          // d x k, orthonormal columns
    std::uint32_t fold = 0;  // which fold it was fitted on
    Vec eigenvalues;    // Rayleigh quotients of the converged basis, descending
    std::size_t iterations = 0;
};

// Top-k eigenspace of (1/n) sum e e^T by orthogonal iteration. Stops when
// the projector moves < 1e-10 in Frobenius norm, errors out past 500 sweeps
// or on rank-deficient data.
inline Recognizer fit_recognizer(const std::vector<ImageRecord>& records, std::size_t k,
                                 std::uint32_t fold, std::uint64_t seed) {
    if (records.empty() || records.size() < k)
        throw ConfigError("fit_recognizer: need at least k records");
    const std::size_t d = records.front().embedding.size();
    if (k == 0 || k > d) throw ConfigError("fit_recognizer: need 0 < k <= d");

    Mat X(records.size(), d);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].embedding.size() != d)
            throw ConfigError("fit_recognizer: inconsistent embedding dimension");
        std::copy_n(records[i].embedding.data(), d, X.row(i));
    }
    Mat M = second_moment(X);

    Rng rng = Rng(seed).stream("recognizer/init", fold);
    Mat Q(d, k);
    for (double& v : Q.a) v = rng.normal();
    if (mgs_orthonormalize(Q) < 1e-12)
        throw NumericalError("fit_recognizer: degenerate random start");

    constexpr std::size_t kMaxIter = 500;
    constexpr double kTol = 1e-10;
    Recognizer rec;
    rec.fold = fold;
    Mat prev = Q;
    for (std::size_t it = 1; it <= kMaxIter; ++it) {
        Mat Z = matmul(M, Q);
        double min_col = mgs_orthonormalize(Z);
        if (min_col < 1e-13)
            throw NumericalError("fit_recognizer: rank-deficient fold (fewer than k independent directions)");
        Q = std::move(Z);
        double change = projector_distance(Q, prev);
        rec.iterations = it;
        if (change < kTol) break;
        if (it == kMaxIter)
            throw NumericalError("fit_recognizer: no convergence in 500 iterations");
        prev = Q;
    }

    // Rayleigh-Ritz: rotate the converged subspace onto eigenvector estimates
    // so the reported per-column eigenvalues are exact for the k x k block
    Mat B = matmul_at_b(Q, matmul(M, Q));
    Mat V(0, 0);
    sym_eig_small(B, V);
    std::vector<std::pair<double, std::size_t>> ray(k);
    for (std::size_t j = 0; j < k; ++j) ray[j] = {B.row(j)[j], j};
    std::sort(ray.begin(), ray.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    rec.basis = Mat(d, k);
    rec.eigenvalues.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        rec.eigenvalues[j] = ray[j].first;
        std::size_t src = ray[j].second;
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += Q.row(r)[c] * V.row(c)[src];
            rec.basis.row(r)[j] = s;
        }
    }

    // orthonormality post-condition
    Mat G = matmul_at_b(rec.basis, rec.basis);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double want = i == j ? 1.0 : 0.0;
            if (std::abs(G.row(i)[j] - want) > 1e-8)
                throw NumericalError("fit_recognizer: basis lost orthonormality");
        }
    return rec;
}

inline double cosine_similarity(const Vec& u, const Vec& v) {
    double nu = nrm2(u), nv = nrm2(v);
    if (nu == 0.0 || nv == 0.0)
        throw std::invalid_argument("cosine_similarity: zero vector");
    return dot(u, v) / (nu * nv);
}

struct PairSample {
    std::uint64_t image_a = 0;
    std::uint64_t image_b = 0;
    std::uint64_t identity = 0;
    double y = 0.0;
    std::uint32_t fold = 0;  // fold the records came from
};

struct PairGenConfig {
    std::size_t per_identity_cap = 500;  // 0 = unlimited
    bool clamp_scores = true;
    std::uint64_t seed = 0;
};

// All unordered mated pairs of `records` (which must come from the fold the
// recognizer was NOT fitted on), y = cos of the projected embeddings.
// Output is sorted by (identity, image_a, image_b); the cap, when it binds,
// keeps a seeded random subset of an identity's pairs.
inline std::vector<PairSample> score_mated_pairs(const Recognizer& rec,
                                                 const std::vector<ImageRecord>& records,
                                                 std::uint32_t records_fold,
                                                 const PairGenConfig& cfg) {
    if (rec.fold == records_fold)
        throw ConfigError("score_mated_pairs: records must come from the fold opposite the recognizer");

    // group by identity, canonical image order
    std::vector<const ImageRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const ImageRecord* a, const ImageRecord* b) {
        return a->identity_id != b->identity_id ? a->identity_id < b->identity_id
                                                : a->image_id < b->image_id;
    });

    std::vector<PairSample> out;
    std::size_t lo = 0;
    while (lo < sorted.size()) {
        std::size_t hi = lo;
        while (hi < sorted.size() && sorted[hi]->identity_id == sorted[lo]->identity_id) ++hi;
        std::size_t n = hi - lo;
        if (n >= 2) {
            std::vector<Vec> proj(n);
            for (std::size_t i = 0; i < n; ++i)
                proj[i] = mat_tvec(rec.basis, sorted[lo + i]->embedding.data());
            std::vector<PairSample> mine;
            mine.reserve(n * (n - 1) / 2);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = a + 1; b < n; ++b) {
                    PairSample p;
                    p.image_a = sorted[lo + a]->image_id;
                    p.image_b = sorted[lo + b]->image_id;
                    p.identity = sorted[lo]->identity_id;
                    p.fold = records_fold;
                    double c = cosine_similarity(proj[a], proj[b]);
                    p.y = cfg.clamp_scores ? std::clamp(c, 0.0, 1.0) : c;
                    mine.push_back(p);
                }
            if (cfg.per_identity_cap > 0 && mine.size() > cfg.per_identity_cap) {
                Rng rng = Rng(cfg.seed).stream("pairs/cap", sorted[lo]->identity_id);
                rng.shuffle(mine);
                mine.resize(cfg.per_identity_cap);
                std::sort(mine.begin(), mine.end(), [](const PairSample& x, const PairSample& y2) {
                    return x.image_a != y2.image_a ? x.image_a < y2.image_a
                                                   : x.image_b < y2.image_b;
                });
            }
            out.insert(out.end(), mine.begin(), mine.end());
        }
        lo = hi;
    }
    return out;
}

} // namespace pcconf
