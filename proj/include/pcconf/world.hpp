#pragma once

// Synthetic embedding world. Identities live on a k-dimensional subspace of
// R^d (orthonormal basis A); each observation is a unit vector
//
//   e = normalize(mu + tau(q) * eta),   tau(q) = tau_max * (1 - q)
//
// where q in [0,1] is the record's latent quality and eta is the
// degradation noise direction. eta splits its energy deterministically
// between the identity subspace and its complement:
//
//   eta = sqrt(f) * A w_in + sqrt(1 - f) * w_out
//
// with w_in uniform on the unit sphere of (subspace, perp to mu) and w_out
// uniform on the complement sphere. The split makes the projection norm
// ||A^T e|| an exact function of tau, which is what turns the projection
// norm into a usable recognizability oracle.
//
// Three degradation kinds exist on top of the base noise: iso_noise and
// heavy_tail redraw the noise from the prototype at the reduced quality
// (heavy_tail with a heavy-tailed scale multiplier), coord_mask zeroes a
// seeded random subset of coordinates and renormalizes. Effective tau is
// clamped to tau_max.

#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "pcconf/errors.hpp"
#include "pcconf/linalg.hpp"
#include "pcconf/rng.hpp"

namespace pcconf {

enum class Degradation : std::uint32_t {
    iso_noise = 1u,
    coord_mask = 2u,
    heavy_tail = 4u,
};

inline const char* degradation_name(Degradation k) {
    switch (k) {
        case Degradation::iso_noise: return "iso_noise";
        case Degradation::coord_mask: return "coord_mask";
        case Degradation::heavy_tail: return "heavy_tail";
    }
    return "?";
}

struct QualityMixture {
    double weight_high = 0.60;
    double high_a = 9.0, high_b = 2.0;
    double low_a = 1.2, low_b = 1.8;
};

struct WorldConfig {
    std::size_t ambient_dim = 64;    // d
    std::size_t identity_dim = 8;    // k
    std::size_t num_identities = 240;
    std::size_t images_per_identity = 24;
    QualityMixture quality;
    double degradation_probability = 0.2;  // chance a record gains a degraded copy
    double tau_max = 3.6;
    std::uint64_t rng_seed = 0;

    // degradation details
    double decrement_iso = 0.20;
    double decrement_mask = 0.30;
    double decrement_heavy = 0.25;
    double mask_fraction = 0.05;   // fraction of coordinates zeroed by coord_mask
    double heavy_scale = 0.35;     // tau multiplier = 1 + heavy_scale*min(|t|, heavy_clip)
    double heavy_clip = 3.0;
    double subset_p1 = 0.80;       // one degradation kind
    double subset_p2 = 0.15;       // two kinds (remainder: all three)
    // in-subspace noise energy fraction f; <= 0 means auto (k/d)
    double noise_subspace_fraction = 0.0;
    // degraded copies join the corpus next to the original (augment) or
    // stand in for it (replace)
    bool degraded_replace = false;

    double subspace_fraction() const {
        return noise_subspace_fraction > 0.0
                   ? noise_subspace_fraction
                   : static_cast<double>(identity_dim) / static_cast<double>(ambient_dim);
    }

    void validate() const {
        if (identity_dim == 0 || identity_dim >= ambient_dim)
            throw ConfigError("world: requires 0 < identity_dim < ambient_dim");
        if (num_identities == 0 || images_per_identity == 0)
            throw ConfigError("world: counts must be positive");
        if (degradation_probability < 0.0 || degradation_probability > 1.0)
            throw ConfigError("world: degradation_probability must be in [0,1]");
        if (tau_max < 0.0) throw ConfigError("world: tau_max must be non-negative");
        if (mask_fraction <= 0.0 || mask_fraction >= 1.0)
            throw ConfigError("world: mask_fraction must be in (0,1)");
        if (subset_p1 < 0.0 || subset_p2 < 0.0 || subset_p1 + subset_p2 > 1.0)
            throw ConfigError("world: degradation subset probabilities malformed");
        double f = subspace_fraction();
        if (f <= 0.0 || f >= 1.0)
            throw ConfigError("world: noise_subspace_fraction must be in (0,1)");
    }
};

struct Identity {
    std::uint64_t id = 0;
    Vec latent;     // z in R^k
    Vec prototype;  // normalize(A z) in R^d
};

struct ImageRecord {
    std::uint64_t image_id = 0;
    std::uint64_t identity_id = 0;
    double latent_quality = 1.0;
    std::uint32_t degradations = 0;
    Vec embedding;
};

// image ids: eval-split flag | identity | per-identity ordinal
inline constexpr std::uint64_t kImageIdLocalBits = 24;
inline constexpr std::uint64_t kEvalSplitFlag = 1ULL << 40;

inline std::uint64_t make_image_id(std::uint64_t identity, std::uint64_t local, bool eval_split) {
    return (eval_split ? kEvalSplitFlag : 0) | (identity << kImageIdLocalBits) | local;
}

struct World {
    WorldConfig config;
    Mat basis;  // d x k, orthonormal columns
    std::vector<Identity> identities;
    std::vector<ImageRecord> records;
};

inline double oracle_confidence(const Vec& e, const Mat& basis) {
    if (e.size() != basis.rows) throw std::invalid_argument("oracle_confidence: dimension mismatch");
    double n = nrm2(e);
    if (std::abs(n - 1.0) > 1e-9)
        throw std::invalid_argument("oracle_confidence: input must be unit-norm");
    Vec p = mat_tvec(basis, e.data());
    double c = nrm2(p);
    return c > 1.0 ? 1.0 : c;
}

namespace detail {

inline Vec noise_direction(const Mat& basis, const Vec& mu, double f, Rng& rng) {
    const std::size_t d = basis.rows, k = basis.cols;
    // w_in: unit vector in the subspace, orthogonal to mu's coordinates
    Vec zhat = mat_tvec(basis, mu.data());
    scale(zhat, 1.0 / nrm2(zhat));
    Vec win(k);
    for (;;) {
        for (std::size_t i = 0; i < k; ++i) win[i] = rng.normal();
        double proj = dot(win, zhat);
        for (std::size_t i = 0; i < k; ++i) win[i] -= proj * zhat[i];
        double n = nrm2(win);
        if (n > 1e-12) {
            scale(win, 1.0 / n);
            break;
        }
    }
    // w_out: unit vector in the orthogonal complement
    Vec wout(d);
    for (;;) {
        for (std::size_t i = 0; i < d; ++i) wout[i] = rng.normal();
        Vec coeff = mat_tvec(basis, wout.data());
        for (std::size_t r = 0; r < d; ++r) wout[r] -= dot(basis.row(r), coeff.data(), k);
        double n = nrm2(wout);
        if (n > 1e-12) {
            scale(wout, 1.0 / n);
            break;
        }
    }
    Vec eta(d);
    double a = std::sqrt(f), b = std::sqrt(1.0 - f);
    for (std::size_t r = 0; r < d; ++r) eta[r] = a * dot(basis.row(r), win.data(), k) + b * wout[r];
    return eta;
}

inline Vec embed_at(const WorldConfig& cfg, const Mat& basis, const Vec& mu, double q,
                    double mult, Rng& rng) {
    double tau = cfg.tau_max * (1.0 - q) * mult;
    if (tau > cfg.tau_max) tau = cfg.tau_max;
    if (tau <= 0.0) return mu;
    Vec eta = noise_direction(basis, mu, cfg.subspace_fraction(), rng);
    Vec e(mu.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = mu[i] + tau * eta[i];
    return normalized(std::move(e));
}

inline double sample_quality(const QualityMixture& mix, Rng& rng) {
    if (rng.u01() < mix.weight_high) return rng.beta(mix.high_a, mix.high_b);
    return rng.beta(mix.low_a, mix.low_b);
}

} // namespace detail

inline double degradation_decrement(const WorldConfig& cfg, Degradation kind) {
    switch (kind) {
        case Degradation::iso_noise: return cfg.decrement_iso;
        case Degradation::coord_mask: return cfg.decrement_mask;
        case Degradation::heavy_tail: return cfg.decrement_heavy;
    }
    throw std::invalid_argument("unknown degradation kind");
}

// Returns a new record with `kind` added, quality reduced by the configured
// decrement (floored at 0) and the embedding re-noised/re-normalized. The
// input record is untouched.
inline ImageRecord apply_degradation(const WorldConfig& cfg, const Mat& basis,
                                     const Vec& prototype, const ImageRecord& rec,
                                     Degradation kind, Rng& rng) {
    ImageRecord out = rec;
    out.degradations |= static_cast<std::uint32_t>(kind);
    out.latent_quality = std::max(0.0, rec.latent_quality - degradation_decrement(cfg, kind));
    switch (kind) {
        case Degradation::iso_noise:
            out.embedding = detail::embed_at(cfg, basis, prototype, out.latent_quality, 1.0, rng);
            break;
        case Degradation::heavy_tail: {
            double t = rng.normal() / std::sqrt(rng.exponential());
            double mult = 1.0 + cfg.heavy_scale * std::min(std::abs(t), cfg.heavy_clip);
            out.embedding = detail::embed_at(cfg, basis, prototype, out.latent_quality, mult, rng);
            break;
        }
        case Degradation::coord_mask: {
            std::size_t d = cfg.ambient_dim;
            auto n_zero = static_cast<std::uint32_t>(
                std::llround(cfg.mask_fraction * static_cast<double>(d)));
            if (n_zero == 0) n_zero = 1;
            auto idx = rng.sample_distinct(static_cast<std::uint32_t>(d), n_zero);
            Vec e = rec.embedding;
            for (auto i : idx) e[i] = 0.0;
            out.embedding = normalized(std::move(e));
            break;
        }
        default:
            throw std::invalid_argument("unknown degradation kind");
    }
    return out;
}

namespace detail {

inline std::vector<Degradation> pick_degradation_subset(const WorldConfig& cfg, Rng& rng) {
    double r = rng.u01();
    std::size_t n = r < cfg.subset_p1 ? 1 : (r < cfg.subset_p1 + cfg.subset_p2 ? 2 : 3);
    static const Degradation kinds[3] = {Degradation::iso_noise, Degradation::coord_mask,
                                         Degradation::heavy_tail};
    auto idx = rng.sample_distinct(3, static_cast<std::uint32_t>(n));
    std::vector<Degradation> out;
    out.reserve(n);
    for (auto i : idx) out.push_back(kinds[i]);
    return out;
}

// all records of one identity, in deterministic order
inline void generate_identity_records(const WorldConfig& cfg, const Mat& basis,
                                      const Identity& ident, std::size_t count, bool eval_split,
                                      Rng rng, std::vector<ImageRecord>& out) {
    std::uint64_t local = 0;
    for (std::size_t j = 0; j < count; ++j) {
        ImageRecord rec;
        rec.identity_id = ident.id;
        rec.image_id = make_image_id(ident.id, local++, eval_split);
        rec.latent_quality = sample_quality(cfg.quality, rng);
        rec.degradations = 0;
        rec.embedding = embed_at(cfg, basis, ident.prototype, rec.latent_quality, 1.0, rng);
        out.push_back(rec);
        if (rng.u01() < cfg.degradation_probability) {
            ImageRecord degraded = out.back();
            for (Degradation kind : pick_degradation_subset(cfg, rng))
                degraded = apply_degradation(cfg, basis, ident.prototype, degraded, kind, rng);
            if (cfg.degraded_replace) {
                degraded.image_id = out.back().image_id;
                out.back() = std::move(degraded);
            } else {
                degraded.image_id = make_image_id(ident.id, local++, eval_split);
                out.push_back(std::move(degraded));
            }
        }
    }
}

} // namespace detail

// Deterministic for a given config; `threads` only bounds worker count and
// never changes the result (every identity owns a derived seed stream).
inline World generate_world(const WorldConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    World w;
    w.config = cfg;
    Rng root(cfg.rng_seed);

    {
        Rng basis_rng = root.stream("world/basis");
        Mat A(cfg.ambient_dim, cfg.identity_dim);
        for (double& v : A.a) v = basis_rng.normal();
        mgs_orthonormalize(A);
        w.basis = std::move(A);
    }

    w.identities.resize(cfg.num_identities);
    std::vector<std::vector<ImageRecord>> per_identity(cfg.num_identities);
    auto build_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Rng ident_rng = root.stream("world/identity", i);
            Identity ident;
            ident.id = i;
            ident.latent.resize(cfg.identity_dim);
            for (double& v : ident.latent) v = ident_rng.normal();
            ident.prototype = normalized(mat_vec(w.basis, ident.latent.data()));
            w.identities[i] = ident;
            detail::generate_identity_records(cfg, w.basis, w.identities[i],
                                              cfg.images_per_identity, false,
                                              root.stream("world/identity", i).stream("records"),
                                              per_identity[i]);
        }
    };
    if (threads <= 1 || cfg.num_identities < 2) {
        build_range(0, cfg.num_identities);
    } else {
        unsigned n_workers = std::min<unsigned>(threads, static_cast<unsigned>(cfg.num_identities));
        std::vector<std::thread> pool;
        std::size_t chunk = (cfg.num_identities + n_workers - 1) / n_workers;
        for (unsigned t = 0; t < n_workers; ++t) {
            std::size_t lo = t * chunk, hi = std::min(cfg.num_identities, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(build_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    for (auto& recs : per_identity)
        for (auto& r : recs) w.records.push_back(std::move(r));
    return w;
}

// Extra records from the same identities (the held-out evaluation split);
// stream-tagged separately so train and eval splits are independent.
inline std::vector<ImageRecord> generate_eval_records(const World& w, std::size_t per_identity,
                                                      unsigned threads = 1) {
    if (per_identity == 0) throw ConfigError("eval split: images per identity must be positive");
    Rng root(w.config.rng_seed);
    std::vector<std::vector<ImageRecord>> buckets(w.identities.size());
    auto build_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            detail::generate_identity_records(w.config, w.basis, w.identities[i], per_identity,
                                              true, root.stream("world/identity", i).stream("eval"),
                                              buckets[i]);
    };
    if (threads <= 1 || buckets.size() < 2) {
        build_range(0, buckets.size());
    } else {
        unsigned n_workers = std::min<unsigned>(threads, static_cast<unsigned>(buckets.size()));
        std::vector<std::thread> pool;
        std::size_t chunk = (buckets.size() + n_workers - 1) / n_workers;
        for (unsigned t = 0; t < n_workers; ++t) {
            std::size_t lo = t * chunk, hi = std::min(buckets.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(build_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    std::vector<ImageRecord> out;
    for (auto& recs : buckets)
        for (auto& r : recs) out.push_back(std::move(r));
    return out;
}

} // namespace pcconf
