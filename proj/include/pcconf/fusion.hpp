#pragma once

// Confidence-weighted set fusion and set-to-set verification. A set of
// embeddings collapses to one descriptor
//
//   v = sum_i s_i v_i / sum_i s_i
//
// (no renormalization; cosine downstream is scale-invariant). Uniform
// weighting (all s_i = 1) is the average-pooling baseline; confidence
// weighting uses the trained model's per-image outputs, or the world's
// oracle recognizability in oracle experiments.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pcconf/confnet.hpp"
#include "pcconf/errors.hpp"
#include "pcconf/linalg.hpp"
#include "pcconf/metrics.hpp"
#include "pcconf/rng.hpp"
#include "pcconf/world.hpp"

namespace pcconf {

struct FaceSet {
    std::uint64_t set_id = 0;
    std::uint64_t identity_id = 0;
    std::vector<std::uint64_t> image_ids;
    std::vector<Vec> embeddings;
    Vec confidences;  // empty until filled; else parallel to embeddings

    void validate() const {
        if (embeddings.empty()) throw ConfigError("FaceSet: needs at least one member");
        if (image_ids.size() != embeddings.size())
            throw ConfigError("FaceSet: ids/embeddings size mismatch");
        for (const Vec& e : embeddings)
            if (std::abs(nrm2(e) - 1.0) > 1e-9)
                throw ConfigError("FaceSet: member embeddings must be unit-norm");
        if (!confidences.empty()) {
            if (confidences.size() != embeddings.size())
                throw ConfigError("FaceSet: confidences size mismatch");
            for (double s : confidences)
                if (!(s > 0.0) || !(s < 1.0))
                    throw ConfigError("FaceSet: confidences must lie in (0,1)");
        }
    }
};

struct SetDescriptor {
    Vec v;
    double weight_sum = 0.0;
};

inline SetDescriptor fuse(const FaceSet& set) {
    set.validate();
    if (set.confidences.empty())
        throw ConfigError("fuse: set has no confidences assigned");
    double total = 0.0;
    for (double s : set.confidences) total += s;
    if (!(total > 0.0)) throw NumericalError("fuse: confidence weights sum to zero");
    SetDescriptor out;
    out.weight_sum = total;
    out.v.assign(set.embeddings.front().size(), 0.0);
    for (std::size_t i = 0; i < set.embeddings.size(); ++i) {
        double w = set.confidences[i] / total;
        const Vec& e = set.embeddings[i];
        for (std::size_t r = 0; r < out.v.size(); ++r) out.v[r] += w * e[r];
    }
    return out;
}

inline SetDescriptor fuse_uniform(const FaceSet& set) {
    FaceSet u = set;
    u.confidences.assign(set.embeddings.size(), 0.5);  // any equal weight
    return fuse(u);
}

enum class SetWeighting { uniform, confidence };

// one-ulp haircut keeps an exact-1 oracle value inside the open interval
inline double confidence_closed_to_open(double s) {
    constexpr double hi = 1.0 - 1e-15;
    return std::min(std::max(s, 1e-15), hi);
}

inline void fill_confidences_from_model(std::vector<FaceSet>& sets, const ConfidenceModel& m) {
    for (FaceSet& s : sets) {
        s.confidences.resize(s.embeddings.size());
        for (std::size_t i = 0; i < s.embeddings.size(); ++i)
            s.confidences[i] = forward(m, s.embeddings[i]);
    }
}

inline void fill_confidences_oracle(std::vector<FaceSet>& sets, const Mat& basis) {
    for (FaceSet& s : sets) {
        s.confidences.resize(s.embeddings.size());
        for (std::size_t i = 0; i < s.embeddings.size(); ++i)
            s.confidences[i] = confidence_closed_to_open(oracle_confidence(s.embeddings[i], basis));
    }
}

struct SetPair {
    std::size_t a = 0;  // indices into the set list
    std::size_t b = 0;
    bool is_genuine = false;
};

inline RocSummary set_verification(const std::vector<FaceSet>& sets,
                                   const std::vector<SetPair>& pairs, SetWeighting weighting,
                                   const std::vector<double>& far_targets = default_far_targets()) {
    if (pairs.empty()) throw std::invalid_argument("set_verification: empty pair list");
    std::vector<Vec> desc(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i)
        desc[i] = weighting == SetWeighting::uniform ? fuse_uniform(sets[i]).v : fuse(sets[i]).v;
    std::vector<double> gen, imp;
    for (const SetPair& p : pairs) {
        if (p.a >= sets.size() || p.b >= sets.size())
            throw std::invalid_argument("set_verification: pair index out of range");
        double c = cosine_similarity(desc[p.a], desc[p.b]);
        (p.is_genuine ? gen : imp).push_back(c);
    }
    return roc_summary(gen, imp, far_targets);
}

struct SetProtocolConfig {
    std::size_t sets_per_identity = 4;
    std::size_t size_min = 2;
    std::size_t size_max = 16;
    double low_fraction = 0.3;       // minimum fraction of low-quality members
    double low_quality_max_q = 0.3;  // a member is low-quality when q < this
    std::size_t n_impostor_pairs = 20000;
    std::uint64_t seed = 0;

    void validate() const {
        if (sets_per_identity == 0) throw ConfigError("sets: sets_per_identity must be positive");
        if (size_min == 0 || size_min > size_max)
            throw ConfigError("sets: need 0 < size_min <= size_max");
        if (low_fraction < 0.0 || low_fraction > 1.0)
            throw ConfigError("sets: low_fraction must be in [0,1]");
    }
};

// Sets sampled per identity: size uniform in {size_min..size_max},
// ceil(low_fraction * size) members drawn from the identity's low-quality
// records, the rest from the others; everything without replacement inside
// one set. Confidences stay unset here.
inline std::vector<FaceSet> build_face_sets(const std::vector<ImageRecord>& records,
                                            const SetProtocolConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return records[i].identity_id != records[j].identity_id
                   ? records[i].identity_id < records[j].identity_id
                   : records[i].image_id < records[j].image_id;
    });

    Rng root(cfg.seed);
    std::vector<FaceSet> sets;
    std::size_t lo = 0;
    while (lo < order.size()) {
        std::size_t hi = lo;
        while (hi < order.size() &&
               records[order[hi]].identity_id == records[order[lo]].identity_id)
            ++hi;
        std::uint64_t ident = records[order[lo]].identity_id;
        std::vector<std::size_t> low, rest;
        for (std::size_t i = lo; i < hi; ++i)
            (records[order[i]].latent_quality < cfg.low_quality_max_q ? low : rest)
                .push_back(order[i]);
        Rng rng = root.stream("sets/identity", ident);
        for (std::size_t s = 0; s < cfg.sets_per_identity; ++s) {
            std::size_t size =
                cfg.size_min + static_cast<std::size_t>(rng.below(cfg.size_max - cfg.size_min + 1));
            auto n_low = static_cast<std::size_t>(
                std::ceil(cfg.low_fraction * static_cast<double>(size)));
            if (n_low > size) n_low = size;
            std::size_t n_rest = size - n_low;
            if (low.size() < n_low || rest.size() < n_rest)
                throw ConfigError("build_face_sets: identity " + std::to_string(ident) +
                                  " lacks records for the requested set composition");
            FaceSet fs;
            fs.set_id = sets.size();
            fs.identity_id = ident;
            auto take = [&](const std::vector<std::size_t>& pool, std::size_t n) {
                auto idx = rng.sample_distinct(static_cast<std::uint32_t>(pool.size()),
                                               static_cast<std::uint32_t>(n));
                for (auto i : idx) {
                    fs.image_ids.push_back(records[pool[i]].image_id);
                    fs.embeddings.push_back(records[pool[i]].embedding);
                }
            };
            take(low, n_low);
            take(rest, n_rest);
            // canonical member order
            std::vector<std::size_t> perm(fs.image_ids.size());
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            std::sort(perm.begin(), perm.end(), [&](std::size_t i, std::size_t j) {
                return fs.image_ids[i] < fs.image_ids[j];
            });
            FaceSet sorted_fs;
            sorted_fs.set_id = fs.set_id;
            sorted_fs.identity_id = fs.identity_id;
            for (auto i : perm) {
                sorted_fs.image_ids.push_back(fs.image_ids[i]);
                sorted_fs.embeddings.push_back(std::move(fs.embeddings[i]));
            }
            sets.push_back(std::move(sorted_fs));
        }
        lo = hi;
    }
    return sets;
}

// Genuine: every same-identity set pair. Impostor: seeded uniform samples of
// cross-identity set pairs.
inline std::vector<SetPair> build_set_pairs(const std::vector<FaceSet>& sets,
                                            const SetProtocolConfig& cfg) {
    if (sets.size() < 2) throw ConfigError("build_set_pairs: need at least two sets");
    std::vector<SetPair> pairs;
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j)
            if (sets[i].identity_id == sets[j].identity_id) pairs.push_back({i, j, true});
    Rng rng = Rng(cfg.seed).stream("sets/impostor-pairs");
    std::size_t n = 0, guard = 0;
    while (n < cfg.n_impostor_pairs) {
        if (++guard > 100 * cfg.n_impostor_pairs + 1000)
            throw ConfigError("build_set_pairs: cannot find cross-identity set pairs");
        auto i = static_cast<std::size_t>(rng.below(sets.size()));
        auto j = static_cast<std::size_t>(rng.below(sets.size()));
        if (sets[i].identity_id == sets[j].identity_id) continue;
        pairs.push_back({std::min(i, j), std::max(i, j), false});
        ++n;
    }
    return pairs;
}

} // namespace pcconf
