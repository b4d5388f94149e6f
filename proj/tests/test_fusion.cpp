#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "pcconf/confnet.hpp"
#include "pcconf/fusion.hpp"
#include "pcconf/world.hpp"

using namespace pcconf;

namespace {

FaceSet tiny_set() {
    FaceSet s;
    s.set_id = 7;
    s.identity_id = 3;
    s.image_ids = {10, 11, 12};
    s.embeddings = {
        normalized(Vec{1.0, 0.0, 0.0}),
        normalized(Vec{0.0, 1.0, 0.0}),
        normalized(Vec{1.0, 1.0, 0.0}),
    };
    s.confidences = {0.5, 0.25, 0.25};
    return s;
}

} // namespace

TEST_CASE("confidence-weighted fusion is the plain weighted mean, unnormalized") {
    FaceSet s = tiny_set();
    SetDescriptor d = fuse(s);
    REQUIRE(d.weight_sum == Catch::Approx(1.0).margin(1e-15));
    double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Vec expect{(0.5 * 1.0 + 0.25 * 0.0 + 0.25 * inv_sqrt2) / 1.0,
               (0.5 * 0.0 + 0.25 * 1.0 + 0.25 * inv_sqrt2) / 1.0, 0.0};
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE(d.v[i] == Catch::Approx(expect[i]).margin(1e-15));
    REQUIRE(nrm2(d.v) < 1.0); // no renormalization happens

    SECTION("uniform fusion weights everyone equally") {
        SetDescriptor u = fuse_uniform(s);
        for (std::size_t i = 0; i < 3; ++i) {
            double mean = (s.embeddings[0][i] + s.embeddings[1][i] + s.embeddings[2][i]) / 3.0;
            REQUIRE(u.v[i] == Catch::Approx(mean).margin(1e-15));
        }
        FaceSet eq = s;
        eq.confidences = {0.4, 0.4, 0.4};
        SetDescriptor ew = fuse(eq);
        for (std::size_t i = 0; i < 3; ++i)
            REQUIRE(ew.v[i] == Catch::Approx(u.v[i]).margin(1e-12));
    }
}

TEST_CASE("face set validation") {
    FaceSet s = tiny_set();
    REQUIRE_NOTHROW(s.validate());

    SECTION("no members") {
        s.image_ids.clear();
        s.embeddings.clear();
        s.confidences.clear();
        REQUIRE_THROWS_AS(s.validate(), ConfigError);
    }
    SECTION("non-unit member") {
        s.embeddings[1] = Vec{0.5, 0.5, 0.5};
        REQUIRE_THROWS_AS(s.validate(), ConfigError);
    }
    SECTION("confidence outside the open interval") {
        s.confidences[0] = 0.0;
        REQUIRE_THROWS_AS(s.validate(), ConfigError);
        s.confidences[0] = 1.0;
        REQUIRE_THROWS_AS(s.validate(), ConfigError);
    }
    SECTION("mismatched member arrays") {
        s.confidences.pop_back();
        REQUIRE_THROWS_AS(s.validate(), ConfigError);
    }
}

TEST_CASE("closed-to-open confidence clamp") {
    REQUIRE(confidence_closed_to_open(0.0) == 1e-15);
    REQUIRE(confidence_closed_to_open(1.0) == 1.0 - 1e-15);
    REQUIRE(confidence_closed_to_open(0.37) == 0.37);
}

namespace {

World fusion_world(std::uint64_t seed) {
    WorldConfig cfg;
    cfg.ambient_dim = 32;
    cfg.identity_dim = 5;
    cfg.num_identities = 30;
    cfg.rng_seed = seed;
    return generate_world(cfg);
}

} // namespace

TEST_CASE("set protocol construction") {
    World w = fusion_world(17);
    auto eval = generate_eval_records(w, 80);
    SetProtocolConfig sc;
    sc.sets_per_identity = 3;
    sc.size_min = 2;
    sc.size_max = 8;
    sc.low_fraction = 0.3;
    sc.n_impostor_pairs = 500;
    sc.seed = 5;

    std::vector<FaceSet> sets = build_face_sets(eval, sc);
    REQUIRE(sets.size() == 30 * 3);

    std::map<std::uint64_t, double> q_of;
    for (const auto& r : eval) q_of[r.image_id] = r.latent_quality;

    for (const auto& s : sets) {
        REQUIRE(s.image_ids.size() >= sc.size_min);
        REQUIRE(s.image_ids.size() <= sc.size_max);
        std::size_t low = 0;
        std::set<std::uint64_t> uniq;
        for (std::size_t i = 0; i < s.image_ids.size(); ++i) {
            uniq.insert(s.image_ids[i]);
            if (q_of.at(s.image_ids[i]) < sc.low_quality_max_q) ++low;
            if (i > 0) REQUIRE(s.image_ids[i - 1] < s.image_ids[i]);
        }
        REQUIRE(uniq.size() == s.image_ids.size());
        std::size_t need = static_cast<std::size_t>(
            std::ceil(sc.low_fraction * static_cast<double>(s.image_ids.size())));
        REQUIRE(low >= need);
    }

    SECTION("deterministic under the same seed") {
        auto again = build_face_sets(eval, sc);
        REQUIRE(again.size() == sets.size());
        for (std::size_t i = 0; i < sets.size(); ++i)
            REQUIRE(again[i].image_ids == sets[i].image_ids);
    }

    SECTION("pairs: genuine are exhaustive per identity, impostors cross identities") {
        auto pairs = build_set_pairs(sets, sc);
        std::size_t genuine = 0;
        for (const auto& p : pairs) {
            if (p.is_genuine) {
                REQUIRE(sets[p.a].identity_id == sets[p.b].identity_id);
                ++genuine;
            } else {
                REQUIRE(sets[p.a].identity_id != sets[p.b].identity_id);
            }
        }
        REQUIRE(genuine == 30 * 3); // C(3,2) per identity
        REQUIRE(pairs.size() - genuine == sc.n_impostor_pairs);
    }

    SECTION("insufficient low-quality pool is a config error") {
        SetProtocolConfig greedy = sc;
        greedy.low_quality_max_q = 1e-9; // nobody qualifies
        REQUIRE_THROWS_AS(build_face_sets(eval, greedy), ConfigError);
    }
}

TEST_CASE("confidence fills") {
    World w = fusion_world(23);
    auto eval = generate_eval_records(w, 80);
    SetProtocolConfig sc;
    sc.sets_per_identity = 2;
    sc.size_max = 10;
    sc.n_impostor_pairs = 100;
    sc.seed = 9;
    std::vector<FaceSet> sets = build_face_sets(eval, sc);

    SECTION("model fill matches forward outputs") {
        ConfidenceModel model = make_model(32, 8, 8, 4);
        std::vector<FaceSet> filled = sets;
        fill_confidences_from_model(filled, model);
        for (const auto& s : filled) {
            REQUIRE_NOTHROW(s.validate());
            for (std::size_t i = 0; i < s.embeddings.size(); ++i)
                REQUIRE(s.confidences[i] == forward(model, s.embeddings[i]));
        }
    }
    SECTION("oracle fill is the clamped projection norm") {
        std::vector<FaceSet> filled = sets;
        fill_confidences_oracle(filled, w.basis);
        for (const auto& s : filled) {
            REQUIRE_NOTHROW(s.validate());
            for (std::size_t i = 0; i < s.embeddings.size(); ++i)
                REQUIRE(s.confidences[i] ==
                        confidence_closed_to_open(oracle_confidence(s.embeddings[i], w.basis)));
        }
    }
}

TEST_CASE("oracle weighting points fused descriptors closer to the prototype") {
    World w = fusion_world(41);
    auto eval = generate_eval_records(w, 80);
    SetProtocolConfig sc;
    sc.sets_per_identity = 4;
    sc.size_max = 8;
    sc.low_fraction = 0.34;
    sc.n_impostor_pairs = 10;
    sc.seed = 13;
    std::vector<FaceSet> sets = build_face_sets(eval, sc);
    std::vector<FaceSet> oracle_sets = sets;
    fill_confidences_oracle(oracle_sets, w.basis);

    std::map<std::uint64_t, double> q_of;
    for (const auto& r : eval) q_of[r.image_id] = r.latent_quality;
    std::map<std::uint64_t, const Identity*> ident;
    for (const auto& id : w.identities) ident[id.id] = &id;

    std::size_t considered = 0, improved = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        bool has_bad = false;
        for (auto img : sets[i].image_ids) has_bad |= q_of.at(img) < 0.2;
        if (!has_bad) continue;
        ++considered;
        const Vec& mu = ident.at(sets[i].identity_id)->prototype;
        Vec u = fuse_uniform(sets[i]).v;
        Vec o = fuse(oracle_sets[i]).v;
        double cu = dot(u, mu) / nrm2(u);
        double co = dot(o, mu) / nrm2(o);
        if (co >= cu) ++improved;
    }
    REQUIRE(considered >= 20);
    REQUIRE(static_cast<double>(improved) >= 0.95 * static_cast<double>(considered));
}

TEST_CASE("set verification produces a monotone ROC and respects weighting") {
    World w = fusion_world(29);
    auto eval = generate_eval_records(w, 80);
    SetProtocolConfig sc;
    sc.sets_per_identity = 3;
    sc.size_max = 8;
    sc.n_impostor_pairs = 2000;
    sc.seed = 3;
    std::vector<FaceSet> sets = build_face_sets(eval, sc);
    auto pairs = build_set_pairs(sets, sc);

    RocSummary uni = set_verification(sets, pairs, SetWeighting::uniform, default_far_targets());
    double prev = 0.0;
    for (const auto& p : uni.points) {
        REQUIRE(p.tar >= prev);
        prev = p.tar;
    }

    std::vector<FaceSet> oracle_sets = sets;
    fill_confidences_oracle(oracle_sets, w.basis);
    RocSummary orc =
        set_verification(oracle_sets, pairs, SetWeighting::confidence, default_far_targets());
    REQUIRE(orc.n_genuine == uni.n_genuine);
    REQUIRE(orc.n_impostor == uni.n_impostor);
    // the confidence path must actually use the confidences
    RocSummary same =
        set_verification(oracle_sets, pairs, SetWeighting::uniform, default_far_targets());
    for (std::size_t i = 0; i < same.points.size(); ++i)
        REQUIRE(same.points[i].tar == uni.points[i].tar);
}
