#pragma once

// Command implementations behind the CLI: simulate -> pairscore -> train ->
// eval-covariate / eval-fusion / rank -> report. Each command reads its
// prerequisites from the run directory, writes its declared artifacts plus
// a manifest JSON (config snapshot, seed, artifact checksums; deliberately
// no timestamps), and is a pure function of (config, seed) — thread count
// never changes bytes.

#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pcconf/config.hpp"
#include "pcconf/confnet.hpp"
#include "pcconf/fusion.hpp"
#include "pcconf/io.hpp"
#include "pcconf/metrics.hpp"
#include "pcconf/pairgen.hpp"
#include "pcconf/world.hpp"

namespace pcconf {

inline constexpr const char* kToolVersion = "1.0.0";

namespace files {
inline constexpr const char* train_embeddings = "train_embeddings.pceb";
inline constexpr const char* eval_embeddings = "eval_embeddings.pceb";
inline constexpr const char* world_basis = "world_basis.pceb";
inline constexpr const char* prototypes = "prototypes.pceb";
inline constexpr const char* folds = "folds.csv";
inline constexpr const char* recognizer_a = "recognizer_a.pceb";
inline constexpr const char* recognizer_b = "recognizer_b.pceb";
inline constexpr const char* pairs = "pairs.csv";
inline constexpr const char* model = "model.pcnm";
inline constexpr const char* model_meta = "model_meta.json";
inline constexpr const char* curve_learned = "covariate_curve_learned.csv";
inline constexpr const char* curve_oracle = "covariate_curve_oracle.csv";
inline constexpr const char* covariate_metrics = "covariate_metrics.json";
inline constexpr const char* set_manifest = "sets.csv";
inline constexpr const char* fused_uniform = "fused_uniform.pceb";
inline constexpr const char* fused_confidence = "fused_confidence.pceb";
inline constexpr const char* fused_oracle = "fused_oracle.pceb";
inline constexpr const char* fusion_metrics = "fusion_metrics.json";
inline constexpr const char* ranked = "ranked.csv";
inline constexpr const char* rank_buckets = "rank_buckets.json";
inline constexpr const char* report_text = "report.txt";
inline constexpr const char* report_reject = "reject_table.csv";
inline constexpr const char* report_bins = "bins.csv";
inline constexpr const char* report_fusion = "fusion_roc.csv";
} // namespace files

using ojson = nlohmann::ordered_json;

// ---- helpers ---------------------------------------------------------------

// index-parallel loop; the body must touch only its own slot i
template <class F>
inline void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    unsigned nw = std::min<unsigned>(threads, static_cast<unsigned>(n));
    std::size_t chunk = (n + nw - 1) / nw;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nw; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&f, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline void write_manifest(const RunConfig& cfg, const std::string& command,
                           const std::filesystem::path& dir,
                           const std::vector<std::string>& artifacts) {
    ojson j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["formats"] = {{"pceb", kEmbeddingFormatVersion}, {"pcnm", kModelFormatVersion}};
    j["seed"] = cfg.seed;
    ojson conf = ojson::object();
    for (const auto& [k, v] : config_snapshot(cfg)) conf[k] = v;
    j["config"] = std::move(conf);
    ojson arts = ojson::object();
    for (const std::string& a : artifacts) arts[a] = hex64(file_checksum(dir / a));
    j["artifacts"] = std::move(arts);
    write_text(dir / ("manifest_" + command + ".json"), j.dump(2) + "\n");
}

inline std::vector<std::uint64_t> unique_identities(const std::vector<ImageRecord>& records) {
    std::vector<std::uint64_t> ids;
    for (const auto& r : records) ids.push_back(r.identity_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

inline Mat basis_from_store(const EmbeddingStore& store) {
    if (store.records.empty()) throw MissingArtifactError("basis store is empty");
    Mat B(store.dim, store.records.size());
    for (std::size_t j = 0; j < store.records.size(); ++j)
        for (std::size_t r = 0; r < store.dim; ++r) B.row(r)[j] = store.records[j].embedding[r];
    return B;
}

inline std::vector<ImageRecord> basis_to_records(const Mat& B, std::uint64_t identity,
                                                 const Vec* eigenvalues) {
    std::vector<ImageRecord> rows(B.cols);
    for (std::size_t j = 0; j < B.cols; ++j) {
        rows[j].image_id = j;
        rows[j].identity_id = identity;
        rows[j].latent_quality = eigenvalues ? (*eigenvalues)[j] : 0.0;
        rows[j].degradations = 0;
        rows[j].embedding.resize(B.rows);
        for (std::size_t r = 0; r < B.rows; ++r) rows[j].embedding[r] = B.row(r)[j];
    }
    return rows;
}

inline Recognizer read_recognizer(const std::filesystem::path& path, std::uint32_t fold) {
    EmbeddingStore store = read_embeddings(path);
    Recognizer rec;
    rec.basis = basis_from_store(store);
    rec.fold = fold;
    rec.eigenvalues.resize(store.records.size());
    for (std::size_t j = 0; j < store.records.size(); ++j)
        rec.eigenvalues[j] = store.records[j].latent_quality;
    return rec;
}

inline void write_folds_csv(const std::filesystem::path& path, const FoldSplit& split) {
    std::vector<std::pair<std::uint64_t, int>> rows;
    for (auto id : split.fold_a) rows.emplace_back(id, 0);
    for (auto id : split.fold_b) rows.emplace_back(id, 1);
    std::sort(rows.begin(), rows.end());
    std::string text = "identity,fold\n";
    for (auto& [id, f] : rows)
        text += std::to_string(id) + "," + std::to_string(f) + "\n";
    write_text(path, text);
}

inline std::map<std::uint64_t, std::uint32_t> read_folds_csv(const std::filesystem::path& path) {
    std::string text = read_text(path);
    std::map<std::uint64_t, std::uint32_t> folds;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, (nl == std::string::npos ? text.size() : nl) - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        if (header) {
            if (line != "identity,fold")
                throw MissingArtifactError("bad folds header: " + path.string());
            header = false;
            continue;
        }
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 2) throw MissingArtifactError("bad folds row: " + path.string());
        folds[parse_u64(f[0], "folds")] = static_cast<std::uint32_t>(parse_u64(f[1], "folds"));
    }
    if (folds.empty()) throw MissingArtifactError("empty folds table: " + path.string());
    return folds;
}

// ---- JSON views of metric structures ----------------------------------------

inline ojson roc_to_json(const RocSummary& roc) {
    ojson j;
    j["n_genuine"] = roc.n_genuine;
    j["n_impostor"] = roc.n_impostor;
    ojson pts = ojson::array();
    for (const RocPoint& p : roc.points) {
        ojson o;
        o["far_target"] = p.far_target;
        o["threshold"] = p.threshold;
        o["achieved_far"] = p.achieved_far;
        o["tar"] = p.tar;
        pts.push_back(std::move(o));
    }
    j["points"] = std::move(pts);
    return j;
}

inline ojson curve_to_json(const ErrorRejectCurve& curve) {
    ojson j;
    j["far_targets"] = curve.far_targets;
    ojson pts = ojson::array();
    for (const RejectPoint& p : curve.points) {
        ojson o;
        o["r"] = p.r;
        o["n_retained"] = p.n_retained;
        o["genuine_empty"] = p.genuine_empty;
        o["impostor_empty"] = p.impostor_empty;
        o["roc"] = roc_to_json(p.roc);
        pts.push_back(std::move(o));
    }
    j["points"] = std::move(pts);
    return j;
}

inline ojson bins_to_json(const CorrelationBins& bins) {
    ojson j;
    j["conf_lo"] = bins.conf_lo;
    j["conf_hi"] = bins.conf_hi;
    j["degenerate_range"] = bins.degenerate_range;
    j["total"] = bins.total;
    j["count"] = bins.count;
    j["mean_similarity"] = bins.mean_similarity;
    j["local_violations"] = count_local_violations(bins);
    return j;
}

// ---- commands ---------------------------------------------------------------

inline void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& dir) {
    World w = generate_world(cfg.world, cfg.threads);
    std::vector<ImageRecord> eval =
        generate_eval_records(w, cfg.eval_images_per_identity, cfg.threads);

    auto dim = static_cast<std::uint32_t>(cfg.world.ambient_dim);
    write_embeddings(dir / files::train_embeddings, dim, w.records);
    write_embeddings(dir / files::eval_embeddings, dim, eval);
    write_embeddings(dir / files::world_basis, dim, basis_to_records(w.basis, 0, nullptr));
    std::vector<ImageRecord> protos(w.identities.size());
    for (std::size_t i = 0; i < w.identities.size(); ++i) {
        protos[i].image_id = w.identities[i].id;
        protos[i].identity_id = w.identities[i].id;
        protos[i].latent_quality = 1.0;
        protos[i].embedding = w.identities[i].prototype;
    }
    write_embeddings(dir / files::prototypes, dim, protos);
    write_manifest(cfg, "simulate", dir,
                   {files::train_embeddings, files::eval_embeddings, files::world_basis,
                    files::prototypes});
}

inline void cmd_pairscore(const RunConfig& cfg, const std::filesystem::path& dir) {
    EmbeddingStore store = read_embeddings(dir / files::train_embeddings);
    FoldSplit split = split_folds(unique_identities(store.records), cfg.seed);
    std::map<std::uint64_t, std::uint32_t> fold_of;
    for (auto id : split.fold_a) fold_of[id] = 0;
    for (auto id : split.fold_b) fold_of[id] = 1;

    std::vector<ImageRecord> rec_a, rec_b;
    for (const auto& r : store.records)
        (fold_of.at(r.identity_id) == 0 ? rec_a : rec_b).push_back(r);

    std::size_t k = cfg.world.identity_dim;
    Recognizer fit_a = fit_recognizer(rec_a, k, 0, cfg.seed);
    Recognizer fit_b = fit_recognizer(rec_b, k, 1, cfg.seed);

    std::vector<PairSample> all = score_mated_pairs(fit_b, rec_a, 0, cfg.pairs);
    std::vector<PairSample> from_b = score_mated_pairs(fit_a, rec_b, 1, cfg.pairs);
    all.insert(all.end(), from_b.begin(), from_b.end());
    std::sort(all.begin(), all.end(), [](const PairSample& x, const PairSample& y) {
        if (x.identity != y.identity) return x.identity < y.identity;
        if (x.image_a != y.image_a) return x.image_a < y.image_a;
        return x.image_b < y.image_b;
    });

    write_folds_csv(dir / files::folds, split);
    auto dim = store.dim;
    write_embeddings(dir / files::recognizer_a, dim,
                     basis_to_records(fit_a.basis, 0, &fit_a.eigenvalues));
    write_embeddings(dir / files::recognizer_b, dim,
                     basis_to_records(fit_b.basis, 1, &fit_b.eigenvalues));
    write_pairs_csv(dir / files::pairs, all);
    write_manifest(cfg, "pairscore", dir,
                   {files::folds, files::recognizer_a, files::recognizer_b, files::pairs});
}

inline void cmd_train(const RunConfig& cfg, const std::filesystem::path& dir) {
    EmbeddingStore store = read_embeddings(dir / files::train_embeddings);
    std::vector<PairSample> corpus = read_pairs_csv(dir / files::pairs);
    if (corpus.empty()) throw MissingArtifactError("pair corpus is empty");

    Mat X(store.records.size(), store.dim);
    std::map<std::uint64_t, std::size_t> row_of;
    for (std::size_t i = 0; i < store.records.size(); ++i) {
        std::copy_n(store.records[i].embedding.data(), store.dim, X.row(i));
        row_of[store.records[i].image_id] = i;
    }
    std::vector<TrainPair> tpairs(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto a = row_of.find(corpus[i].image_a), b = row_of.find(corpus[i].image_b);
        if (a == row_of.end() || b == row_of.end())
            throw MissingArtifactError("pair corpus references unknown image ids");
        tpairs[i] = {a->second, b->second, corpus[i].identity, corpus[i].y};
    }

    ConfidenceModel model =
        make_model(store.dim, cfg.hidden1, 128, derive_seed(cfg.seed, "model/init"));
    TrainReport report = train(model, X, tpairs, cfg.train);

    write_model(dir / files::model, model);
    ojson meta;
    meta["input_dim"] = store.dim;
    meta["hidden1"] = cfg.hidden1;
    meta["hidden2"] = 128;
    ojson tc;
    tc["batch_size"] = cfg.train.batch_size;
    tc["initial_lr"] = cfg.train.initial_lr;
    tc["decay_factor"] = cfg.train.decay_factor;
    tc["max_decays"] = cfg.train.max_decays;
    tc["patience"] = cfg.train.patience;
    tc["rel_tol"] = cfg.train.rel_tol;
    tc["max_epochs"] = cfg.train.max_epochs;
    tc["seed"] = cfg.train.seed;
    meta["train_config"] = std::move(tc);
    meta["epochs"] = report.epochs;
    meta["epoch_loss"] = report.epoch_loss;
    ojson evs = ojson::array();
    for (const LrEvent& e : report.lr_events) {
        ojson o;
        o["epoch"] = e.epoch;
        o["new_lr"] = e.new_lr;
        evs.push_back(std::move(o));
    }
    meta["lr_events"] = std::move(evs);
    meta["final_loss"] = report.epoch_loss.back();
    meta["parameter_checksum"] = hex64(report.final_checksum);
    write_text(dir / files::model_meta, meta.dump(2) + "\n");
    write_manifest(cfg, "train", dir, {files::model, files::model_meta});
}

struct CovariateEvalData {
    EmbeddingStore store;
    std::vector<double> conf;       // learned confidence per record
    std::vector<Vec> proj;          // normalized opposite-recognizer projection
    std::vector<ScoredPair> learned;  // sampled protocol pairs, learned confidence
    std::vector<ScoredPair> oracle;   // same pairs, confidence = min latent q
};

inline CovariateEvalData build_covariate_eval(const RunConfig& cfg,
                                              const std::filesystem::path& dir) {
    CovariateEvalData out;
    out.store = read_embeddings(dir / files::eval_embeddings);
    ConfidenceModel model = read_model(dir / files::model);
    Recognizer rec_a = read_recognizer(dir / files::recognizer_a, 0);
    Recognizer rec_b = read_recognizer(dir / files::recognizer_b, 1);
    auto fold_of = read_folds_csv(dir / files::folds);

    const auto& records = out.store.records;
    if (model.input_dim() != out.store.dim)
        throw MissingArtifactError("model and embedding store disagree on dimension");

    out.conf.resize(records.size());
    out.proj.resize(records.size());
    parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
        const ImageRecord& r = records[i];
        const Recognizer& rec = fold_of.at(r.identity_id) == 0 ? rec_b : rec_a;
        out.conf[i] = forward(model, r.embedding);
        out.proj[i] = normalized(mat_tvec(rec.basis, r.embedding.data()));
    });

    // sampled protocol, split across the two folds
    std::vector<ImageRecord> fold_records[2];
    for (const auto& r : records) fold_records[fold_of.at(r.identity_id)].push_back(r);
    std::map<std::uint64_t, double> q_of;
    for (const auto& r : records) q_of[r.image_id] = r.latent_quality;

    for (int f = 0; f < 2; ++f) {
        CovariateConfig cc = cfg.protocol;
        cc.n_genuine = f == 0 ? (cfg.protocol.n_genuine + 1) / 2 : cfg.protocol.n_genuine / 2;
        cc.n_impostor = f == 0 ? (cfg.protocol.n_impostor + 1) / 2 : cfg.protocol.n_impostor / 2;
        cc.seed = derive_seed(cfg.seed, f == 0 ? "covariate/fold-a" : "covariate/fold-b");
        const Recognizer& rec = f == 0 ? rec_b : rec_a;
        auto part = build_covariate_protocol(fold_records[f], rec, model, cc);
        out.learned.insert(out.learned.end(), part.begin(), part.end());
    }
    out.oracle.reserve(out.learned.size());
    for (const ScoredPair& p : out.learned)
        out.oracle.emplace_back(p.image_a, p.image_b, p.similarity, q_of.at(p.image_a),
                                q_of.at(p.image_b), p.is_genuine);
    return out;
}

inline void cmd_eval_covariate(const RunConfig& cfg, const std::filesystem::path& dir) {
    CovariateEvalData data = build_covariate_eval(cfg, dir);

    auto grid = cfg.reject_grid();
    ErrorRejectCurve learned = error_vs_reject(data.learned, grid, cfg.far_targets);
    ErrorRejectCurve oracle = error_vs_reject(data.oracle, grid, cfg.far_targets);

    std::vector<double> quality(data.store.records.size());
    for (std::size_t i = 0; i < quality.size(); ++i)
        quality[i] = data.store.records[i].latent_quality;
    double rho = spearman(data.conf, quality);

    CorrelationBins bins = mated_bins_exhaustive(data.store.records, data.conf, data.proj);

    write_reject_curve_csv(dir / files::curve_learned, learned);
    write_reject_curve_csv(dir / files::curve_oracle, oracle);
    ojson j;
    j["spearman_confidence_quality"] = rho;
    j["learned_curve"] = curve_to_json(learned);
    j["oracle_curve"] = curve_to_json(oracle);
    j["bins"] = bins_to_json(bins);
    write_text(dir / files::covariate_metrics, j.dump(2) + "\n");
    write_manifest(cfg, "eval-covariate", dir,
                   {files::curve_learned, files::curve_oracle, files::covariate_metrics});
}

inline void cmd_eval_fusion(const RunConfig& cfg, const std::filesystem::path& dir) {
    EmbeddingStore store = read_embeddings(dir / files::eval_embeddings);
    ConfidenceModel model = read_model(dir / files::model);
    Mat basis = basis_from_store(read_embeddings(dir / files::world_basis));

    std::vector<FaceSet> sets = build_face_sets(store.records, cfg.sets);
    std::vector<SetPair> set_pairs = build_set_pairs(sets, cfg.sets);

    std::vector<FaceSet> sets_model = sets;
    fill_confidences_from_model(sets_model, model);
    std::vector<FaceSet> sets_oracle = sets;
    fill_confidences_oracle(sets_oracle, basis);

    RocSummary uni = set_verification(sets, set_pairs, SetWeighting::uniform, cfg.far_targets);
    RocSummary conf =
        set_verification(sets_model, set_pairs, SetWeighting::confidence, cfg.far_targets);
    RocSummary orc =
        set_verification(sets_oracle, set_pairs, SetWeighting::confidence, cfg.far_targets);

    auto descriptors = [&](const std::vector<FaceSet>& ss, bool uniform) {
        std::vector<SetDescriptor> d(ss.size());
        for (std::size_t i = 0; i < ss.size(); ++i)
            d[i] = uniform ? fuse_uniform(ss[i]) : fuse(ss[i]);
        return d;
    };
    write_set_manifest_csv(dir / files::set_manifest, sets);
    write_descriptors(dir / files::fused_uniform, store.dim, sets, descriptors(sets, true));
    write_descriptors(dir / files::fused_confidence, store.dim, sets_model,
                      descriptors(sets_model, false));
    write_descriptors(dir / files::fused_oracle, store.dim, sets_oracle,
                      descriptors(sets_oracle, false));

    std::size_t n_gen = 0;
    for (const auto& p : set_pairs) n_gen += p.is_genuine;
    ojson j;
    j["n_sets"] = sets.size();
    j["n_genuine_pairs"] = n_gen;
    j["n_impostor_pairs"] = set_pairs.size() - n_gen;
    j["uniform"] = roc_to_json(uni);
    j["confidence"] = roc_to_json(conf);
    j["oracle_confidence"] = roc_to_json(orc);
    write_text(dir / files::fusion_metrics, j.dump(2) + "\n");
    write_manifest(cfg, "eval-fusion", dir,
                   {files::set_manifest, files::fused_uniform, files::fused_confidence,
                    files::fused_oracle, files::fusion_metrics});
}

inline void cmd_rank(const RunConfig& cfg, const std::filesystem::path& dir) {
    EmbeddingStore store = read_embeddings(dir / files::eval_embeddings);
    ConfidenceModel model = read_model(dir / files::model);
    if (model.input_dim() != store.dim)
        throw MissingArtifactError("model and embedding store disagree on dimension");

    std::vector<double> conf(store.records.size());
    parallel_for(store.records.size(), cfg.threads,
                 [&](std::size_t i) { conf[i] = forward(model, store.records[i].embedding); });

    std::vector<std::size_t> order(store.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (conf[i] != conf[j]) return conf[i] < conf[j];
        return store.records[i].image_id < store.records[j].image_id;
    });

    std::string csv = "rank,image_id,identity,confidence,quality,degradations\n";
    for (std::size_t r = 0; r < order.size(); ++r) {
        const ImageRecord& rec = store.records[order[r]];
        csv += std::to_string(r) + "," + std::to_string(rec.image_id) + "," +
               std::to_string(rec.identity_id) + "," + format_double(conf[order[r]]) + "," +
               format_double(rec.latent_quality) + "," + std::to_string(rec.degradations) + "\n";
    }
    write_text(dir / files::ranked, csv);

    // three confidence ranges with seeded per-bucket samples
    std::vector<std::size_t> bucket_members[3];
    for (std::size_t r = 0; r < order.size(); ++r) {
        double c = conf[order[r]];
        int b = c < cfg.rank.low_max ? 0 : (c < cfg.rank.high_min ? 1 : 2);
        bucket_members[b].push_back(order[r]);
    }
    static const char* names[3] = {"low", "mid", "high"};
    ojson j;
    j["boundaries"] = {{"low_max", cfg.rank.low_max}, {"high_min", cfg.rank.high_min}};
    ojson buckets = ojson::object();
    for (int b = 0; b < 3; ++b) {
        ojson o;
        o["count"] = bucket_members[b].size();
        std::size_t want = std::min(cfg.rank.samples_per_bucket, bucket_members[b].size());
        std::vector<std::uint64_t> sample;
        if (want > 0) {
            Rng rng = Rng(cfg.seed).stream("rank/sample", static_cast<std::uint64_t>(b));
            for (auto i : rng.sample_distinct(static_cast<std::uint32_t>(bucket_members[b].size()),
                                              static_cast<std::uint32_t>(want)))
                sample.push_back(store.records[bucket_members[b][i]].image_id);
            std::sort(sample.begin(), sample.end());
        }
        o["sample_image_ids"] = sample;
        buckets[names[b]] = std::move(o);
    }
    j["buckets"] = std::move(buckets);
    write_text(dir / files::rank_buckets, j.dump(2) + "\n");
    write_manifest(cfg, "rank", dir, {files::ranked, files::rank_buckets});
}

inline ojson parse_json_artifact(const std::filesystem::path& path) {
    try {
        return ojson::parse(read_text(path));
    } catch (const nlohmann::json::exception&) {
        throw MissingArtifactError("corrupt JSON artifact: " + path.string());
    }
}

inline void cmd_report(const RunConfig& cfg, const std::filesystem::path& dir) {
    ojson cov = parse_json_artifact(dir / files::covariate_metrics);
    ojson fus = parse_json_artifact(dir / files::fusion_metrics);

    // rejection table at coarse r values present in the stored grid
    std::vector<double> table_r = {0.0, 0.1, 0.2, 0.3, 0.4};
    std::string reject_csv = "source,r,far_target,tar\n";
    std::string text;
    text += "pcconf run report\n";
    text += "=================\n\n";
    for (const char* source : {"learned", "oracle"}) {
        const ojson& curve = cov[std::string(source) + "_curve"];
        text += std::string("verification under rejection (") + source + " confidence)\n";
        text += "r";
        for (const auto& t : curve["far_targets"])
            text += "\tTAR@" + format_double(t.get<double>());
        text += "\n";
        for (double rt : table_r) {
            const ojson* found = nullptr;
            for (const auto& pt : curve["points"])
                if (std::abs(pt["r"].get<double>() - rt) < 1e-9) {
                    found = &pt;
                    break;
                }
            if (!found) continue;
            text += format_double(rt);
            for (const auto& p : (*found)["roc"]["points"]) {
                double tar = p["tar"].get<double>();
                text += "\t" + format_double(tar);
                reject_csv += std::string(source) + "," + format_double(rt) + "," +
                              format_double(p["far_target"].get<double>()) + "," +
                              format_double(tar) + "\n";
            }
            text += "\n";
        }
        text += "\n";
    }

    text += "set fusion (TAR at FAR targets)\n";
    std::string fusion_csv = "weighting,far_target,threshold,achieved_far,tar\n";
    for (const char* w : {"uniform", "confidence", "oracle_confidence"}) {
        text += w;
        for (const auto& p : fus[w]["points"]) {
            text += "\t" + format_double(p["tar"].get<double>());
            fusion_csv += std::string(w) + "," + format_double(p["far_target"].get<double>()) +
                          "," + format_double(p["threshold"].get<double>()) + "," +
                          format_double(p["achieved_far"].get<double>()) + "," +
                          format_double(p["tar"].get<double>()) + "\n";
        }
        text += "\n";
    }
    text += "\n";

    const ojson& bins = cov["bins"];
    text += "confidence/similarity bins: total=" + std::to_string(bins["total"].get<std::uint64_t>()) +
            " violations=" + std::to_string(bins["local_violations"].get<std::size_t>()) + "\n";
    text += "spearman(confidence, quality) = " +
            format_double(cov["spearman_confidence_quality"].get<double>()) + "\n";

    double lo = bins["conf_lo"].get<double>(), hi = bins["conf_hi"].get<double>();
    std::string bins_csv = "bin,conf_lo,conf_hi,count,mean_similarity\n";
    for (std::size_t b = 0; b < bins["count"].size(); ++b) {
        double w = (hi - lo) / 100.0;
        bins_csv += std::to_string(b) + "," + format_double(lo + static_cast<double>(b) * w) +
                    "," + format_double(lo + static_cast<double>(b + 1) * w) + "," +
                    std::to_string(bins["count"][b].get<std::uint64_t>()) + "," +
                    format_double(bins["mean_similarity"][b].get<double>()) + "\n";
    }

    write_text(dir / files::report_text, text);
    write_text(dir / files::report_reject, reject_csv);
    write_text(dir / files::report_bins, bins_csv);
    write_text(dir / files::report_fusion, fusion_csv);
    write_manifest(cfg, "report", dir,
                   {files::report_text, files::report_reject, files::report_bins,
                    files::report_fusion});
}

} // namespace pcconf
