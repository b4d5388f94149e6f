#pragma once

// Run configuration: a flat `section.key = value` text file. Every key has
// a default, unknown keys are rejected, and command-line `key=value`
// overrides go through the same table. The effective configuration
// snapshots to a canonical key order for manifests.

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "pcconf/confnet.hpp"
#include "pcconf/errors.hpp"
#include "pcconf/fusion.hpp"
#include "pcconf/metrics.hpp"
#include "pcconf/pairgen.hpp"
#include "pcconf/text.hpp"
#include "pcconf/world.hpp"

namespace pcconf {

struct RankConfig {
    double low_max = 0.5;    // confidence < low_max  -> "low" bucket
    double high_min = 0.8;   // confidence >= high_min -> "high" bucket
    std::size_t samples_per_bucket = 8;
};

struct RunConfig {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out_dir = "out";
    bool out_dir_explicit = false;  // set via file/override (not the default)

    WorldConfig world;
    std::size_t eval_images_per_identity = 400;
    PairGenConfig pairs;
    std::size_t hidden1 = 128;   // first hidden width; second is fixed at 128
    TrainConfig train;
    CovariateConfig protocol;
    std::vector<double> far_targets = default_far_targets();
    double reject_max = 0.4;
    double reject_step = 0.01;
    SetProtocolConfig sets;
    RankConfig rank;

    std::vector<double> reject_grid() const {
        std::vector<double> g;
        auto n = static_cast<std::size_t>(std::llround(reject_max / reject_step));
        for (std::size_t i = 0; i <= n; ++i)
            g.push_back(static_cast<double>(i) * reject_step);
        return g;
    }

    void validate() const {
        world.validate();
        train.validate();
        sets.validate();
        if (threads == 0) throw ConfigError("run.threads must be positive");
        if (eval_images_per_identity == 0)
            throw ConfigError("world.eval_images_per_identity must be positive");
        if (hidden1 == 0) throw ConfigError("train.hidden1 must be positive");
        if (protocol.n_genuine == 0 || protocol.n_impostor == 0)
            throw ConfigError("protocol pair counts must be positive");
        if (far_targets.empty()) throw ConfigError("protocol.far_targets must be nonempty");
        for (double t : far_targets)
            if (t < 0.0 || t > 1.0) throw ConfigError("far targets must lie in [0,1]");
        if (!(reject_step > 0.0) || !(reject_max >= 0.0) || reject_max >= 1.0)
            throw ConfigError("reject grid: need step > 0 and 0 <= max < 1");
        if (!(rank.low_max > 0.0) || !(rank.low_max < rank.high_min) || !(rank.high_min < 1.0))
            throw ConfigError("rank buckets: need 0 < low_max < high_min < 1");
    }
};

namespace detail {

struct ConfigKey {
    const char* name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline bool parse_bool(std::string_view v, const std::string& what) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("bad boolean '" + std::string(v) + "' in " + what + " (use true/false)");
}

inline std::vector<double> parse_double_list(std::string_view v, const std::string& what) {
    std::vector<double> out;
    std::size_t start = 0;
    std::string s(v);
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        std::string_view item = trim(std::string_view(s).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        if (item.empty()) throw ConfigError("empty list item in " + what);
        out.push_back(parse_double(item, what));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string format_double_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_double(v[i]);
    }
    return s;
}

inline const std::vector<ConfigKey>& config_keys() {
    auto dbl = [](const char* name, auto getter) {
        return ConfigKey{name,
                         [getter, name](RunConfig& c, std::string_view v) {
                             getter(c) = parse_double(v, name);
                         },
                         [getter](const RunConfig& c) {
                             return format_double(getter(const_cast<RunConfig&>(c)));
                         }};
    };
    auto num = [](const char* name, auto getter) {
        return ConfigKey{name,
                         [getter, name](RunConfig& c, std::string_view v) {
                             getter(c) = static_cast<std::remove_reference_t<decltype(getter(c))>>(
                                 parse_u64(v, name));
                         },
                         [getter](const RunConfig& c) {
                             return std::to_string(getter(const_cast<RunConfig&>(c)));
                         }};
    };
    auto boolean = [](const char* name, auto getter) {
        return ConfigKey{name,
                         [getter, name](RunConfig& c, std::string_view v) {
                             getter(c) = parse_bool(v, name);
                         },
                         [getter](const RunConfig& c) {
                             return getter(const_cast<RunConfig&>(c)) ? "true" : "false";
                         }};
    };
    static const std::vector<ConfigKey> keys = [&] {
        std::vector<ConfigKey> k;
        k.push_back({"run.seed",
                     [](RunConfig& c, std::string_view v) { c.seed = parse_u64(v, "run.seed"); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }});
        k.push_back(num("run.threads", [](RunConfig& c) -> unsigned& { return c.threads; }));
        k.push_back({"run.out",
                     [](RunConfig& c, std::string_view v) {
                         c.out_dir = std::string(v);
                         c.out_dir_explicit = true;
                     },
                     [](const RunConfig& c) { return c.out_dir; }});

        k.push_back(num("world.ambient_dim",
                        [](RunConfig& c) -> std::size_t& { return c.world.ambient_dim; }));
        k.push_back(num("world.identity_dim",
                        [](RunConfig& c) -> std::size_t& { return c.world.identity_dim; }));
        k.push_back(num("world.num_identities",
                        [](RunConfig& c) -> std::size_t& { return c.world.num_identities; }));
        k.push_back(num("world.images_per_identity",
                        [](RunConfig& c) -> std::size_t& { return c.world.images_per_identity; }));
        k.push_back(num("world.eval_images_per_identity",
                        [](RunConfig& c) -> std::size_t& { return c.eval_images_per_identity; }));
        k.push_back(dbl("world.quality_high_weight",
                        [](RunConfig& c) -> double& { return c.world.quality.weight_high; }));
        k.push_back(dbl("world.quality_high_a",
                        [](RunConfig& c) -> double& { return c.world.quality.high_a; }));
        k.push_back(dbl("world.quality_high_b",
                        [](RunConfig& c) -> double& { return c.world.quality.high_b; }));
        k.push_back(dbl("world.quality_low_a",
                        [](RunConfig& c) -> double& { return c.world.quality.low_a; }));
        k.push_back(dbl("world.quality_low_b",
                        [](RunConfig& c) -> double& { return c.world.quality.low_b; }));
        k.push_back(dbl("world.degradation_probability",
                        [](RunConfig& c) -> double& { return c.world.degradation_probability; }));
        k.push_back(boolean("world.degraded_replace",
                            [](RunConfig& c) -> bool& { return c.world.degraded_replace; }));
        k.push_back(dbl("world.tau_max", [](RunConfig& c) -> double& { return c.world.tau_max; }));
        k.push_back(dbl("world.decrement_iso",
                        [](RunConfig& c) -> double& { return c.world.decrement_iso; }));
        k.push_back(dbl("world.decrement_mask",
                        [](RunConfig& c) -> double& { return c.world.decrement_mask; }));
        k.push_back(dbl("world.decrement_heavy",
                        [](RunConfig& c) -> double& { return c.world.decrement_heavy; }));
        k.push_back(dbl("world.mask_fraction",
                        [](RunConfig& c) -> double& { return c.world.mask_fraction; }));
        k.push_back(dbl("world.heavy_scale",
                        [](RunConfig& c) -> double& { return c.world.heavy_scale; }));
        k.push_back(dbl("world.heavy_clip",
                        [](RunConfig& c) -> double& { return c.world.heavy_clip; }));
        k.push_back(dbl("world.subset_p1",
                        [](RunConfig& c) -> double& { return c.world.subset_p1; }));
        k.push_back(dbl("world.subset_p2",
                        [](RunConfig& c) -> double& { return c.world.subset_p2; }));
        k.push_back(dbl("world.noise_subspace_fraction",
                        [](RunConfig& c) -> double& { return c.world.noise_subspace_fraction; }));

        k.push_back(num("pairs.per_identity_cap",
                        [](RunConfig& c) -> std::size_t& { return c.pairs.per_identity_cap; }));
        k.push_back(boolean("pairs.clamp",
                            [](RunConfig& c) -> bool& { return c.pairs.clamp_scores; }));

        k.push_back(num("train.hidden1", [](RunConfig& c) -> std::size_t& { return c.hidden1; }));
        k.push_back(num("train.batch_size",
                        [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
        k.push_back(dbl("train.initial_lr",
                        [](RunConfig& c) -> double& { return c.train.initial_lr; }));
        k.push_back(dbl("train.decay_factor",
                        [](RunConfig& c) -> double& { return c.train.decay_factor; }));
        k.push_back(num("train.max_decays",
                        [](RunConfig& c) -> int& { return c.train.max_decays; }));
        k.push_back(num("train.patience", [](RunConfig& c) -> int& { return c.train.patience; }));
        k.push_back(dbl("train.rel_tol", [](RunConfig& c) -> double& { return c.train.rel_tol; }));
        k.push_back(num("train.max_epochs",
                        [](RunConfig& c) -> int& { return c.train.max_epochs; }));

        k.push_back(num("protocol.genuine_pairs",
                        [](RunConfig& c) -> std::size_t& { return c.protocol.n_genuine; }));
        k.push_back(num("protocol.impostor_pairs",
                        [](RunConfig& c) -> std::size_t& { return c.protocol.n_impostor; }));
        k.push_back({"protocol.far_targets",
                     [](RunConfig& c, std::string_view v) {
                         c.far_targets = parse_double_list(v, "protocol.far_targets");
                     },
                     [](const RunConfig& c) { return format_double_list(c.far_targets); }});
        k.push_back(dbl("protocol.reject_max",
                        [](RunConfig& c) -> double& { return c.reject_max; }));
        k.push_back(dbl("protocol.reject_step",
                        [](RunConfig& c) -> double& { return c.reject_step; }));

        k.push_back(num("sets.per_identity",
                        [](RunConfig& c) -> std::size_t& { return c.sets.sets_per_identity; }));
        k.push_back(num("sets.size_min",
                        [](RunConfig& c) -> std::size_t& { return c.sets.size_min; }));
        k.push_back(num("sets.size_max",
                        [](RunConfig& c) -> std::size_t& { return c.sets.size_max; }));
        k.push_back(dbl("sets.low_fraction",
                        [](RunConfig& c) -> double& { return c.sets.low_fraction; }));
        k.push_back(dbl("sets.low_quality_max_q",
                        [](RunConfig& c) -> double& { return c.sets.low_quality_max_q; }));
        k.push_back(num("sets.impostor_pairs",
                        [](RunConfig& c) -> std::size_t& { return c.sets.n_impostor_pairs; }));

        k.push_back(dbl("rank.low_max", [](RunConfig& c) -> double& { return c.rank.low_max; }));
        k.push_back(dbl("rank.high_min", [](RunConfig& c) -> double& { return c.rank.high_min; }));
        k.push_back(num("rank.samples_per_bucket",
                        [](RunConfig& c) -> std::size_t& { return c.rank.samples_per_bucket; }));
        return k;
    }();
    return keys;
}

inline const ConfigKey* find_key(std::string_view name) {
    for (const ConfigKey& k : config_keys())
        if (name == k.name) return &k;
    return nullptr;
}

} // namespace detail

inline void apply_config_line(RunConfig& cfg, std::string_view key, std::string_view value) {
    const detail::ConfigKey* k = detail::find_key(key);
    if (!k) throw ConfigError("unknown config key: " + std::string(key));
    k->set(cfg, value);
}

// `section.key = value` per line; '#' or ';' lines are comments
inline void apply_config_text(RunConfig& cfg, const std::string& text,
                              const std::string& source_name) {
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(source_name + ":" + std::to_string(line_no) +
                              ": expected 'section.key = value'");
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

// overrides are `section.key=value` tokens from the command line
inline RunConfig load_config(const std::string& file_text, const std::string& source_name,
                             const std::vector<std::string>& overrides) {
    RunConfig cfg;
    apply_config_text(cfg, file_text, source_name);
    for (const std::string& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must be key=value: " + ov);
        apply_config_line(cfg, trim(std::string_view(ov).substr(0, eq)),
                          trim(std::string_view(ov).substr(eq + 1)));
    }
    // one root seed fans out to every component through tagged streams
    cfg.world.rng_seed = cfg.seed;
    cfg.pairs.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.protocol.seed = cfg.seed;
    cfg.sets.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

// canonical (table-ordered) effective configuration
// Snapshot of every key that determines artifact bytes. run.threads and
// run.out are execution details — outputs are invariant to both — so they
// are excluded to keep manifests identical across equivalent runs.
inline std::vector<std::pair<std::string, std::string>> config_snapshot(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : detail::config_keys()) {
        std::string_view name(k.name);
        if (name == "run.threads" || name == "run.out") continue;
        out.emplace_back(k.name, k.get(cfg));
    }
    return out;
}

} // namespace pcconf
