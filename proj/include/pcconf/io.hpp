#pragma once

// Artifact I/O. Two little-endian binary formats:
//
//   PCEB  embedding store   "PCEB" | version u32 | dim u32 | count u64 |
//                           { image_id u64 | identity_id u64 | quality f64 |
//                             degradations u32 | dim x f64 } ...
//   PCNM  model checkpoint  "PCNM" | version u32 | n_layers u32 |
//                           layer sizes u32 ... | per layer: W row-major f64,
//                           then bias f64
//
// plus CSV/JSON text artifacts. All doubles in text go through
// std::to_chars (shortest round-trip form), so identical data always
// serializes to identical bytes.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pcconf/confnet.hpp"
#include "pcconf/errors.hpp"
#include "pcconf/fusion.hpp"
#include "pcconf/hash.hpp"
#include "pcconf/metrics.hpp"
#include "pcconf/pairgen.hpp"
#include "pcconf/text.hpp"
#include "pcconf/world.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact formats are little-endian; big-endian hosts unsupported");

namespace pcconf {

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void put_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, &v, 4); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, &v, 8); }
inline void put_f64(std::ostream& os, double v) { put_bytes(os, &v, 8); }

inline void get_bytes(std::istream& is, void* p, std::size_t n, const std::string& what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw MissingArtifactError("truncated artifact while reading " + what);
}
inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    std::uint32_t v;
    get_bytes(is, &v, 4, what);
    return v;
}
inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
    std::uint64_t v;
    get_bytes(is, &v, 8, what);
    return v;
}
inline double get_f64(std::istream& is, const std::string& what) {
    double v;
    get_bytes(is, &v, 8, what);
    return v;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    return os;
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw MissingArtifactError("missing artifact: " + path.string());
    return is;
}

} // namespace detail

// ---- embedding store -------------------------------------------------------

struct EmbeddingStore {
    std::uint32_t dim = 0;
    std::vector<ImageRecord> records;
};

inline void write_embeddings(const std::filesystem::path& path, std::uint32_t dim,
                             const std::vector<ImageRecord>& records) {
    auto os = detail::open_out(path, true);
    os.write("PCEB", 4);
    detail::put_u32(os, kEmbeddingFormatVersion);
    detail::put_u32(os, dim);
    detail::put_u64(os, records.size());
    for (const ImageRecord& r : records) {
        if (r.embedding.size() != dim)
            throw std::runtime_error("write_embeddings: record dimension mismatch");
        detail::put_u64(os, r.image_id);
        detail::put_u64(os, r.identity_id);
        detail::put_f64(os, r.latent_quality);
        detail::put_u32(os, r.degradations);
        detail::put_bytes(os, r.embedding.data(), sizeof(double) * dim);
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline EmbeddingStore read_embeddings(const std::filesystem::path& path) {
    auto is = detail::open_in(path, true);
    char magic[4];
    detail::get_bytes(is, magic, 4, "embedding store magic");
    if (std::memcmp(magic, "PCEB", 4) != 0)
        throw MissingArtifactError("not an embedding store: " + path.string());
    if (detail::get_u32(is, "version") != kEmbeddingFormatVersion)
        throw MissingArtifactError("unsupported embedding store version: " + path.string());
    EmbeddingStore store;
    store.dim = detail::get_u32(is, "dimension");
    std::uint64_t count = detail::get_u64(is, "record count");
    store.records.resize(count);
    for (auto& r : store.records) {
        r.image_id = detail::get_u64(is, "image id");
        r.identity_id = detail::get_u64(is, "identity id");
        r.latent_quality = detail::get_f64(is, "quality");
        r.degradations = detail::get_u32(is, "degradations");
        r.embedding.resize(store.dim);
        detail::get_bytes(is, r.embedding.data(), sizeof(double) * store.dim, "embedding");
    }
    return store;
}

// Fused set descriptors reuse the store format: image_id slot carries the
// set id and the quality slot carries the fusion weight sum.
inline void write_descriptors(const std::filesystem::path& path, std::uint32_t dim,
                              const std::vector<FaceSet>& sets,
                              const std::vector<SetDescriptor>& descriptors) {
    if (sets.size() != descriptors.size())
        throw std::runtime_error("write_descriptors: sets/descriptors size mismatch");
    std::vector<ImageRecord> rows(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        rows[i].image_id = sets[i].set_id;
        rows[i].identity_id = sets[i].identity_id;
        rows[i].latent_quality = descriptors[i].weight_sum;
        rows[i].degradations = 0;
        rows[i].embedding = descriptors[i].v;
    }
    write_embeddings(path, dim, rows);
}

// ---- model checkpoint ------------------------------------------------------

inline void write_model(const std::filesystem::path& path, const ConfidenceModel& m) {
    auto os = detail::open_out(path, true);
    os.write("PCNM", 4);
    detail::put_u32(os, kModelFormatVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(m.W.size()));
    for (std::size_t sz : m.layer_sizes) detail::put_u32(os, static_cast<std::uint32_t>(sz));
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        detail::put_bytes(os, m.W[l].a.data(), sizeof(double) * m.W[l].a.size());
        detail::put_bytes(os, m.b[l].data(), sizeof(double) * m.b[l].size());
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline ConfidenceModel read_model(const std::filesystem::path& path) {
    auto is = detail::open_in(path, true);
    char magic[4];
    detail::get_bytes(is, magic, 4, "model magic");
    if (std::memcmp(magic, "PCNM", 4) != 0)
        throw MissingArtifactError("not a model checkpoint: " + path.string());
    if (detail::get_u32(is, "version") != kModelFormatVersion)
        throw MissingArtifactError("unsupported model version: " + path.string());
    std::uint32_t n_layers = detail::get_u32(is, "layer count");
    ConfidenceModel m;
    m.layer_sizes.resize(n_layers + 1);
    for (auto& s : m.layer_sizes) s = detail::get_u32(is, "layer size");
    m.W.resize(n_layers);
    m.b.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        m.W[l] = Mat(m.layer_sizes[l + 1], m.layer_sizes[l]);
        detail::get_bytes(is, m.W[l].a.data(), sizeof(double) * m.W[l].a.size(), "weights");
        m.b[l].resize(m.layer_sizes[l + 1]);
        detail::get_bytes(is, m.b[l].data(), sizeof(double) * m.b[l].size(), "biases");
    }
    return m;
}

// ---- CSV artifacts ---------------------------------------------------------

inline void write_pairs_csv(const std::filesystem::path& path,
                            const std::vector<PairSample>& pairs) {
    auto os = detail::open_out(path, false);
    os << "image_a,image_b,identity,y,fold\n";
    for (const PairSample& p : pairs)
        os << p.image_a << ',' << p.image_b << ',' << p.identity << ',' << format_double(p.y)
           << ',' << p.fold << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::vector<PairSample> read_pairs_csv(const std::filesystem::path& path) {
    auto is = detail::open_in(path, false);
    std::string line;
    if (!std::getline(is, line) || line != "image_a,image_b,identity,y,fold")
        throw MissingArtifactError("bad pair corpus header: " + path.string());
    std::vector<PairSample> pairs;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 5) throw MissingArtifactError("bad pair corpus row: " + path.string());
        PairSample p;
        p.image_a = parse_u64(f[0], "pair corpus");
        p.image_b = parse_u64(f[1], "pair corpus");
        p.identity = parse_u64(f[2], "pair corpus");
        p.y = parse_double(f[3], "pair corpus");
        p.fold = static_cast<std::uint32_t>(parse_u64(f[4], "pair corpus"));
        pairs.push_back(p);
    }
    return pairs;
}

inline void write_reject_curve_csv(const std::filesystem::path& path,
                                   const ErrorRejectCurve& curve) {
    auto os = detail::open_out(path, false);
    os << "r,far_target,threshold,achieved_far,tar,n_retained\n";
    for (const RejectPoint& pt : curve.points) {
        if (pt.roc.points.empty()) {
            // side went empty at this r; emit the row with blank metrics
            for (double t : curve.far_targets)
                os << format_double(pt.r) << ',' << format_double(t) << ",,,,"
                   << pt.n_retained << '\n';
            continue;
        }
        for (const RocPoint& rp : pt.roc.points)
            os << format_double(pt.r) << ',' << format_double(rp.far_target) << ','
               << format_double(rp.threshold) << ',' << format_double(rp.achieved_far) << ','
               << format_double(rp.tar) << ',' << pt.n_retained << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline void write_set_manifest_csv(const std::filesystem::path& path,
                                   const std::vector<FaceSet>& sets) {
    auto os = detail::open_out(path, false);
    os << "set_id,identity,image_id\n";
    for (const FaceSet& s : sets)
        for (std::uint64_t img : s.image_ids)
            os << s.set_id << ',' << s.identity_id << ',' << img << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

// ---- checksums -------------------------------------------------------------

inline std::uint64_t file_checksum(const std::filesystem::path& path) {
    auto is = detail::open_in(path, true);
    char buf[65536];
    std::uint64_t h = kFnvOffset;
    while (is) {
        is.read(buf, sizeof(buf));
        auto got = static_cast<std::size_t>(is.gcount());
        for (std::size_t i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= kFnvPrime;
        }
    }
    return h;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    auto os = detail::open_out(path, false);
    os << text;
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    auto is = detail::open_in(path, false);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace pcconf
