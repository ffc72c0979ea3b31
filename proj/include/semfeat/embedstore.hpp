#pragma once

// SEMB embedding dumps: one pooled vector per (occurrence, layer).
//
// Layout (v1, little-endian):
//   "SEMB" | u32 version | u32 manifest_len | manifest JSON
//   record_count x ( u32 key_len | key JSON | n_layers*dim f32, layer-major )

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace semfeat {

static_assert(std::endian::native == std::endian::little, "SEMB I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

enum class Pooling { first, last, mean };

inline std::string_view to_string(Pooling p) {
    switch (p) {
    case Pooling::first: return "first";
    case Pooling::last: return "last";
    case Pooling::mean: return "mean";
    }
    return "mean";
}

inline Pooling parse_pooling(std::string_view s) {
    if (s == "first") return Pooling::first;
    if (s == "last") return Pooling::last;
    if (s == "mean") return Pooling::mean;
    fail(ErrorKind::format, "unknown pooling tag '" + std::string(s) + "'");
}

struct DumpManifest {
    std::string model_id;
    std::size_t n_layers = 1;
    std::size_t dim = 1;
    Pooling pooling = Pooling::mean;
    std::size_t record_count = 0;

    friend bool operator==(const DumpManifest&, const DumpManifest&) = default;
};

struct OccurrenceKey {
    std::string word;
    std::int64_t sentence_id = 0;
    std::int64_t occurrence_index = 0;
    std::optional<std::string> role;

    friend auto operator<=>(const OccurrenceKey&, const OccurrenceKey&) = default;
    friend bool operator==(const OccurrenceKey&, const OccurrenceKey&) = default;
};

inline std::string describe(const OccurrenceKey& k) {
    std::string s = k.word + "#" + std::to_string(k.sentence_id) + "." + std::to_string(k.occurrence_index);
    if (k.role) s += "[" + *k.role + "]";
    return s;
}

struct EmbeddingRecord {
    OccurrenceKey key;
    std::size_t n_layers = 0;
    std::size_t dim = 0;
    std::vector<float> tensor; // layer-major, n_layers * dim

    std::span<const float> layer(std::size_t l) const { return {tensor.data() + l * dim, dim}; }
    std::span<float> layer(std::size_t l) { return {tensor.data() + l * dim, dim}; }

    std::vector<double> layer_as_double(std::size_t l) const {
        if (l >= n_layers)
            fail(ErrorKind::index, "layer " + std::to_string(l) + " outside [0, " + std::to_string(n_layers) + ")");
        auto v = layer(l);
        return {v.begin(), v.end()};
    }

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// A loaded dump. Immutable after construction, so it can be shared
/// between reader threads.
class EmbeddingDump {
public:
    EmbeddingDump() = default;

    EmbeddingDump(DumpManifest manifest, std::vector<EmbeddingRecord> records)
        : manifest_(std::move(manifest)), records_(std::move(records)) {
        manifest_.record_count = records_.size();
        validate();
        build_index();
    }

    const DumpManifest& manifest() const noexcept { return manifest_; }
    const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

    bool has_word(const std::string& word) const { return by_word_.contains(word); }

    const std::vector<std::size_t>& records_for(const std::string& word) const {
        auto it = by_word_.find(word);
        if (it == by_word_.end()) fail(ErrorKind::lookup, "word '" + word + "' not in dump");
        return it->second;
    }

    const EmbeddingRecord* find(const OccurrenceKey& key) const {
        auto it = by_key_.find(key);
        return it == by_key_.end() ? nullptr : &records_[it->second];
    }

    const EmbeddingRecord& at(const OccurrenceKey& key) const {
        const auto* r = find(key);
        if (r == nullptr) fail(ErrorKind::lookup, "key " + describe(key) + " not in dump");
        return *r;
    }

    friend bool operator==(const EmbeddingDump& a, const EmbeddingDump& b) {
        return a.manifest_ == b.manifest_ && a.records_ == b.records_;
    }

private:
    void validate() const {
        if (manifest_.n_layers < 1) fail(ErrorKind::format, "n_layers must be >= 1");
        if (manifest_.dim < 1) fail(ErrorKind::format, "dim must be >= 1");
        const std::size_t expect = manifest_.n_layers * manifest_.dim;
        for (const auto& r : records_) {
            if (r.n_layers != manifest_.n_layers || r.dim != manifest_.dim || r.tensor.size() != expect)
                fail(ErrorKind::shape, "record " + describe(r.key) + " shape does not match manifest");
            for (float v : r.tensor)
                if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite value in record " + describe(r.key));
        }
    }

    void build_index() {
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (!by_key_.emplace(records_[i].key, i).second)
                fail(ErrorKind::data, "duplicate key " + describe(records_[i].key));
            by_word_[records_[i].key.word].push_back(i);
        }
    }

    DumpManifest manifest_;
    std::vector<EmbeddingRecord> records_;
    std::map<OccurrenceKey, std::size_t> by_key_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_word_;
};

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::uint32_t kSembVersion = 1;

namespace detail {

inline nlohmann::json manifest_json(const DumpManifest& m) {
    return {{"model_id", m.model_id},
            {"n_layers", m.n_layers},
            {"dim", m.dim},
            {"pooling", std::string(to_string(m.pooling))},
            {"record_count", m.record_count}};
}

inline nlohmann::json key_json(const OccurrenceKey& k) {
    nlohmann::json j = {{"word", k.word}, {"sentence_id", k.sentence_id}, {"occurrence_index", k.occurrence_index}};
    if (k.role) j["role"] = *k.role;
    return j;
}

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }

    void need(std::size_t n, std::string_view what) const {
        if (bytes_.size() - pos_ < n)
            fail(ErrorKind::length, "truncated " + std::string(what) + " at byte offset " + std::to_string(pos_) +
                                        " (need " + std::to_string(n) + " bytes, have " +
                                        std::to_string(bytes_.size() - pos_) + ")");
    }

    std::uint32_t u32(std::string_view what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    std::string_view take(std::size_t n, std::string_view what) {
        need(n, what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_dump(const EmbeddingDump& dump) {
    std::string out = "SEMB";
    detail::put_u32(out, kSembVersion);
    const std::string manifest = detail::manifest_json(dump.manifest()).dump();
    detail::put_u32(out, static_cast<std::uint32_t>(manifest.size()));
    out += manifest;
    for (const auto& r : dump.records()) {
        const std::string key = detail::key_json(r.key).dump();
        detail::put_u32(out, static_cast<std::uint32_t>(key.size()));
        out += key;
        const auto* p = reinterpret_cast<const char*>(r.tensor.data());
        out.append(p, r.tensor.size() * sizeof(float));
    }
    return out;
}

inline EmbeddingDump parse_dump(std::string_view bytes) {
    detail::ByteReader in(bytes);
    if (in.take(4, "magic") != "SEMB") fail(ErrorKind::format, "bad magic, expected 'SEMB'");
    const std::uint32_t version = in.u32("version");
    if (version != kSembVersion) fail(ErrorKind::format, "unsupported SEMB version " + std::to_string(version));

    DumpManifest m;
    const std::uint32_t manifest_len = in.u32("manifest length");
    try {
        const auto j = nlohmann::json::parse(in.take(manifest_len, "manifest"));
        m.model_id = j.at("model_id").get<std::string>();
        m.n_layers = j.at("n_layers").get<std::size_t>();
        m.dim = j.at("dim").get<std::size_t>();
        m.pooling = parse_pooling(j.at("pooling").get<std::string>());
        m.record_count = j.at("record_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("bad manifest: ") + e.what());
    }
    if (m.n_layers < 1 || m.dim < 1) fail(ErrorKind::format, "manifest n_layers and dim must be >= 1");

    const std::size_t floats = m.n_layers * m.dim;
    std::vector<EmbeddingRecord> records;
    records.reserve(m.record_count);
    for (std::size_t i = 0; i < m.record_count; ++i) {
        const std::string what = "record " + std::to_string(i);
        EmbeddingRecord r;
        const std::uint32_t key_len = in.u32(what + " key length");
        try {
            const auto j = nlohmann::json::parse(in.take(key_len, what + " key"));
            r.key.word = j.at("word").get<std::string>();
            r.key.sentence_id = j.at("sentence_id").get<std::int64_t>();
            r.key.occurrence_index = j.at("occurrence_index").get<std::int64_t>();
            if (j.contains("role") && !j.at("role").is_null()) r.key.role = j.at("role").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::format, what + ": bad key: " + e.what());
        }
        const auto payload = in.take(floats * sizeof(float), what + " payload");
        r.n_layers = m.n_layers;
        r.dim = m.dim;
        r.tensor.resize(floats);
        std::memcpy(r.tensor.data(), payload.data(), payload.size());
        for (float v : r.tensor)
            if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite value in record " + describe(r.key));
        records.push_back(std::move(r));
    }
    if (!in.at_end())
        fail(ErrorKind::length, "trailing bytes after " + std::to_string(m.record_count) +
                                    " records at byte offset " + std::to_string(in.offset()));
    return EmbeddingDump(std::move(m), std::move(records));
}

inline EmbeddingDump read_dump(const std::filesystem::path& path) { return parse_dump(read_file(path)); }

inline void write_dump(const EmbeddingDump& dump, const std::filesystem::path& path) {
    for (const auto& r : dump.records())
        for (float v : r.tensor)
            if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite value in record " + describe(r.key));
    write_file_atomic(path, serialize_dump(dump));
}

// ---------------------------------------------------------------------------
// Queries

/// Mean over every record of `word` at `layer`, accumulated in double.
inline std::vector<double> mean_occurrence_embedding(const EmbeddingDump& dump, const std::string& word,
                                                     std::size_t layer) {
    if (layer >= dump.manifest().n_layers)
        fail(ErrorKind::index,
             "layer " + std::to_string(layer) + " outside [0, " + std::to_string(dump.manifest().n_layers) + ")");
    const auto& ids = dump.records_for(word);
    std::vector<double> acc(dump.manifest().dim, 0.0);
    for (std::size_t id : ids) {
        auto v = dump.records()[id].layer(layer);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += v[d];
    }
    for (double& a : acc) a /= static_cast<double>(ids.size());
    return acc;
}

/// One row per word, each the word's mean-over-occurrence vector.
inline Matrix design_matrix(const EmbeddingDump& dump, const std::vector<std::string>& words, std::size_t layer) {
    std::vector<std::string> missing;
    for (const auto& w : words)
        if (!dump.has_word(w)) missing.push_back(w);
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " word(s) missing from dump:";
        for (const auto& w : missing) msg += " " + w;
        fail(ErrorKind::lookup, msg);
    }
    if (layer >= dump.manifest().n_layers)
        fail(ErrorKind::index, "layer " + std::to_string(layer) + " outside dump");
    Matrix X(words.size(), dump.manifest().dim);
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto v = mean_occurrence_embedding(dump, words[i], layer);
        std::copy(v.begin(), v.end(), X.row(i).begin());
    }
    return X;
}

/// One row per key, each that single record's layer vector.
inline Matrix design_matrix(const EmbeddingDump& dump, const std::vector<OccurrenceKey>& keys, std::size_t layer) {
    std::vector<std::string> missing;
    for (const auto& k : keys)
        if (dump.find(k) == nullptr) missing.push_back(describe(k));
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " key(s) missing from dump:";
        for (const auto& k : missing) msg += " " + k;
        fail(ErrorKind::lookup, msg);
    }
    if (layer >= dump.manifest().n_layers)
        fail(ErrorKind::index, "layer " + std::to_string(layer) + " outside dump");
    Matrix X(keys.size(), dump.manifest().dim);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto v = dump.at(keys[i]).layer(layer);
        std::copy(v.begin(), v.end(), X.row(i).begin());
    }
    return X;
}

/// Load a whitespace-separated `word v1 ... vd` table as a one-layer dump.
/// A leading `count dim` header line (word2vec style) is skipped. When
/// `vocabulary` is given, only those words are kept.
inline EmbeddingDump static_dump_from_table(const std::filesystem::path& path, std::string model_id = "static",
                                            const std::vector<std::string>* vocabulary = nullptr) {
    std::unordered_set<std::string> keep;
    if (vocabulary != nullptr)
        for (const auto& w : *vocabulary) keep.insert(to_lower(w));

    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::vector<EmbeddingRecord> records;
    std::unordered_set<std::string> seen;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = split_whitespace(line);
        if (tokens.empty()) continue;
        if (line_no == 1 && tokens.size() == 2) {
            std::size_t a = 0, b = 0;
            if (parse_int(tokens[0], a) && parse_int(tokens[1], b)) continue;
        }
        const std::size_t d = tokens.size() - 1;
        if (d == 0) fail(ErrorKind::shape, "line " + std::to_string(line_no) + " has no vector values");
        if (dim == 0) dim = d;
        if (d != dim)
            fail(ErrorKind::shape, "line " + std::to_string(line_no) + " has " + std::to_string(d) +
                                       " values, expected " + std::to_string(dim));
        std::string word(tokens[0]);
        if (vocabulary != nullptr && !keep.contains(to_lower(word))) continue;
        if (!seen.insert(word).second)
            fail(ErrorKind::data, "duplicate key '" + word + "' at line " + std::to_string(line_no));
        EmbeddingRecord r;
        r.key = {word, 0, 0, std::nullopt};
        r.n_layers = 1;
        r.dim = d;
        r.tensor.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            double v = 0.0;
            if (!parse_double(tokens[i + 1], v) || !std::isfinite(v))
                fail(ErrorKind::data, "line " + std::to_string(line_no) + ": bad value '" +
                                          std::string(tokens[i + 1]) + "'");
            r.tensor[i] = static_cast<float>(v);
        }
        records.push_back(std::move(r));
    }
    DumpManifest m{std::move(model_id), 1, dim == 0 ? 1 : dim, Pooling::mean, records.size()};
    return EmbeddingDump(std::move(m), std::move(records));
}

} // namespace semfeat
