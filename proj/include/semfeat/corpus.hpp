#pragma once

// Dataset loaders and sentence banks.
//
// Four external inputs are handled here: the 65-feature semantic norms
// (word x feature ratings on 0-6), the five-feature property/object pair
// norms (0-5), the Word-in-Context data and gold files, and a one-sentence-
// per-line text corpus from which target-word sentences are sampled.

#include <array>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "util.hpp"

namespace semfeat {

inline constexpr std::size_t kFeatureCount = 65;
inline constexpr double kNormMax = 6.0;
inline constexpr double kPairNormMax = 5.0;

/// Feature identifiers in canonical column order.
inline const std::vector<std::string>& binder_feature_names() {
    static const std::vector<std::string> names = {
        "Vision", "Bright", "Dark", "Color", "Pattern", "Large", "Small", "Motion", "Biomotion",
        "Fast", "Slow", "Shape", "Complexity", "Face", "Body", "Touch", "Temperature", "Texture",
        "Weight", "Pain", "Audition", "Loud", "Low", "High", "Sound", "Music", "Speech", "Taste",
        "Smell", "Head", "UpperLimb", "LowerLimb", "Practice", "Landmark", "Path", "Scene", "Near",
        "Toward", "Away", "Number", "Time", "Duration", "Long", "Short", "Caused", "Consequential",
        "Social", "Human", "Communication", "Self", "Cognition", "Benefit", "Harm", "Pleasant",
        "Unpleasant", "Happy", "Sad", "Angry", "Disgusted", "Fearful", "Surprised", "Drive", "Needs",
        "Attention", "Arousal"};
    return names;
}

inline const std::vector<std::string>& pair_feature_names() {
    static const std::vector<std::string> names = {"Visual", "Auditory", "Haptic", "Gustatory", "Olfactory"};
    return names;
}

// ---------------------------------------------------------------------------
// Domain types

struct SemanticNorms {
    std::vector<std::string> words;
    std::vector<std::string> feature_names;
    Matrix values; // words x features

    std::size_t word_count() const { return words.size(); }
    std::size_t feature_count() const { return feature_names.size(); }

    std::size_t feature_index(std::string_view name) const {
        for (std::size_t i = 0; i < feature_names.size(); ++i)
            if (feature_names[i] == name) return i;
        fail(ErrorKind::lookup, "unknown feature '" + std::string(name) + "'");
    }

    std::vector<double> feature_column(std::size_t f) const { return values.column(f); }
};

using FeatureCategoryMap = std::map<std::string, std::string>;

/// The reference grouping of the 65 features into domains.
inline FeatureCategoryMap default_feature_categories() {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> groups = {
        {"Vision",
         {"Vision", "Bright", "Dark", "Color", "Pattern", "Large", "Small", "Motion", "Biomotion", "Fast", "Slow",
          "Shape", "Complexity", "Face", "Body"}},
        {"Somatic", {"Touch", "Temperature", "Texture", "Weight", "Pain"}},
        {"Audition", {"Audition", "Loud", "Low", "High", "Sound", "Music", "Speech"}},
        {"Gustation", {"Taste"}},
        {"Olfaction", {"Smell"}},
        {"Motor", {"Head", "UpperLimb", "LowerLimb", "Practice"}},
        {"Spatial", {"Landmark", "Path", "Scene", "Near", "Toward", "Away", "Number"}},
        {"Temporal", {"Time", "Duration", "Long", "Short"}},
        {"Causal", {"Caused", "Consequential"}},
        {"Social", {"Social", "Human", "Communication", "Self"}},
        {"Cognition", {"Cognition"}},
        {"Emotion",
         {"Benefit", "Harm", "Pleasant", "Unpleasant", "Happy", "Sad", "Angry", "Disgusted", "Fearful", "Surprised"}},
        {"Drive", {"Drive", "Needs"}},
        {"Attention", {"Attention", "Arousal"}},
    };
    FeatureCategoryMap out;
    for (const auto& [category, features] : groups)
        for (const auto& f : features) out[f] = category;
    return out;
}

enum class BankKind { random, curated };

inline std::string_view to_string(BankKind k) { return k == BankKind::random ? "random" : "curated"; }

struct BankSentence {
    std::int64_t sentence_id = 0;
    std::string text;

    friend bool operator==(const BankSentence&, const BankSentence&) = default;
};

struct BankProvenance {
    BankKind kind = BankKind::random;
    std::size_t requested_n = 0;
    std::size_t max_tokens = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> match_counts;
    std::vector<std::string> short_words; // fewer than requested_n matches
    std::vector<std::string> warnings;
};

struct SentenceBank {
    std::map<std::string, std::vector<BankSentence>> sentences;
    BankProvenance provenance;

    const std::vector<BankSentence>& at(const std::string& word) const {
        static const std::vector<BankSentence> empty;
        auto it = sentences.find(word);
        return it == sentences.end() ? empty : it->second;
    }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [w, list] : sentences) n += list.size();
        return n;
    }
};

struct PairEntry {
    std::string property;
    std::string object;
    std::array<double, 5> scores{};
};

struct PairNorms {
    std::vector<PairEntry> entries;

    std::vector<std::string> distinct_properties() const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& e : entries) {
            const std::string key = to_lower(e.property);
            if (seen.insert(key).second) out.push_back(key);
        }
        return out;
    }
};

struct WiCItem {
    std::string target;
    std::string pos;
    std::size_t index1 = 0;
    std::size_t index2 = 0;
    std::string sentence1;
    std::string sentence2;
    bool gold = false;
};

struct WiCDataset {
    std::string split; // "train" or "dev"
    std::vector<WiCItem> items;
};

// ---------------------------------------------------------------------------
// Token matching

namespace detail {

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and count as word
// characters so that accented words are never split.
inline bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

} // namespace detail

/// Number of whole-token, case-insensitive occurrences of `word` in `text`.
/// A match must be bounded by a non-alphanumeric byte or the string ends.
inline std::size_t count_token_occurrences(std::string_view text, std::string_view word) {
    if (word.empty()) return 0;
    const std::string hay = to_lower(text);
    const std::string needle = to_lower(word);
    std::size_t count = 0;
    std::size_t pos = hay.find(needle);
    while (pos != std::string::npos) {
        const bool left_ok = pos == 0 || !detail::is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
        const std::size_t end = pos + needle.size();
        const bool right_ok = end == hay.size() || !detail::is_word_byte(static_cast<unsigned char>(hay[end]));
        if (left_ok && right_ok) ++count;
        pos = hay.find(needle, pos + 1);
    }
    return count;
}

inline bool contains_token(std::string_view text, std::string_view word) {
    return count_token_occurrences(text, word) > 0;
}

// ---------------------------------------------------------------------------
// Norms

/// Parse a norms CSV. Columns may appear in any order but must be exactly
/// the configured feature list; values are returned in configured order.
inline SemanticNorms load_binder_norms(const std::filesystem::path& path,
                                       const std::vector<std::string>& feature_list = binder_feature_names()) {
    const auto lines = read_lines(path);
    if (lines.empty()) fail(ErrorKind::schema, "'" + path.string() + "' has no header row");

    const auto header = split(lines[0], ',');
    if (header.empty() || to_lower(trim(header[0])) != "word")
        fail(ErrorKind::schema, "first column must be 'word'");

    std::unordered_map<std::string, std::size_t> wanted;
    for (std::size_t i = 0; i < feature_list.size(); ++i) wanted.emplace(feature_list[i], i);

    std::vector<std::size_t> column_to_feature(header.size(), 0);
    std::vector<bool> seen(feature_list.size(), false);
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string name(trim(header[c]));
        auto it = wanted.find(name);
        if (it == wanted.end()) fail(ErrorKind::schema, "unexpected feature column '" + name + "'");
        if (seen[it->second]) fail(ErrorKind::schema, "duplicate feature column '" + name + "'");
        seen[it->second] = true;
        column_to_feature[c] = it->second;
    }
    for (std::size_t f = 0; f < feature_list.size(); ++f)
        if (!seen[f]) fail(ErrorKind::schema, "missing feature column '" + feature_list[f] + "'");

    SemanticNorms norms;
    norms.feature_names = feature_list;
    std::vector<double> values;
    std::unordered_set<std::string> words_seen;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const auto cells = split(lines[li], ',');
        const std::string row_ref = "line " + std::to_string(li + 1);
        if (cells.size() != header.size())
            fail(ErrorKind::schema, row_ref + " has " + std::to_string(cells.size()) + " columns, expected " +
                                        std::to_string(header.size()));
        std::string word = to_lower(trim(cells[0]));
        if (word.empty()) fail(ErrorKind::schema, row_ref + " has an empty word");
        if (!words_seen.insert(word).second) fail(ErrorKind::schema, "duplicate word '" + word + "' at " + row_ref);

        std::vector<double> row(feature_list.size(), 0.0);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v))
                fail(ErrorKind::schema, row_ref + ": cannot parse '" + std::string(cells[c]) + "'");
            if (!(v >= 0.0 && v <= kNormMax))
                fail(ErrorKind::range, row_ref + ": value " + std::string(trim(cells[c])) + " for '" +
                                           std::string(trim(header[c])) + "' outside [0, 6]");
            row[column_to_feature[c]] = v;
        }
        values.insert(values.end(), row.begin(), row.end());
        norms.words.push_back(std::move(word));
    }
    norms.values = Matrix(norms.words.size(), feature_list.size());
    norms.values.data() = std::move(values);
    return norms;
}

inline std::string format_norms_csv(const SemanticNorms& norms) {
    std::string out = "word";
    for (const auto& f : norms.feature_names) out += "," + f;
    out += "\n";
    for (std::size_t r = 0; r < norms.words.size(); ++r) {
        out += norms.words[r];
        for (std::size_t c = 0; c < norms.feature_count(); ++c) out += "," + format_number(norms.values(r, c));
        out += "\n";
    }
    return out;
}

inline void write_binder_norms(const SemanticNorms& norms, const std::filesystem::path& path) {
    write_file_atomic(path, format_norms_csv(norms));
}

/// Two-column CSV `feature,category`; a header row is optional.
inline FeatureCategoryMap load_feature_categories(const std::filesystem::path& path) {
    FeatureCategoryMap out;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != 2)
            fail(ErrorKind::schema, "categories line " + std::to_string(i + 1) + " must have 2 columns");
        const std::string feature(trim(cells[0]));
        if (i == 0 && to_lower(feature) == "feature") continue;
        if (!out.emplace(feature, std::string(trim(cells[1]))).second)
            fail(ErrorKind::schema, "feature '" + feature + "' has more than one category");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pair norms

inline PairNorms load_property_pairs(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) fail(ErrorKind::schema, "'" + path.string() + "' has no header row");
    const auto header = split(lines[0], ',');
    const std::vector<std::string> expected = {"property", "object", "Visual", "Auditory",
                                               "Haptic",   "Gustatory", "Olfactory"};
    if (header.size() != expected.size())
        fail(ErrorKind::schema, "pair header must be property,object,Visual,Auditory,Haptic,Gustatory,Olfactory");
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (to_lower(trim(header[i])) != to_lower(expected[i]))
            fail(ErrorKind::schema, "unexpected pair column '" + std::string(trim(header[i])) + "'");

    PairNorms pairs;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const auto cells = split(lines[li], ',');
        const std::string row_ref = "line " + std::to_string(li + 1);
        if (cells.size() != expected.size()) fail(ErrorKind::schema, row_ref + " must have 7 columns");
        PairEntry e;
        e.property = std::string(trim(cells[0]));
        e.object = std::string(trim(cells[1]));
        for (std::size_t f = 0; f < 5; ++f) {
            double v = 0.0;
            if (!parse_double(cells[f + 2], v))
                fail(ErrorKind::schema, row_ref + ": cannot parse '" + std::string(cells[f + 2]) + "'");
            if (!(v >= 0.0 && v <= kPairNormMax))
                fail(ErrorKind::range, row_ref + ": score " + std::string(trim(cells[f + 2])) + " outside [0, 5]");
            e.scores[f] = v;
        }
        pairs.entries.push_back(std::move(e));
    }

    std::map<std::string, std::vector<std::string>> objects_by_property;
    for (const auto& e : pairs.entries) objects_by_property[to_lower(e.property)].push_back(to_lower(e.object));
    for (const auto& [property, objects] : objects_by_property) {
        if (objects.size() != 2)
            fail(ErrorKind::pairing, "property '" + property + "' appears " + std::to_string(objects.size()) +
                                         " times, expected 2");
        if (objects[0] == objects[1])
            fail(ErrorKind::pairing, "property '" + property + "' is paired twice with '" + objects[0] + "'");
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// WiC

inline WiCDataset load_wic(const std::filesystem::path& data_path, const std::filesystem::path& gold_path,
                           std::string split_tag = "train") {
    auto strip_blank_tail = [](std::vector<std::string> lines) {
        while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
        return lines;
    };
    const auto data = strip_blank_tail(read_lines(data_path));
    const auto gold = strip_blank_tail(read_lines(gold_path));
    if (data.size() != gold.size())
        fail(ErrorKind::alignment, std::to_string(data.size()) + " data lines but " + std::to_string(gold.size()) +
                                       " gold lines");

    WiCDataset ds;
    ds.split = std::move(split_tag);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::string line_ref = "line " + std::to_string(i + 1);
        const auto fields = split(data[i], '\t');
        if (fields.size() != 5) fail(ErrorKind::format, line_ref + " must have 5 tab-separated fields");
        WiCItem item;
        item.target = std::string(trim(fields[0]));
        item.pos = std::string(trim(fields[1]));
        const auto idx = split(trim(fields[2]), '-');
        if (idx.size() != 2 || !parse_int(idx[0], item.index1) || !parse_int(idx[1], item.index2))
            fail(ErrorKind::format, line_ref + ": bad index pair '" + std::string(fields[2]) + "'");
        item.sentence1 = std::string(fields[3]);
        item.sentence2 = std::string(fields[4]);
        if (item.index1 >= split_whitespace(item.sentence1).size())
            fail(ErrorKind::index, line_ref + ": index " + std::to_string(item.index1) + " outside sentence1");
        if (item.index2 >= split_whitespace(item.sentence2).size())
            fail(ErrorKind::index, line_ref + ": index " + std::to_string(item.index2) + " outside sentence2");
        const std::string g(trim(gold[i]));
        if (g == "T")
            item.gold = true;
        else if (g == "F")
            item.gold = false;
        else
            fail(ErrorKind::format, "gold " + line_ref + ": expected T or F, got '" + g + "'");
        ds.items.push_back(std::move(item));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Sentence banks

/// Reservoir-sample up to `n` sentences per target from a line-per-sentence
/// corpus, streaming the file once. Each target has its own generator
/// (seeded from `seed` and the target), so the bank for a word does not
/// depend on which other targets were requested.
inline SentenceBank sample_sentences(const std::filesystem::path& corpus_path, const std::vector<std::string>& targets,
                                     std::size_t n, std::size_t max_tokens = 128, std::uint64_t seed = 0) {
    if (n == 0) fail(ErrorKind::domain, "n must be at least 1");
    std::ifstream in(corpus_path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open corpus '" + corpus_path.string() + "'");

    struct Reservoir {
        std::string word;
        Rng rng;
        std::size_t seen = 0;
        std::vector<BankSentence> picked;
    };

    std::vector<Reservoir> reservoirs;
    std::unordered_map<std::string, std::size_t> single_token;
    std::vector<std::size_t> multi_token;
    for (const auto& t : targets) {
        std::string w = to_lower(t);
        bool already = false;
        for (const auto& r : reservoirs) already = already || r.word == w;
        if (already || w.empty()) continue;
        const bool simple = std::all_of(w.begin(), w.end(), [](char c) {
            return detail::is_word_byte(static_cast<unsigned char>(c));
        });
        const std::size_t id = reservoirs.size();
        reservoirs.push_back({w, Rng(derive_seed(seed, {tag_of(w)})), 0, {}});
        if (simple)
            single_token.emplace(w, id);
        else
            multi_token.push_back(id);
    }

    auto offer = [n](Reservoir& r, std::int64_t line_no, const std::string& text) {
        if (r.picked.size() < n) {
            r.picked.push_back({line_no, text});
        } else {
            const std::uint64_t j = r.rng.below(r.seen + 1);
            if (j < n) r.picked[j] = {line_no, text};
        }
        ++r.seen;
    };

    std::string line;
    std::int64_t line_no = -1;
    std::vector<std::size_t> hits;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (split_whitespace(line).size() > max_tokens) continue;

        hits.clear();
        const std::string lower = to_lower(line);
        std::size_t i = 0;
        while (i < lower.size()) {
            while (i < lower.size() && !detail::is_word_byte(static_cast<unsigned char>(lower[i]))) ++i;
            const std::size_t start = i;
            while (i < lower.size() && detail::is_word_byte(static_cast<unsigned char>(lower[i]))) ++i;
            if (i > start) {
                auto it = single_token.find(lower.substr(start, i - start));
                if (it != single_token.end()) hits.push_back(it->second);
            }
        }
        for (std::size_t id : multi_token)
            if (contains_token(lower, reservoirs[id].word)) hits.push_back(id);
        std::sort(hits.begin(), hits.end());
        hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
        for (std::size_t id : hits) offer(reservoirs[id], line_no, line);
    }
    if (in.bad()) fail(ErrorKind::io, "read failure on corpus '" + corpus_path.string() + "'");

    SentenceBank bank;
    bank.provenance.kind = BankKind::random;
    bank.provenance.requested_n = n;
    bank.provenance.max_tokens = max_tokens;
    bank.provenance.seed = seed;
    for (auto& r : reservoirs) {
        std::sort(r.picked.begin(), r.picked.end(),
                  [](const BankSentence& a, const BankSentence& b) { return a.sentence_id < b.sentence_id; });
        bank.provenance.match_counts[r.word] = r.seen;
        if (r.seen < n) bank.provenance.short_words.push_back(r.word);
        if (r.seen == 0) bank.provenance.warnings.push_back("no sentences contain '" + r.word + "'");
        bank.sentences[r.word] = std::move(r.picked);
    }
    std::sort(bank.provenance.short_words.begin(), bank.provenance.short_words.end());
    return bank;
}

/// `word<TAB>sentence` per line; sentence ids count up per word from 0.
inline SentenceBank load_curated_sentences(const std::filesystem::path& path) {
    SentenceBank bank;
    bank.provenance.kind = BankKind::curated;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const std::string line_ref = "line " + std::to_string(i + 1);
        const std::size_t tab = lines[i].find('\t');
        if (tab == std::string::npos) fail(ErrorKind::format, line_ref + " has no tab separator");
        const std::string word = to_lower(trim(std::string_view(lines[i]).substr(0, tab)));
        const std::string text = lines[i].substr(tab + 1);
        if (!contains_token(text, word))
            fail(ErrorKind::containment, line_ref + ": sentence does not contain '" + word + "'");
        auto& list = bank.sentences[word];
        list.push_back({static_cast<std::int64_t>(list.size()), text});
    }
    for (const auto& [word, list] : bank.sentences) bank.provenance.match_counts[word] = list.size();
    bank.provenance.requested_n = 0;
    return bank;
}

/// Sampled banks are stored as `word<TAB>sentence_id<TAB>sentence` lines.
inline std::string format_sentence_bank(const SentenceBank& bank) {
    std::string out;
    for (const auto& [word, list] : bank.sentences)
        for (const auto& s : list) out += word + "\t" + std::to_string(s.sentence_id) + "\t" + s.text + "\n";
    return out;
}

inline SentenceBank read_sentence_bank(const std::filesystem::path& path) {
    SentenceBank bank;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const std::string line_ref = "line " + std::to_string(i + 1);
        const auto first = lines[i].find('\t');
        const auto second = first == std::string::npos ? std::string::npos : lines[i].find('\t', first + 1);
        std::int64_t id = 0;
        if (second == std::string::npos || !parse_int(std::string_view(lines[i]).substr(first + 1, second - first - 1), id))
            fail(ErrorKind::format, line_ref + " must be word<TAB>sentence_id<TAB>sentence");
        const std::string word = lines[i].substr(0, first);
        const std::string text = lines[i].substr(second + 1);
        if (!contains_token(text, word))
            fail(ErrorKind::containment, line_ref + ": sentence does not contain '" + word + "'");
        bank.sentences[word].push_back({id, text});
    }
    for (const auto& [word, list] : bank.sentences) bank.provenance.match_counts[word] = list.size();
    return bank;
}

} // namespace semfeat
