#include "support.hpp"

#include <semfeat/embedstore.hpp>

#include <cmath>
#include <cstring>
#include <limits>

using namespace semfeat;
using namespace semfeat::testing;

namespace {

EmbeddingDump random_dump(Rng& rng, std::size_t n_records, std::size_t n_layers, std::size_t dim) {
    std::vector<EmbeddingRecord> records;
    for (std::size_t i = 0; i < n_records; ++i) {
        std::vector<float> t(n_layers * dim);
        for (float& v : t) v = static_cast<float>(rng.normal());
        records.push_back(make_record("w" + std::to_string(i % 3), static_cast<std::int64_t>(i), n_layers, dim,
                                      std::move(t), i % 2 ? std::optional<std::string>("property") : std::nullopt));
    }
    return make_dump(std::move(records), n_layers, dim);
}

/// Rewrites the manifest JSON of a serialized dump.
std::string with_manifest(const std::string& bytes, const std::string& manifest) {
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 4);
    std::string out = bytes.substr(0, 8);
    const auto new_len = static_cast<std::uint32_t>(manifest.size());
    out.append(reinterpret_cast<const char*>(&new_len), 4);
    out += manifest;
    out += bytes.substr(12 + len);
    return out;
}

} // namespace

TEST(Semb, TwoRecordsRoundTrip) {
    TempDir dir("semb");
    Rng rng(1);
    const auto dump = random_dump(rng, 2, 3, 4);
    write_dump(dump, dir / "d.semb");
    const auto back = read_dump(dir / "d.semb");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.manifest().n_layers, 3u);
    EXPECT_EQ(back.manifest().dim, 4u);
    EXPECT_EQ(back.records()[1].tensor.size(), 12u);
    EXPECT_TRUE(back == dump);
}

TEST(Semb, SecondWriteIsByteIdentical) {
    TempDir dir("semb");
    Rng rng(2);
    write_dump(random_dump(rng, 1, 2, 5), dir / "a.semb");
    write_dump(read_dump(dir / "a.semb"), dir / "b.semb");
    EXPECT_EQ(read_file(dir / "a.semb"), read_file(dir / "b.semb"));
}

TEST(Semb, ZeroRecordDumpAccepted) {
    TempDir dir("semb");
    write_dump(make_dump({}, 2, 3), dir / "z.semb");
    const auto back = read_dump(dir / "z.semb");
    EXPECT_EQ(back.size(), 0u);
    EXPECT_EQ(back.manifest().dim, 3u);
}

TEST(Semb, BadMagicIsFormatError) {
    Rng rng(3);
    std::string bytes = serialize_dump(random_dump(rng, 1, 1, 2));
    bytes.replace(0, 4, "XXXX");
    EXPECT_TRUE(throws_kind([&] { parse_dump(bytes); }, ErrorKind::format, "magic"));
}

TEST(Semb, UnknownVersionIsFormatError) {
    Rng rng(3);
    std::string bytes = serialize_dump(random_dump(rng, 1, 1, 2));
    bytes[4] = 9;
    EXPECT_TRUE(throws_kind([&] { parse_dump(bytes); }, ErrorKind::format, "version"));
}

TEST(Semb, ManifestClaimsMoreRecordsThanPresent) {
    Rng rng(4);
    const auto dump = random_dump(rng, 4, 2, 3);
    auto manifest = detail::manifest_json(dump.manifest());
    manifest["record_count"] = 5;
    const auto bytes = with_manifest(serialize_dump(dump), manifest.dump());
    EXPECT_TRUE(throws_kind([&] { parse_dump(bytes); }, ErrorKind::length, "byte offset " + std::to_string(bytes.size())));
}

TEST(Semb, TrailingBytesAreLengthError) {
    Rng rng(4);
    const auto dump = random_dump(rng, 4, 2, 3);
    auto manifest = detail::manifest_json(dump.manifest());
    manifest["record_count"] = 3;
    EXPECT_TRUE(throws_kind([&] { parse_dump(with_manifest(serialize_dump(dump), manifest.dump())); },
                            ErrorKind::length, "trailing"));
}

TEST(Semb, EveryTruncationReportsOffset) {
    Rng rng(5);
    const std::string bytes = serialize_dump(random_dump(rng, 3, 2, 2));
    for (std::size_t cut = 4; cut < bytes.size(); ++cut) {
        try {
            parse_dump(std::string_view(bytes).substr(0, cut));
            ADD_FAILURE() << "cut at " << cut << " parsed";
        } catch (const Error& e) {
            // A cut inside a JSON blob is caught as truncation before parsing.
            EXPECT_EQ(e.kind(), ErrorKind::length) << cut << ": " << e.what();
            EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
        }
    }
}

TEST(Semb, NonFiniteRejectedBeforeWriting) {
    std::vector<float> t = {1.0f, std::numeric_limits<float>::quiet_NaN()};
    EXPECT_TRUE(throws_kind([&] { make_dump({make_record("dog", 0, 1, 2, t)}, 1, 2); }, ErrorKind::data, "dog#0.0"));
}

TEST(Semb, NonFiniteInFileNamesKey) {
    Rng rng(6);
    std::string bytes = serialize_dump(random_dump(rng, 1, 1, 2));
    const float inf = std::numeric_limits<float>::infinity();
    std::memcpy(bytes.data() + bytes.size() - 4, &inf, 4);
    EXPECT_TRUE(throws_kind([&] { parse_dump(bytes); }, ErrorKind::data, "w0#0.0"));
}

TEST(Semb, DuplicateKeysRejected) {
    EXPECT_TRUE(throws_kind(
        [] { make_dump({make_record("a", 0, 1, 1, {1.0f}), make_record("a", 0, 1, 1, {2.0f})}, 1, 1); },
        ErrorKind::data, "duplicate"));
}

TEST(Semb, ShapeMismatchRejected) {
    EXPECT_TRUE(throws_kind([] { make_dump({make_record("a", 0, 1, 2, {1.0f, 2.0f})}, 2, 2); }, ErrorKind::shape));
}

TEST(MeanEmbedding, IdenticalRecordsGiveThatVector) {
    std::vector<EmbeddingRecord> rs;
    for (int i = 0; i < 3; ++i) rs.push_back(make_record("v", i, 1, 3, {0.5f, -2.0f, 7.25f}));
    const auto dump = make_dump(std::move(rs), 1, 3);
    EXPECT_EQ(mean_occurrence_embedding(dump, "v", 0), (std::vector<double>{0.5, -2.0, 7.25}));
}

TEST(MeanEmbedding, Midpoint) {
    const auto dump = make_dump({make_record("x", 0, 1, 2, {1, 0}), make_record("x", 1, 1, 2, {0, 1})}, 1, 2);
    EXPECT_EQ(mean_occurrence_embedding(dump, "x", 0), (std::vector<double>{0.5, 0.5}));
}

TEST(MeanEmbedding, MatchesBruteForceOn250Records) {
    Rng rng(8);
    const std::size_t L = 3, D = 16;
    std::vector<EmbeddingRecord> rs;
    for (int i = 0; i < 250; ++i) {
        std::vector<float> t(L * D);
        for (float& v : t) v = static_cast<float>(rng.uniform(-10.0, 10.0));
        rs.push_back(make_record("many", i, L, D, std::move(t)));
    }
    const auto dump = make_dump(rs, L, D);
    for (std::size_t l = 0; l < L; ++l) {
        const auto got = mean_occurrence_embedding(dump, "many", l);
        for (std::size_t d = 0; d < D; ++d) {
            long double sum = 0;
            for (const auto& r : rs) sum += r.tensor[l * D + d];
            EXPECT_NEAR(got[d], static_cast<double>(sum / 250), 1e-6);
        }
    }
}

TEST(MeanEmbedding, UnknownWordAndBadLayer) {
    const auto dump = make_dump({make_record("x", 0, 2, 1, {1, 2})}, 2, 1);
    EXPECT_TRUE(throws_kind([&] { mean_occurrence_embedding(dump, "y", 0); }, ErrorKind::lookup, "'y'"));
    EXPECT_TRUE(throws_kind([&] { mean_occurrence_embedding(dump, "x", 2); }, ErrorKind::index));
}

TEST(DesignMatrix, MissingWordsAllListed) {
    const auto dump = make_dump({make_record("x", 0, 1, 1, {1})}, 1, 1);
    EXPECT_TRUE(throws_kind([&] { design_matrix(dump, std::vector<std::string>{"a", "x", "b"}, 0); },
                            ErrorKind::lookup, "2 word(s) missing from dump: a b"));
}

TEST(DesignMatrix, SingleKeyReturnsRecordRow) {
    const auto dump = make_dump({make_record("x", 4, 2, 2, {1, 2, 3, 4}, "property")}, 2, 2);
    const auto X = design_matrix(dump, std::vector<OccurrenceKey>{{"x", 4, 0, "property"}}, 1);
    EXPECT_EQ(X.data(), (std::vector<double>{3, 4}));
}

TEST(DesignMatrix, RowsFollowWordOrder) {
    Rng rng(9);
    const auto dump = random_dump(rng, 9, 1, 4);
    const std::vector<std::string> order = {"w2", "w0", "w1"};
    const auto X = design_matrix(dump, order, 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto mean = mean_occurrence_embedding(dump, order[i], 0);
        for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(X(i, d), mean[d]);
    }
}

TEST(StaticTable, ThreeLinesGiveOneLayerDump) {
    TempDir dir("static");
    const auto path = write_text(dir / "t.txt", "3 4\ncat 1 2 3 4\ndog 0 0 0 1\nemu -1 .5 2 8\n");
    const auto dump = static_dump_from_table(path);
    EXPECT_EQ(dump.size(), 3u);
    EXPECT_EQ(dump.manifest().n_layers, 1u);
    EXPECT_EQ(dump.manifest().dim, 4u);
    EXPECT_EQ(mean_occurrence_embedding(dump, "emu", 0), (std::vector<double>{-1, 0.5, 2, 8}));
}

TEST(StaticTable, DuplicateWordAndRaggedRows) {
    TempDir dir("static");
    EXPECT_TRUE(throws_kind([&] { static_dump_from_table(write_text(dir / "a.txt", "cat 1 2\ncat 3 4\n")); },
                            ErrorKind::data, "duplicate key 'cat'"));
    EXPECT_TRUE(throws_kind([&] { static_dump_from_table(write_text(dir / "b.txt", "cat 1 2\ndog 3\n")); },
                            ErrorKind::shape, "line 2"));
}

TEST(StaticTable, VocabularyRestricts) {
    TempDir dir("static");
    const std::vector<std::string> vocab = {"dog", "yak"};
    const auto dump = static_dump_from_table(write_text(dir / "t.txt", "cat 1\ndog 2\nemu 3\n"), "nb", &vocab);
    EXPECT_EQ(dump.size(), 1u);
    EXPECT_TRUE(dump.has_word("dog"));
}
