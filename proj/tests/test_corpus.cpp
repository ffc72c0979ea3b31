#include "support.hpp"

#include <semfeat/corpus.hpp>

using namespace semfeat;
using namespace semfeat::testing;

namespace {

std::string norms_header() {
    std::string h = "word";
    for (const auto& f : binder_feature_names()) h += "," + f;
    return h + "\n";
}

std::string norms_row(const std::string& word, double fill, std::size_t special = 999, double special_value = 0) {
    std::string row = word;
    for (std::size_t i = 0; i < kFeatureCount; ++i) row += "," + format_number(i == special ? special_value : fill);
    return row + "\n";
}

const char* kPairHeader = "property,object,Visual,Auditory,Haptic,Gustatory,Olfactory\n";

} // namespace

TEST(Norms, FeatureListHas65Entries) {
    EXPECT_EQ(binder_feature_names().size(), kFeatureCount);
    EXPECT_EQ(default_feature_categories().size(), kFeatureCount);
}

TEST(Norms, SingleZeroRow) {
    TempDir dir("norms");
    const auto path = write_text(dir / "n.csv", norms_header() + norms_row("dog", 0));
    const auto norms = load_binder_norms(path);
    ASSERT_EQ(norms.word_count(), 1u);
    EXPECT_EQ(norms.words[0], "dog");
    EXPECT_EQ(norms.feature_count(), 65u);
    for (std::size_t f = 0; f < 65; ++f) EXPECT_EQ(norms.values(0, f), 0.0);
}

TEST(Norms, OutOfRangeValueNamesRow) {
    TempDir dir("norms");
    const auto path =
        write_text(dir / "n.csv", norms_header() + norms_row("dog", 1) + norms_row("cat", 1, 4, 6.5));
    EXPECT_TRUE(throws_kind([&] { load_binder_norms(path); }, ErrorKind::range, "line 3"));
}

TEST(Norms, BoundaryValuesAccepted) {
    TempDir dir("norms");
    const auto path = write_text(dir / "n.csv", norms_header() + norms_row("dog", 6) + norms_row("cat", 0));
    const auto norms = load_binder_norms(path);
    EXPECT_EQ(norms.values(0, 10), 6.0);
}

TEST(Norms, MissingAndExtraColumnsNamed) {
    TempDir dir("norms");
    std::string header = norms_header();
    const auto missing = header.substr(0, header.rfind(',')) + "\n"; // drops Arousal
    std::string row = norms_row("dog", 1);
    row = row.substr(0, row.rfind(',')) + "\n";
    EXPECT_TRUE(throws_kind([&] { load_binder_norms(write_text(dir / "a.csv", missing + row)); }, ErrorKind::schema,
                            "Arousal"));

    const auto extra = header.substr(0, header.size() - 1) + ",Sparkle\n";
    EXPECT_TRUE(throws_kind([&] { load_binder_norms(write_text(dir / "b.csv", extra + norms_row("dog", 1) )); },
                            ErrorKind::schema, "Sparkle"));
}

TEST(Norms, ColumnOrderIsNormalized) {
    TempDir dir("norms");
    auto names = binder_feature_names();
    std::swap(names[0], names[64]);
    std::string header = "word";
    for (const auto& n : names) header += "," + n;
    std::string row = "Lamp";
    for (std::size_t i = 0; i < 65; ++i) row += "," + format_number(i == 0 ? 5.0 : 1.0);
    const auto norms = load_binder_norms(write_text(dir / "n.csv", header + "\n" + row + "\n"));
    EXPECT_EQ(norms.words[0], "lamp");
    EXPECT_EQ(norms.values(0, norms.feature_index("Arousal")), 5.0);
    EXPECT_EQ(norms.values(0, norms.feature_index("Vision")), 1.0);
}

TEST(Norms, WriteThenLoadRoundTrips) {
    TempDir dir("norms");
    Rng rng(7);
    std::string text = norms_header();
    for (int w = 0; w < 20; ++w) {
        text += "w" + std::to_string(w);
        for (std::size_t f = 0; f < 65; ++f) text += "," + format_number(rng.uniform(0.0, 6.0));
        text += "\n";
    }
    const auto a = load_binder_norms(write_text(dir / "a.csv", text));
    write_binder_norms(a, dir / "b.csv");
    const auto b = load_binder_norms(dir / "b.csv");
    EXPECT_EQ(a.words, b.words);
    EXPECT_EQ(a.values.data(), b.values.data());
}

TEST(Categories, HeaderOptionalAndDuplicatesRejected) {
    TempDir dir("cats");
    const auto m = load_feature_categories(write_text(dir / "c.csv", "feature,category\nVision,V\nTaste,G\n"));
    EXPECT_EQ(m.at("Taste"), "G");
    EXPECT_TRUE(throws_kind([&] { load_feature_categories(write_text(dir / "d.csv", "Vision,V\nVision,W\n")); },
                            ErrorKind::schema, "Vision"));
}

TEST(Pairs, ParsesRowAndCountsProperties) {
    TempDir dir("pairs");
    const auto path = write_text(dir / "p.csv", std::string(kPairHeader) + "abrasive,lava,3.1,0.2,4.5,0,0.4\n" +
                                                    "abrasive,sandpaper,2,1,5,0,0\n");
    const auto pairs = load_property_pairs(path);
    ASSERT_EQ(pairs.entries.size(), 2u);
    EXPECT_EQ(pairs.entries[0].property, "abrasive");
    EXPECT_EQ(pairs.entries[0].object, "lava");
    EXPECT_DOUBLE_EQ(pairs.entries[0].scores[2], 4.5);
    EXPECT_EQ(pairs.distinct_properties(), std::vector<std::string>{"abrasive"});
}

TEST(Pairs, PropertySeenOnceIsPairingError) {
    TempDir dir("pairs");
    const auto path = write_text(dir / "p.csv", std::string(kPairHeader) + "abrasive,lava,1,1,1,1,1\n" +
                                                    "abrasive,sand,1,1,1,1,1\nbabbling,brook,1,4,0,0,0\n");
    EXPECT_TRUE(throws_kind([&] { load_property_pairs(path); }, ErrorKind::pairing, "babbling"));
}

TEST(Pairs, ScoreAboveFiveIsRangeError) {
    TempDir dir("pairs");
    const auto path = write_text(dir / "p.csv", std::string(kPairHeader) + "a,b,5.5,1,1,1,1\na,c,1,1,1,1,1\n");
    EXPECT_TRUE(throws_kind([&] { load_property_pairs(path); }, ErrorKind::range, "line 2"));
}

TEST(WiC, ParsesIndexPairAndGold) {
    TempDir dir("wic");
    const auto data = write_text(dir / "d.txt", "bed\tN\t2-4\tI made the bed today .\tThe river bed was dry now .\n");
    const auto gold = write_text(dir / "g.txt", "T\n");
    const auto ds = load_wic(data, gold);
    ASSERT_EQ(ds.items.size(), 1u);
    EXPECT_EQ(ds.items[0].target, "bed");
    EXPECT_EQ(ds.items[0].pos, "N");
    EXPECT_EQ(ds.items[0].index1, 2u);
    EXPECT_EQ(ds.items[0].index2, 4u);
    EXPECT_TRUE(ds.items[0].gold);
}

TEST(WiC, EmptyFilesGiveEmptyDataset) {
    TempDir dir("wic");
    const auto ds = load_wic(write_text(dir / "d.txt", ""), write_text(dir / "g.txt", ""));
    EXPECT_TRUE(ds.items.empty());
}

TEST(WiC, LineCountMismatchIsAlignmentError) {
    TempDir dir("wic");
    std::string data, gold;
    for (int i = 0; i < 5; ++i) data += "run\tV\t0-0\trun fast\trun away\n";
    for (int i = 0; i < 4; ++i) gold += "F\n";
    EXPECT_TRUE(throws_kind([&] { load_wic(write_text(dir / "d.txt", data), write_text(dir / "g.txt", gold)); },
                            ErrorKind::alignment, "5 data lines but 4 gold lines"));
}

TEST(WiC, IndexOutsideSentenceNamesLine) {
    TempDir dir("wic");
    const auto data = write_text(dir / "d.txt", "run\tV\t0-0\trun fast\trun away\nrun\tV\t0-7\trun fast\trun away\n");
    const auto gold = write_text(dir / "g.txt", "T\nF\n");
    EXPECT_TRUE(throws_kind([&] { load_wic(data, gold); }, ErrorKind::index, "line 2"));
}

TEST(TokenMatch, WholeTokensOnly) {
    EXPECT_EQ(count_token_occurrences("The cat sat; a CAT ran.", "cat"), 2u);
    EXPECT_EQ(count_token_occurrences("catalog of cats", "cat"), 0u);
    EXPECT_EQ(count_token_occurrences("bobcat", "cat"), 0u);
    EXPECT_TRUE(contains_token("ice cream, please", "ice cream"));
}

TEST(Sampling, PopulationEqualToNKeepsEveryLine) {
    TempDir dir("sample");
    const auto corpus = write_text(dir / "c.txt", "the dog barked\na dog slept\nmy dog ran off\n");
    const auto bank = sample_sentences(corpus, {"dog"}, 3, 128, 11);
    ASSERT_EQ(bank.at("dog").size(), 3u);
    EXPECT_EQ(bank.at("dog")[0].text, "the dog barked");
    EXPECT_EQ(bank.at("dog")[1].text, "a dog slept");
    EXPECT_EQ(bank.at("dog")[2].text, "my dog ran off");
    EXPECT_TRUE(bank.provenance.warnings.empty());
}

TEST(Sampling, SameSeedGivesIdenticalBanks) {
    TempDir dir("sample");
    std::string text;
    for (int i = 0; i < 300; ++i) text += "line " + std::to_string(i) + (i % 3 == 0 ? " dog" : " cat") + " here\n";
    const auto corpus = write_text(dir / "c.txt", text);
    const auto a = sample_sentences(corpus, {"dog", "cat"}, 10, 128, 5);
    const auto b = sample_sentences(corpus, {"dog", "cat"}, 10, 128, 5);
    EXPECT_EQ(format_sentence_bank(a), format_sentence_bank(b));
    EXPECT_EQ(a.at("dog").size(), 10u);
    // A word's bank does not depend on the other targets.
    const auto solo = sample_sentences(corpus, {"dog"}, 10, 128, 5);
    EXPECT_EQ(solo.at("dog"), a.at("dog"));
}

TEST(Sampling, CatInsideCatalogDoesNotMatch) {
    TempDir dir("sample");
    const auto corpus = write_text(dir / "c.txt",
                                   "the catalog arrived\nnew catalogs\nno felines\ncatalogue pages\nconcatenate it\n");
    const auto bank = sample_sentences(corpus, {"cat"}, 5, 128, 1);
    EXPECT_TRUE(bank.at("cat").empty());
    ASSERT_EQ(bank.provenance.warnings.size(), 1u);
    EXPECT_EQ(bank.provenance.short_words, std::vector<std::string>{"cat"});
}

TEST(Sampling, LongSentencesSkipped) {
    TempDir dir("sample");
    const auto corpus = write_text(dir / "c.txt", "dog a b c d e f\ndog a\n");
    const auto bank = sample_sentences(corpus, {"dog"}, 5, 3, 1);
    ASSERT_EQ(bank.at("dog").size(), 1u);
    EXPECT_EQ(bank.at("dog")[0].sentence_id, 1);
}

TEST(Sampling, MissingCorpusIsIoError) {
    EXPECT_TRUE(throws_kind([] { sample_sentences("/nonexistent/corpus.txt", {"dog"}, 1); }, ErrorKind::io));
}

TEST(Curated, TenArmSentences) {
    TempDir dir("curated");
    std::string text;
    for (int i = 0; i < 10; ++i) text += "arm\tSentence " + std::to_string(i) + " about an arm.\n";
    const auto bank = load_curated_sentences(write_text(dir / "c.tsv", text));
    EXPECT_EQ(bank.at("arm").size(), 10u);
    EXPECT_EQ(bank.provenance.kind, BankKind::curated);
    EXPECT_EQ(bank.at("arm")[9].sentence_id, 9);
}

TEST(Curated, SentenceWithoutWordIsContainmentError) {
    TempDir dir("curated");
    const auto path = write_text(dir / "c.tsv", "arm\tMy arm hurts.\narm\tHe raised a weapon.\n");
    EXPECT_TRUE(throws_kind([&] { load_curated_sentences(path); }, ErrorKind::containment, "line 2"));
}

TEST(Curated, EmptyFileGivesEmptyBank) {
    TempDir dir("curated");
    EXPECT_EQ(load_curated_sentences(write_text(dir / "c.tsv", "")).total(), 0u);
}

TEST(SentenceBankFile, RoundTrip) {
    TempDir dir("bank");
    const auto corpus = write_text(dir / "c.txt", "a dog\nthe cat\ndog and cat\n");
    const auto bank = sample_sentences(corpus, {"dog", "cat"}, 2, 128, 3);
    write_text(dir / "b.tsv", format_sentence_bank(bank));
    const auto back = read_sentence_bank(dir / "b.tsv");
    EXPECT_EQ(back.sentences, bank.sentences);
}
