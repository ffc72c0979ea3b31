#pragma once

// Shared helpers for the unit suites: scratch directories, file writers,
// error assertions and small hand-rolled generators.

#include <semfeat/embedstore.hpp>
#include <semfeat/error.hpp>
#include <semfeat/util.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace semfeat::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string tag = name;
        if (info != nullptr) tag += std::string("_") + info->test_suite_name() + "_" + info->name();
        path_ = fs::temp_directory_path() / ("semfeat_" + tag);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline fs::path write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

/// Runs `body`, expecting an Error of `kind` whose message contains `needle`.
inline ::testing::AssertionResult throws_kind(const std::function<void()>& body, ErrorKind kind,
                                              const std::string& needle = "") {
    try {
        body();
    } catch (const Error& e) {
        if (e.kind() != kind)
            return ::testing::AssertionFailure() << "wrong kind: " << e.what();
        if (std::string(e.what()).find(needle) == std::string::npos)
            return ::testing::AssertionFailure() << "message lacks '" << needle << "': " << e.what();
        return ::testing::AssertionSuccess();
    } catch (const std::exception& e) {
        return ::testing::AssertionFailure() << "non-library exception: " << e.what();
    }
    return ::testing::AssertionFailure() << "no exception thrown";
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

inline EmbeddingRecord make_record(std::string word, std::int64_t sid, std::size_t n_layers, std::size_t dim,
                                   std::vector<float> tensor, std::optional<std::string> role = std::nullopt) {
    EmbeddingRecord r;
    r.key = {std::move(word), sid, 0, std::move(role)};
    r.n_layers = n_layers;
    r.dim = dim;
    r.tensor = std::move(tensor);
    return r;
}

inline EmbeddingDump make_dump(std::vector<EmbeddingRecord> records, std::size_t n_layers, std::size_t dim,
                               std::string model_id = "test-model") {
    DumpManifest m{std::move(model_id), n_layers, dim, Pooling::mean, records.size()};
    return EmbeddingDump(std::move(m), std::move(records));
}

} // namespace semfeat::testing
