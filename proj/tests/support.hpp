#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "flowmoods/catalog.hpp"
#include "flowmoods/error.hpp"

namespace flowmoods::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = "flowmoods-";
        if (info) name += std::string(info->test_suite_name()) + "-" + info->name();
        name += "-" + std::to_string(std::random_device{}());
        for (auto& c : name) {
            if (c == '/') c = '_';
        }
        path_ = std::filesystem::temp_directory_path() / name;
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string embedding_json(std::size_t dim, double value = 0.1) {
    std::string out = "[";
    for (std::size_t i = 0; i < dim; ++i) {
        if (i) out += ",";
        out += std::to_string(value);
    }
    return out + "]";
}

// Runs `f` and returns the flowmoods::Error it throws; fails the test if it
// throws nothing.
template <typename F>
Error expect_error(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    ADD_FAILURE() << "expected flowmoods::Error";
    return Error(ErrorCode::io_error, "no error thrown");
}

}  // namespace flowmoods::testing
