#pragma once

#include "tsrisk/random.hpp"
#include "tsrisk/tensor.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

namespace tsrisk::testkit {

inline std::filesystem::path source_dir()
{
    return TSRISK_SOURCE_DIR;
}

inline std::filesystem::path fixture(const std::string& name)
{
    return source_dir() / "tests" / "fixtures" / name;
}

// Fresh directory under the build tree, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag)
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = tag;
        if (info) {
            name += std::string("_") + info->test_suite_name() + "_" + info->name();
        }
        for (char& c : name) {
            if (c == '/') {
                c = '_';
            }
        }
        path_ = std::filesystem::temp_directory_path() / ("tsrisk_" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0)
{
    Tensor t({rows, cols});
    for (double& v : t.values()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

} // namespace tsrisk::testkit
