#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>

#include "opl/dataset.hpp"

namespace test_util {

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "opl_tests" / name;
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string write_file(const std::string& name, const std::string& content) {
    const auto path = temp_dir("io") / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string jtrain2_path() { return std::string(OPL_SOURCE_DIR) + "/data/jtrain2_prepared.csv"; }

}  // namespace test_util
