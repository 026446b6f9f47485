#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testutil {

inline std::filesystem::path temp_dir() {
    auto p = std::filesystem::temp_directory_path() / "txn_tests";
    std::filesystem::create_directories(p);
    return p;
}

inline std::string temp_path(const std::string& name) { return (temp_dir() / name).string(); }

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace testutil
